//! The engineered π/∅ test target.
//!
//! Both glyphs live in a 220×220 window centred in the grid. Coordinates below are
//! pixel centres relative to the window corner.

use crate::error::{QpiError, Result};
use crate::field::{Grid, ScalarField2D};
use crate::object::ObjectSpec;

/// Side of the square window holding the glyphs.
pub const WINDOW: usize = 220;

// π: top bar and two legs (row/col ranges, half-open).
const PI_BAR: ([f64; 2], [f64; 2]) = ([18.0, 58.0], [24.0, 204.0]);
const PI_LEG_L: ([f64; 2], [f64; 2]) = ([18.0, 202.0], [52.0, 112.0]);
const PI_LEG_R: ([f64; 2], [f64; 2]) = ([18.0, 202.0], [148.0, 188.0]);
// ∅: ring plus a diagonal slash.
const NULL_CENTRE: (f64, f64) = (130.0, 136.0); // (x, y)
const NULL_R_IN: f64 = 18.0;
const NULL_R_OUT: f64 = 40.0;
const SLASH_HALF_WIDTH: f64 = 8.0;
const SLASH_REACH: f64 = 46.0;

/// Edge used for resolution metrology: left boundary of the left π leg.
const EDGE_COL: usize = 52;
const EDGE_ROWS: [usize; 2] = [186, 191];
const EDGE_HALF_WINDOW: usize = 36;

/// Placement of the glyph window inside a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetLayout {
    pub grid: Grid,
    pub offset_x: usize,
    pub offset_y: usize,
}

/// Horizontal cut through a vertical glyph edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSite {
    /// Rows averaged into the profile (half-open).
    pub rows: (usize, usize),
    /// Column of the first pixel inside the glyph.
    pub edge_col: usize,
    /// Fit window (half-open columns).
    pub cols: (usize, usize),
}

impl TargetLayout {
    pub fn new(grid: Grid) -> Result<Self> {
        if grid.width < WINDOW || grid.height < WINDOW {
            return Err(QpiError::Sizing(format!(
                "grid {}x{} cannot hold the {WINDOW}x{WINDOW} glyph window",
                grid.width, grid.height
            )));
        }
        Ok(Self {
            grid,
            offset_x: (grid.width - WINDOW) / 2,
            offset_y: (grid.height - WINDOW) / 2,
        })
    }

    fn local(&self, row: usize, col: usize) -> (f64, f64) {
        (
            col as f64 + 0.5 - self.offset_x as f64,
            row as f64 + 0.5 - self.offset_y as f64,
        )
    }

    fn build(&self, f: impl Fn(f64, f64) -> bool) -> Vec<bool> {
        let g = self.grid;
        let mut m = Vec::with_capacity(g.len());
        for r in 0..g.height {
            for c in 0..g.width {
                let (x, y) = self.local(r, c);
                m.push(f(x, y));
            }
        }
        m
    }

    pub fn pi_mask(&self) -> Vec<bool> {
        let inside = |(ry, rx): ([f64; 2], [f64; 2]), x: f64, y: f64| {
            y >= ry[0] && y < ry[1] && x >= rx[0] && x < rx[1]
        };
        self.build(|x, y| inside(PI_BAR, x, y) || inside(PI_LEG_L, x, y) || inside(PI_LEG_R, x, y))
    }

    pub fn null_mask(&self) -> Vec<bool> {
        self.build(|x, y| {
            let (dx, dy) = (x - NULL_CENTRE.0, y - NULL_CENTRE.1);
            let r = dx.hypot(dy);
            let ring = (NULL_R_IN..NULL_R_OUT).contains(&r);
            let slash =
                ((dx + dy) / std::f64::consts::SQRT_2).abs() < SLASH_HALF_WIDTH && r < SLASH_REACH;
            ring || slash
        })
    }

    pub fn resolution_edge(&self) -> EdgeSite {
        let e = EDGE_COL + self.offset_x;
        EdgeSite {
            rows: (EDGE_ROWS[0] + self.offset_y, EDGE_ROWS[1] + self.offset_y),
            edge_col: e,
            cols: (e - EDGE_HALF_WINDOW, e + EDGE_HALF_WINDOW),
        }
    }
}

/// Renders the π/∅ target. Phases add where the glyphs overlap.
pub fn generate_test_target(
    grid: Grid,
    phase_pi: f64,
    phase_null: f64,
    tau_null: f64,
) -> Result<ObjectSpec> {
    grid.check()?;
    let layout = TargetLayout::new(grid)?;
    let (pi, null) = (layout.pi_mask(), layout.null_mask());
    let phi: Vec<f64> = pi
        .iter()
        .zip(&null)
        .map(|(&p, &n)| if p { phase_pi } else { 0.0 } + if n { phase_null } else { 0.0 })
        .collect();
    let tau: Vec<f64> = null
        .iter()
        .map(|&n| if n { tau_null } else { 1.0 })
        .collect();
    ObjectSpec::new(
        ScalarField2D::new(grid, tau)?,
        ScalarField2D::new(grid, phi)?,
    )
}

/// Offsets of a disk of the given radius in pixels.
fn disk(radius: f64) -> Vec<(isize, isize)> {
    let r = radius.ceil() as isize;
    let mut v = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= radius * radius {
                v.push((dy, dx));
            }
        }
    }
    v
}

/// Binary dilation with a disk (outside the grid counts as false).
pub fn dilate(mask: &[bool], grid: Grid, radius: f64) -> Vec<bool> {
    let offs = disk(radius);
    let (w, h) = (grid.width as isize, grid.height as isize);
    let mut out = vec![false; mask.len()];
    for r in 0..h {
        for c in 0..w {
            out[(r * w + c) as usize] = offs.iter().any(|&(dy, dx)| {
                let (rr, cc) = (r + dy, c + dx);
                rr >= 0 && rr < h && cc >= 0 && cc < w && mask[(rr * w + cc) as usize]
            });
        }
    }
    out
}

/// Binary erosion with a disk (outside the grid counts as false).
pub fn erode(mask: &[bool], grid: Grid, radius: f64) -> Vec<bool> {
    let inv: Vec<bool> = mask.iter().map(|m| !m).collect();
    let d = dilate(&inv, grid, radius);
    // Pixels near the border cannot be interior.
    let offs = disk(radius);
    let (w, h) = (grid.width as isize, grid.height as isize);
    let mut out = vec![false; mask.len()];
    for r in 0..h {
        for c in 0..w {
            let i = (r * w + c) as usize;
            let fits = offs
                .iter()
                .all(|&(dy, dx)| r + dy >= 0 && r + dy < h && c + dx >= 0 && c + dx < w);
            out[i] = mask[i] && !d[i] && fits;
        }
    }
    out
}

/// Regions for a glyph step readout.
#[derive(Debug, Clone)]
pub struct StepRegions {
    pub interior: Vec<bool>,
    pub background: Vec<bool>,
}

/// Glyph-only interior eroded by 4 px and a background annulus 6..16 px outside
/// the glyph, excluding the other glyph.
pub fn step_regions(glyph: &[bool], other: &[bool], grid: Grid) -> StepRegions {
    let own: Vec<bool> = glyph.iter().zip(other).map(|(&g, &o)| g && !o).collect();
    let interior = erode(&own, grid, 4.0);
    let near = dilate(glyph, grid, 6.0);
    let far = dilate(glyph, grid, 16.0);
    let other_d = dilate(other, grid, 6.0);
    let background = (0..glyph.len())
        .map(|i| far[i] && !near[i] && !other_d[i])
        .collect();
    StepRegions {
        interior,
        background,
    }
}
