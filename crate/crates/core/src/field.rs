//! Gridded real and complex maps with a physical pixel pitch.

use num_complex::Complex64;

use crate::error::{QpiError, Result};

/// Grid metadata: size in pixels and object-plane pitch in micrometers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub pitch: f64,
}

/// Smallest admissible grid side.
pub const MIN_SIDE: usize = 8;

impl Grid {
    pub fn new(width: usize, height: usize, pitch: f64) -> Result<Self> {
        let g = Grid {
            width,
            height,
            pitch,
        };
        g.check()?;
        Ok(g)
    }

    pub fn square(n: usize, pitch: f64) -> Result<Self> {
        Self::new(n, n, pitch)
    }

    pub fn check(&self) -> Result<()> {
        if self.width < MIN_SIDE || self.height < MIN_SIDE {
            return Err(QpiError::InvalidGrid(format!(
                "{}x{} is smaller than the {MIN_SIDE}x{MIN_SIDE} minimum",
                self.width, self.height
            )));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(QpiError::InvalidGrid(format!(
                "pitch {} must be positive",
                self.pitch
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.width == other.width && self.height == other.height && self.pitch == other.pitch
    }

    pub fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(QpiError::GridMismatch(format!(
                "{what}: {}x{}@{} vs {}x{}@{}",
                self.width, self.height, self.pitch, other.width, other.height, other.pitch
            )))
        }
    }
}

/// Real-valued map, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField2D {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.check()?;
        if values.len() != grid.len() {
            return Err(QpiError::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(QpiError::InvalidInput(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness scan. Callers guarantee the invariants.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn filled(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    pub fn zeros(grid: Grid) -> Result<Self> {
        Self::filled(grid, 0.0)
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        grid.check()?;
        let mut v = Vec::with_capacity(grid.len());
        for r in 0..grid.height {
            for c in 0..grid.width {
                v.push(f(r, c));
            }
        }
        Self::new(grid, v)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn width(&self) -> usize {
        self.grid.width
    }
    pub fn height(&self) -> usize {
        self.grid.height
    }
    pub fn pitch(&self) -> f64 {
        self.grid.pitch
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.grid.idx(row, col)]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    /// Population variance over all pixels.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "zip_map")?;
        Ok(Self::from_parts(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// Same values on a grid with a different pitch (used after binning).
    pub fn with_pitch(&self, pitch: f64) -> Result<Self> {
        Self::new(Grid { pitch, ..self.grid }, self.values.clone())
    }

    /// Rectangular sub-window.
    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        if row0 + height > self.grid.height || col0 + width > self.grid.width {
            return Err(QpiError::InvalidInput(
                "crop window exceeds the field".into(),
            ));
        }
        let g = Grid::new(width, height, self.grid.pitch)?;
        let mut v = Vec::with_capacity(g.len());
        for r in row0..row0 + height {
            let s = self.grid.idx(r, col0);
            v.extend_from_slice(&self.values[s..s + width]);
        }
        Ok(Self::from_parts(g, v))
    }

    /// Rotation by 180 degrees (point reflection about the grid centre).
    pub fn rotate180(&self) -> Self {
        let mut v = self.values.clone();
        v.reverse();
        Self::from_parts(self.grid, v)
    }

    /// Mean of the pixels where `mask` is true.
    pub fn masked_mean(&self, mask: &[bool]) -> Option<f64> {
        let (s, n) = self
            .values
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
        (n > 0).then(|| s / n as f64)
    }

    /// Row of values.
    pub fn row(&self, r: usize) -> &[f64] {
        let s = self.grid.idx(r, 0);
        &self.values[s..s + self.grid.width]
    }
}

/// Complex-valued map, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField2D {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField2D {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        grid.check()?;
        if values.len() != grid.len() {
            return Err(QpiError::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(QpiError::InvalidInput("non-finite complex value".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn filled(grid: Grid, value: Complex64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        grid.check()?;
        let mut v = Vec::with_capacity(grid.len());
        for r in 0..grid.height {
            for c in 0..grid.width {
                v.push(f(r, c));
            }
        }
        Self::new(grid, v)
    }

    pub fn from_real(field: &ScalarField2D) -> Self {
        Self::from_parts(
            field.grid,
            field
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        )
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn intensity(&self) -> ScalarField2D {
        ScalarField2D::from_parts(
            self.grid,
            self.values.iter().map(|z| z.norm_sqr()).collect(),
        )
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_and_bad_pitch() {
        assert!(Grid::new(7, 8, 1.0).is_err());
        assert!(Grid::new(8, 8, 0.0).is_err());
        assert!(Grid::new(8, 8, 1.0).is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        let g = Grid::square(8, 1.0).unwrap();
        let mut v = vec![0.0; 64];
        v[3] = f64::NAN;
        assert!(ScalarField2D::new(g, v).is_err());
    }

    #[test]
    fn rotate_is_point_reflection() {
        let g = Grid::new(8, 10, 1.0).unwrap();
        let f = ScalarField2D::from_fn(g, |r, c| (r * 100 + c) as f64).unwrap();
        let r = f.rotate180();
        assert_eq!(r.get(0, 0), f.get(9, 7));
        assert_eq!(r.get(2, 5), f.get(7, 2));
        assert_eq!(r.rotate180(), f);
    }

    #[test]
    fn crop_extracts_window() {
        let g = Grid::square(10, 1.0).unwrap();
        let f = ScalarField2D::from_fn(g, |r, c| (r * 10 + c) as f64).unwrap();
        let c = f.crop(1, 2, 8, 8).unwrap();
        assert_eq!(c.get(0, 0), 12.0);
        assert_eq!(c.get(7, 7), 89.0);
    }
}
