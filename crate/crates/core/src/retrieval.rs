//! Transmittance and phase estimation from twin-beam intensities.

use num_complex::Complex64;

use crate::config::CheckedConfig;
use crate::error::{QpiError, Result};
use crate::field::{ComplexField2D, Grid, ScalarField2D};
use crate::spectral::{dst1_2d, fftfreq, Fft2};
use crate::twinbeam::{bin_counts, eta_c};

/// Idler-subtraction weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KMode {
    Classical,
    /// η0·η_c(D): optimal for transmittance.
    TauOpt,
    /// η0: optimal for TIE phase retrieval.
    TieOpt,
    Explicit(f64),
}

impl KMode {
    pub fn resolve(&self, eta0: f64, d_factor: f64, epsilon: f64) -> f64 {
        match *self {
            KMode::Classical => 0.0,
            KMode::TauOpt => k_tau_opt(eta0, d_factor, epsilon),
            KMode::TieOpt => k_tie_opt(eta0),
            KMode::Explicit(k) => k,
        }
    }

    pub fn label(&self) -> String {
        match self {
            KMode::Classical => "classical".into(),
            KMode::TauOpt => "tau".into(),
            KMode::TieOpt => "tie".into(),
            KMode::Explicit(k) => format!("{k}"),
        }
    }
}

impl std::str::FromStr for KMode {
    type Err = QpiError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "classical" => Ok(KMode::Classical),
            "tau" | "tau_opt" => Ok(KMode::TauOpt),
            "tie" | "tie_opt" => Ok(KMode::TieOpt),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|k| k.is_finite())
                .map(KMode::Explicit)
                .ok_or_else(|| QpiError::Config(vec![format!("unknown k mode '{v}'")])),
        }
    }
}

pub fn k_tau_opt(eta0: f64, d_factor: f64, epsilon: f64) -> f64 {
    eta0 * eta_c(d_factor, epsilon)
}

pub fn k_tie_opt(eta0: f64) -> f64 {
    eta0
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalConfig {
    pub dz_mm: f64,
    pub k_mode: KMode,
    /// Resolved weight for `k_mode`.
    pub k: f64,
    /// Integration window side in camera pixels (realizes L_det).
    pub bin_px: usize,
    /// Radians per micrometer.
    pub wavenumber: f64,
    /// Clamp for I(x,0) as a fraction of its mean.
    pub intensity_floor: f64,
    /// ⟨N_s(x,0)⟩ of object-free frames at the working binning.
    pub reference_mean: Option<ScalarField2D>,
    /// ⟨N_i⟩ (registered) of object-free frames at the working binning.
    pub idler_mean: Option<ScalarField2D>,
}

impl RetrievalConfig {
    pub fn new(cfg: &CheckedConfig, dz_mm: f64, k_mode: KMode, bin_px: usize) -> Result<Self> {
        if !(dz_mm > 0.0) {
            return Err(QpiError::Config(vec![format!(
                "dz must be positive, got {dz_mm}"
            )]));
        }
        if bin_px == 0 {
            return Err(QpiError::Config(vec!["bin_px must be at least 1".into()]));
        }
        let t = &cfg.twin;
        Ok(Self {
            dz_mm,
            k_mode,
            k: k_mode.resolve(t.eta0, cfg.d_factor(bin_px), t.epsilon),
            bin_px,
            wavenumber: cfg.optical.wavenumber(),
            intensity_floor: 1e-3,
            reference_mean: None,
            idler_mean: None,
        })
    }

    pub fn with_k(&self, k_mode: KMode, cfg: &CheckedConfig) -> Self {
        let t = &cfg.twin;
        Self {
            k_mode,
            k: k_mode.resolve(t.eta0, cfg.d_factor(self.bin_px), t.epsilon),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Classical,
    Quantum,
}

/// Retrieved phase in radians, zero on the border.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseImage {
    pub values: ScalarField2D,
    pub dz_mm: f64,
    pub k: f64,
    pub provenance: Provenance,
    pub aliasing: bool,
}

/// Centred differences with one-sided differences on the border; returns (∂/∂x, ∂/∂y).
pub fn gradient(f: &ScalarField2D) -> (Vec<f64>, Vec<f64>) {
    let (w, h, p) = (f.width(), f.height(), f.pitch());
    let v = f.values();
    let mut gx = vec![0.0; v.len()];
    let mut gy = vec![0.0; v.len()];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            gx[i] = if c == 0 {
                (v[i + 1] - v[i]) / p
            } else if c == w - 1 {
                (v[i] - v[i - 1]) / p
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * p)
            };
            gy[i] = if r == 0 {
                (v[i + w] - v[i]) / p
            } else if r == h - 1 {
                (v[i] - v[i - w]) / p
            } else {
                (v[i + w] - v[i - w]) / (2.0 * p)
            };
        }
    }
    (gx, gy)
}

fn divergence(grid: Grid, fx: Vec<f64>, fy: Vec<f64>) -> Vec<f64> {
    let (dx, _) = gradient(&ScalarField2D::from_parts(grid, fx));
    let (_, dy) = gradient(&ScalarField2D::from_parts(grid, fy));
    dx.iter().zip(&dy).map(|(a, b)| a + b).collect()
}

/// Solves ∇²u = rhs with u = 0 on the outermost pixels.
///
/// Sine-series (DST-I) solve on the interior nodes with the spectral Laplacian
/// eigenvalues −(πm/Lx)² − (πn/Ly)², where L = (N − 1)·pitch.
pub fn poisson_solve_dirichlet(rhs: &ScalarField2D) -> Result<ScalarField2D> {
    let (w, h, p) = (rhs.width(), rhs.height(), rhs.pitch());
    let (nx, ny) = (w - 2, h - 2);
    let mut c = Vec::with_capacity(nx * ny);
    for r in 1..h - 1 {
        c.extend_from_slice(&rhs.row(r)[1..w - 1]);
    }
    dst1_2d(&mut c, nx, ny);
    let (lx, ly) = ((w - 1) as f64 * p, (h - 1) as f64 * p);
    let pi = std::f64::consts::PI;
    let norm = 4.0 / ((nx + 1) * (ny + 1)) as f64;
    for j in 0..ny {
        let ky = pi * (j + 1) as f64 / ly;
        for i in 0..nx {
            let kx = pi * (i + 1) as f64 / lx;
            c[j * nx + i] *= -norm / (kx * kx + ky * ky);
        }
    }
    dst1_2d(&mut c, nx, ny);
    let mut u = vec![0.0; w * h];
    for r in 1..h - 1 {
        u[r * w + 1..r * w + w - 1].copy_from_slice(&c[(r - 1) * nx..r * nx]);
    }
    ScalarField2D::new(rhs.grid(), u)
}

/// (I₊ − I₋) / (2 dz), in counts per millimeter.
pub fn axial_derivative(
    i_plus: &ScalarField2D,
    i_minus: &ScalarField2D,
    dz_mm: f64,
) -> Result<ScalarField2D> {
    if !(dz_mm > 0.0) {
        return Err(QpiError::InvalidInput(format!(
            "dz = {dz_mm} must be positive"
        )));
    }
    i_plus.zip_map(i_minus, |a, b| (a - b) / (2.0 * dz_mm))
}

/// Overlapping `b × b` box sums on the native grid (edges replicated), the
/// integration-area model used for phase retrieval at resolution factor D.
pub fn box_sum(f: &ScalarField2D, b: usize) -> ScalarField2D {
    if b <= 1 {
        return f.clone();
    }
    let (w, h) = (f.width(), f.height());
    let lo = (b / 2) as isize;
    let pass = |src: &[f64], n: usize, stride: usize, count: usize, step: usize| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for line in 0..count {
            let base = line * step;
            for i in 0..n {
                let mut s = 0.0;
                for t in 0..b as isize {
                    let j = (i as isize - lo + t).clamp(0, n as isize - 1) as usize;
                    s += src[base + j * stride];
                }
                out[base + i * stride] = s;
            }
        }
        out
    };
    let rows = pass(f.values(), w, 1, h, w);
    let both = pass(&rows, h, w, w, 1);
    ScalarField2D::from_parts(f.grid(), both)
}

/// TIE phase retrieval through Teague's auxiliary function.
///
/// Solves ∇²ψ = −k ∂I/∂z, forms ∇·(∇ψ / I₀) with I₀ clamped at
/// `intensity_floor · mean(I₀)`, and solves ∇²φ = that divergence. With
/// `bin_px > 1` all three planes are first box-integrated over `bin_px` pixels.
pub fn tie_retrieve(
    i_zero: &ScalarField2D,
    i_plus: &ScalarField2D,
    i_minus: &ScalarField2D,
    config: &RetrievalConfig,
) -> Result<PhaseImage> {
    let grid = i_zero.grid();
    grid.ensure_same(&i_plus.grid(), "tie i_plus")?;
    grid.ensure_same(&i_minus.grid(), "tie i_minus")?;
    let (i0, ip, im) = (
        box_sum(i_zero, config.bin_px),
        box_sum(i_plus, config.bin_px),
        box_sum(i_minus, config.bin_px),
    );
    let mean0 = i0.mean();
    if !(mean0 > 0.0) {
        return Err(QpiError::InvalidInput(
            "in-focus intensity has no positive mean".into(),
        ));
    }
    // Counts per micrometer so that k (rad/µm) gives a dimensionless source.
    let didz = axial_derivative(&ip, &im, config.dz_mm)?.scale(1e-3);
    let psi = poisson_solve_dirichlet(&didz.scale(-config.wavenumber))?;
    let (gx, gy) = gradient(&psi);
    let floor = config.intensity_floor * mean0;
    let inv: Vec<f64> = i0.values().iter().map(|&v| 1.0 / v.max(floor)).collect();
    let fx = gx.iter().zip(&inv).map(|(g, s)| g * s).collect();
    let fy = gy.iter().zip(&inv).map(|(g, s)| g * s).collect();
    let div = ScalarField2D::from_parts(grid, divergence(grid, fx, fy));
    let phi = poisson_solve_dirichlet(&div)?;
    Ok(PhaseImage {
        values: phi,
        dz_mm: config.dz_mm,
        k: config.k,
        provenance: if config.k == 0.0 {
            Provenance::Classical
        } else {
            Provenance::Quantum
        },
        aliasing: false,
    })
}

/// n_s − k (n_i − ⟨n_i⟩), with `n_i` already registered onto the signal grid.
pub fn quantum_correct(
    n_s: &ScalarField2D,
    n_i: &ScalarField2D,
    mean_i: Option<&ScalarField2D>,
    k: f64,
) -> Result<ScalarField2D> {
    let mean_i =
        mean_i.ok_or_else(|| QpiError::InvalidInput("missing idler calibration mean".into()))?;
    n_s.grid().ensure_same(&n_i.grid(), "quantum_correct n_i")?;
    n_s.grid()
        .ensure_same(&mean_i.grid(), "quantum_correct mean_i")?;
    if k == 0.0 {
        return Ok(n_s.clone());
    }
    let d = n_i.sub(mean_i)?;
    n_s.zip_map(&d, |s, di| s - k * di)
}

/// Transmittance estimate with its invalid-pixel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmittanceEstimate {
    pub tau: ScalarField2D,
    /// Pixels whose reference mean fell below the intensity floor (value set to 0).
    pub invalid: Vec<bool>,
}

/// τ̂ = (n_s − k δn_i) / ⟨N_s(x,0)⟩ at the configured binning.
///
/// `n_s_obj` and the registered `n_i` are native-resolution counts at dz = 0; the
/// calibration means in `config` must already be at the binned resolution.
pub fn estimate_transmittance(
    n_s_obj: &ScalarField2D,
    n_i: &ScalarField2D,
    config: &RetrievalConfig,
) -> Result<TransmittanceEstimate> {
    let reference = config
        .reference_mean
        .as_ref()
        .ok_or_else(|| QpiError::InvalidInput("missing reference mean".into()))?;
    let s = bin_counts(n_s_obj, config.bin_px)?;
    let i = bin_counts(n_i, config.bin_px)?;
    let corrected = if config.k == 0.0 {
        s
    } else {
        quantum_correct(&s, &i, config.idler_mean.as_ref(), config.k)?
    };
    corrected
        .grid()
        .ensure_same(&reference.grid(), "reference mean")?;
    let floor = config.intensity_floor * reference.mean();
    let mut invalid = vec![false; reference.values().len()];
    let v = corrected
        .values()
        .iter()
        .zip(reference.values())
        .zip(invalid.iter_mut())
        .map(|((&n, &r), bad)| {
            if r < floor || r <= 0.0 {
                *bad = true;
                0.0
            } else {
                n / r
            }
        })
        .collect();
    Ok(TransmittanceEstimate {
        tau: ScalarField2D::new(corrected.grid(), v)?,
        invalid,
    })
}

/// Noise-driven phase spectrum k σ̃(q) / (4π²√2 i₀ dz |q|²), zero at q = 0.
/// Output is in FFT order on the input grid; |q| in cycles per micrometer.
pub fn phase_noise_spectrum(
    sigma: &ScalarField2D,
    i0: f64,
    dz_mm: f64,
    k: f64,
) -> Result<ComplexField2D> {
    if !(i0 > 0.0 && dz_mm > 0.0) {
        return Err(QpiError::InvalidInput("i0 and dz must be positive".into()));
    }
    let g = sigma.grid();
    let fft = Fft2::new(g.width, g.height);
    let mut buf: Vec<Complex64> = sigma
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft.forward(&mut buf);
    let (qx, qy) = (fftfreq(g.width, g.pitch), fftfreq(g.height, g.pitch));
    let c = k / (4.0 * std::f64::consts::PI.powi(2) * std::f64::consts::SQRT_2 * i0 * dz_mm * 1e3);
    for r in 0..g.height {
        for col in 0..g.width {
            let q2 = qx[col] * qx[col] + qy[r] * qy[r];
            let z = &mut buf[r * g.width + col];
            *z = if q2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                *z * (c / q2)
            };
        }
    }
    ComplexField2D::new(g, buf)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Median over `interior` minus median over `background`.
pub fn step_height(phi: &ScalarField2D, interior: &[bool], background: &[bool]) -> Result<f64> {
    let pick = |m: &[bool]| {
        median(
            phi.values()
                .iter()
                .zip(m)
                .filter(|(_, &k)| k)
                .map(|(&v, _)| v)
                .collect(),
        )
    };
    match (pick(interior), pick(background)) {
        (Some(a), Some(b)) => Ok(a - b),
        _ => Err(QpiError::InvalidInput("empty readout region".into())),
    }
}
