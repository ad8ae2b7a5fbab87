use crate::error::{QpiError, Result};
use crate::field::{Grid, ScalarField2D};

/// A sample: transmittance map (in [0, 1]) and phase map (radians) on a shared grid.
///
/// Positive phase advances the optical path.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    tau: ScalarField2D,
    phi: ScalarField2D,
}

impl ObjectSpec {
    pub fn new(tau: ScalarField2D, phi: ScalarField2D) -> Result<Self> {
        tau.grid().ensure_same(&phi.grid(), "tau/phi")?;
        if let Some(v) = tau.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(QpiError::InvalidInput(format!(
                "transmittance {v} outside [0, 1]"
            )));
        }
        Ok(Self { tau, phi })
    }

    /// Transparent, phase-free object.
    pub fn uniform(grid: Grid) -> Result<Self> {
        Self::new(
            ScalarField2D::filled(grid, 1.0)?,
            ScalarField2D::zeros(grid)?,
        )
    }

    /// Pure-phase Gaussian bump `peak * exp(-r^2 / (2 sigma^2))` centred on the grid.
    pub fn gaussian_phase_bump(grid: Grid, peak: f64, sigma_um: f64) -> Result<Self> {
        let (cy, cx) = (grid.height as f64 / 2.0, grid.width as f64 / 2.0);
        let phi = ScalarField2D::from_fn(grid, |r, c| {
            let y = (r as f64 + 0.5 - cy) * grid.pitch;
            let x = (c as f64 + 0.5 - cx) * grid.pitch;
            peak * (-(x * x + y * y) / (2.0 * sigma_um * sigma_um)).exp()
        })?;
        Self::new(ScalarField2D::filled(grid, 1.0)?, phi)
    }

    pub fn tau(&self) -> &ScalarField2D {
        &self.tau
    }
    pub fn phi(&self) -> &ScalarField2D {
        &self.phi
    }
    pub fn grid(&self) -> Grid {
        self.tau.grid()
    }
}
