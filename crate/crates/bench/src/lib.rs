//! Shared inputs for the kernel benchmarks.

use qpi_core::config::{validate_config, OpticalSystem, TwinBeamConfig};
use qpi_core::optics::default_illumination;
use qpi_core::{defocus_stack, CheckedConfig, Grid, IntensityStack, ObjectSpec};

/// Default configuration with a square `side`-pixel object grid.
pub struct Fixture {
    pub cfg: CheckedConfig,
    pub grid: Grid,
    pub object: ObjectSpec,
}

impl Fixture {
    pub fn new(side: usize) -> Self {
        let cfg = validate_config(&OpticalSystem::default(), &TwinBeamConfig::default())
            .expect("default configuration is valid");
        let grid = Grid::square(side, cfg.optical.object_pixel_um()).expect("grid");
        let object = ObjectSpec::gaussian_phase_bump(grid, 0.3, 25.0).expect("object");
        Self { cfg, grid, object }
    }

    /// Noise-free intensity stack of the phase bump at `dz_mm`.
    pub fn stack(&self, dz_mm: f64) -> IntensityStack {
        let ill = default_illumination(self.grid).expect("illumination");
        defocus_stack(
            &self.object,
            &ill,
            dz_mm,
            &self.cfg.optical,
            self.cfg.twin.mean_photons_per_pixel,
        )
        .expect("stack")
    }
}
