//! Twin-beam photon-count generation and correlation metrology.

mod alias;
mod etac;
mod metrology;
mod sampler;

pub(crate) use alias::AliasTable;
pub(crate) use etac::norm_cdf;
pub use etac::{axis_collection, eta_c, fit_efficiencies, nrf_predicted, EfficiencyFit};
pub use metrology::{bin_counts, fano_factor, idler_fano, measure_nrf, register_idler};
pub use sampler::{offset_table, sample_twin_frame, OffsetTable, TwinBeamSampler};

use crate::field::ScalarField2D;

/// One acquisition: signal and raw (point-reflected) idler counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinBeamFrame {
    pub n_s: ScalarField2D,
    /// Idler counts as recorded; use [`register_idler`] to align with `n_s`.
    pub n_i: ScalarField2D,
    pub dz_mm: f64,
    pub stream_index: u64,
    pub spill: SpillStats,
}

/// Photons born inside the object window that left the simulation domain.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpillStats {
    pub dropped: u64,
    pub born_in_window: u64,
}

impl SpillStats {
    pub fn fraction(&self) -> f64 {
        if self.born_in_window == 0 {
            0.0
        } else {
            self.dropped as f64 / self.born_in_window as f64
        }
    }
}

/// Measured noise reduction factor at one resolution factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrfPoint {
    pub d_factor: f64,
    pub nrf: f64,
    /// Fano factor of the signal arm.
    pub fano: f64,
    pub n_frames: usize,
    /// Standard error of `nrf`.
    pub stderr: f64,
}
