//! Quantum-enhanced phase imaging with correlated photon pairs.
//!
//! Twin-beam photon counts through a thin object are simulated exactly in law,
//! and phase is recovered with the transport-of-intensity equation, with or
//! without idler subtraction.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod field;
pub mod fit;
pub mod metrics;
pub mod object;
pub mod optics;
pub mod qpf;
pub mod report;
pub mod retrieval;
pub mod rng;
pub mod spectral;
pub mod target;
pub mod twinbeam;

pub use config::{validate_config, BeamProfile, CheckedConfig, OpticalSystem, TwinBeamConfig};
pub use error::{QpiError, Result};
pub use field::{ComplexField2D, Grid, ScalarField2D};
pub use object::ObjectSpec;
pub use optics::{defocus_stack, IntensityStack};
pub use retrieval::{tie_retrieve, KMode, PhaseImage, RetrievalConfig};
pub use rng::RngStream;
pub use twinbeam::{NrfPoint, TwinBeamFrame, TwinBeamSampler};
