//! Optical and source parameters and their validation.

use crate::error::{QpiError, Result};

/// 2*sqrt(2 ln 2): converts a Gaussian sigma to its FWHM.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

/// Imaging system. Lengths in micrometers unless stated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalSystem {
    pub wavelength_nm: f64,
    pub magnification: f64,
    pub camera_pixel_um: f64,
    /// Gaussian blur FWHM at the object plane (r_CFF).
    pub blur_fwhm_um: f64,
}

impl Default for OpticalSystem {
    fn default() -> Self {
        Self {
            wavelength_nm: 810.0,
            magnification: 8.0,
            camera_pixel_um: 13.0,
            blur_fwhm_um: 1.5,
        }
    }
}

impl OpticalSystem {
    pub fn wavelength_um(&self) -> f64 {
        self.wavelength_nm * 1e-3
    }

    /// Wavenumber in radians per micrometer.
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength_um()
    }

    /// Camera pixel projected onto the object plane.
    pub fn object_pixel_um(&self) -> f64 {
        self.camera_pixel_um / self.magnification
    }
}

/// Illumination profile of the pair source at the object plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamProfile {
    Uniform,
    /// Gaussian intensity envelope `exp(-2 r^2 / w^2)` with waist `w` in micrometers.
    Gaussian {
        waist_um: f64,
    },
}

/// Pair-source correlation and exposure parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwinBeamConfig {
    /// Correlation FWHM at the object plane, micrometers.
    pub l_cff_um: f64,
    /// Correlation sigma, micrometers; must equal `l_cff_um / FWHM_PER_SIGMA`.
    pub sigma_um: f64,
    pub eta0: f64,
    /// Misalignment in units of `l_cff_um`.
    pub epsilon: f64,
    /// Mean signal counts per pixel (object-free, in focus).
    pub mean_photons_per_pixel: f64,
    pub beam_profile: BeamProfile,
}

impl Default for TwinBeamConfig {
    fn default() -> Self {
        Self::with_l_cff(5.0)
    }
}

impl TwinBeamConfig {
    /// Default parameters with a given correlation length and a consistent sigma.
    pub fn with_l_cff(l_cff_um: f64) -> Self {
        Self {
            l_cff_um,
            sigma_um: fwhm_to_sigma(l_cff_um),
            eta0: 0.7,
            epsilon: 0.2,
            mean_photons_per_pixel: 600.0,
            beam_profile: BeamProfile::Uniform,
        }
    }

    /// Misalignment in micrometers.
    pub fn delta_um(&self) -> f64 {
        self.epsilon * self.l_cff_um
    }
}

/// Configuration that passed `validate_config`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckedConfig {
    pub optical: OpticalSystem,
    pub twin: TwinBeamConfig,
}

impl CheckedConfig {
    /// Resolution factor D for an integration window of `bin_px` camera pixels.
    pub fn d_factor(&self, bin_px: usize) -> f64 {
        d_factor(&self.optical, &self.twin, bin_px)
    }
}

/// D = L_det / (M l_CFF) with L_det = bin_px camera pixels.
pub fn d_factor(optical: &OpticalSystem, twin: &TwinBeamConfig, bin_px: usize) -> f64 {
    bin_px as f64 * optical.camera_pixel_um / (optical.magnification * twin.l_cff_um)
}

/// Checks every invariant and reports all violations at once.
pub fn validate_config(optical: &OpticalSystem, twin: &TwinBeamConfig) -> Result<CheckedConfig> {
    let mut errs = Vec::new();
    let mut positive = |name: &str, v: f64| {
        if !(v.is_finite() && v > 0.0) {
            errs.push(format!("non-positive length or factor: {name} = {v}"));
        }
    };
    positive("wavelength_nm", optical.wavelength_nm);
    positive("magnification", optical.magnification);
    positive("camera_pixel_um", optical.camera_pixel_um);
    positive("l_cff_um", twin.l_cff_um);
    positive("sigma_um", twin.sigma_um);
    positive("mean_photons_per_pixel", twin.mean_photons_per_pixel);
    if let BeamProfile::Gaussian { waist_um } = twin.beam_profile {
        positive("beam waist", waist_um);
    }
    if !(optical.blur_fwhm_um.is_finite() && optical.blur_fwhm_um >= 0.0) {
        errs.push(format!(
            "negative blur: blur_fwhm_um = {}",
            optical.blur_fwhm_um
        ));
    }
    if !(0.0..=1.0).contains(&twin.eta0) {
        errs.push(format!("efficiency out of range: eta0 = {}", twin.eta0));
    }
    if !(twin.epsilon.is_finite() && twin.epsilon >= 0.0) {
        errs.push(format!(
            "misalignment must be non-negative: epsilon = {}",
            twin.epsilon
        ));
    }
    if twin.l_cff_um > 0.0 && twin.sigma_um > 0.0 {
        let expected = fwhm_to_sigma(twin.l_cff_um);
        if ((twin.sigma_um - expected) / expected).abs() > 1e-9 {
            errs.push(format!(
                "FWHM relation violated: sigma = {} but l_cff / 2.3548 = {expected}",
                twin.sigma_um
            ));
        }
    }
    if errs.is_empty() {
        Ok(CheckedConfig {
            optical: *optical,
            twin: *twin,
        })
    } else {
        Err(QpiError::Config(errs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn messages(r: Result<CheckedConfig>) -> Vec<String> {
        match r {
            Err(QpiError::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_accepted() {
        let c = validate_config(&OpticalSystem::default(), &TwinBeamConfig::default()).unwrap();
        assert_eq!(c.optical.object_pixel_um(), 1.625);
        assert!((c.twin.sigma_um - 2.123_305).abs() < 1e-6);
        assert!((c.d_factor(12) - 3.9).abs() < 1e-12);
    }

    #[test]
    fn efficiency_bound() {
        let t = TwinBeamConfig {
            eta0: 1.3,
            ..Default::default()
        };
        let m = messages(validate_config(&OpticalSystem::default(), &t));
        assert!(m.iter().any(|s| s.contains("efficiency out of range")));
    }

    #[test]
    fn fwhm_relation() {
        let t = TwinBeamConfig {
            l_cff_um: 5.0,
            sigma_um: 5.0,
            ..Default::default()
        };
        let m = messages(validate_config(&OpticalSystem::default(), &t));
        assert!(m.iter().any(|s| s.contains("FWHM relation violated")));
    }

    #[test]
    fn reports_all_violations() {
        let o = OpticalSystem {
            magnification: 0.0,
            ..Default::default()
        };
        let t = TwinBeamConfig {
            eta0: -0.1,
            ..Default::default()
        };
        assert_eq!(messages(validate_config(&o, &t)).len(), 2);
    }
}
