//! Run settings: built-in defaults, overridden by a `key = value` file, overridden by flags.

use std::collections::BTreeMap;
use std::path::Path;

use qpi_core::config::{
    fwhm_to_sigma, validate_config, BeamProfile, CheckedConfig, OpticalSystem, TwinBeamConfig,
};
use qpi_core::{KMode, QpiError};

pub const DEFAULT_DZ_MM: [f64; 4] = [0.0125, 0.025, 0.05, 0.1];
pub const DEFAULT_NOISE_L_UM: [f64; 13] = [
    1.0, 2.5, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 50.0, 60.0, 80.0,
];

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub optical: OpticalSystem,
    pub twin: TwinBeamConfig,
    pub grid: usize,
    pub phase_pi: f64,
    pub phase_null: f64,
    pub tau_null: f64,
    pub seed: u64,
    pub frames: usize,
    pub dz_mm: Vec<f64>,
    /// `None` lets each command use its own default bins.
    pub bins: Option<Vec<usize>>,
    /// `None` lets commands that compare weights use both optimal ones.
    pub k_mode: Option<KMode>,
    pub ref_frames: u64,
    pub noise_l_um: Vec<f64>,
    pub noise_trials: usize,
    pub noise_i0: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            optical: OpticalSystem::default(),
            twin: TwinBeamConfig::default(),
            grid: 220,
            phase_pi: -0.226,
            phase_null: 0.345,
            tau_null: 0.94,
            seed: 1,
            frames: 100,
            dz_mm: DEFAULT_DZ_MM.to_vec(),
            bins: None,
            k_mode: None,
            ref_frames: 1_000_000,
            noise_l_um: DEFAULT_NOISE_L_UM.to_vec(),
            noise_trials: 8,
            noise_i0: 100.0,
        }
    }
}

/// Keys accepted in a settings file, in the order they are echoed into manifests.
pub const KEYS: [&str; 24] = [
    "wavelength_nm",
    "magnification",
    "camera_pixel_um",
    "blur_fwhm_um",
    "l_cff_um",
    "sigma_um",
    "eta0",
    "epsilon",
    "mean_photons",
    "beam_waist_um",
    "grid",
    "phase_pi",
    "phase_null",
    "tau_null",
    "seed",
    "frames",
    "dz_mm",
    "bins",
    "k_mode",
    "ref_frames",
    "noise_l_cff_um",
    "noise_trials",
    "noise_i0",
    "threads",
];

/// Parses `key = value` lines; `#` starts a comment. Duplicate and unknown keys are errors.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, QpiError> {
    let mut out = BTreeMap::new();
    let mut errs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errs.push(format!("line {}: expected key = value", n + 1));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            errs.push(format!("line {}: unknown key '{k}'", n + 1));
        } else if out.insert(k.to_string(), v.to_string()).is_some() {
            errs.push(format!("line {}: duplicate key '{k}'", n + 1));
        }
    }
    if errs.is_empty() {
        Ok(out)
    } else {
        Err(QpiError::Config(errs))
    }
}

fn list<T: std::str::FromStr>(v: &str) -> Option<Vec<T>> {
    let items: Option<Vec<T>> = v.split(',').map(|s| s.trim().parse().ok()).collect();
    items.filter(|l| !l.is_empty())
}

impl Settings {
    /// Applies parsed pairs, collecting every malformed value.
    pub fn apply(&mut self, pairs: &BTreeMap<String, String>) -> Result<(), QpiError> {
        let mut errs = Vec::new();
        let mut sigma_given = false;
        macro_rules! num {
            ($v:expr, $k:expr) => {
                match $v.parse() {
                    Ok(x) => Some(x),
                    Err(_) => {
                        errs.push(format!("{}: cannot parse '{}'", $k, $v));
                        None
                    }
                }
            };
        }
        for (k, v) in pairs {
            let v = v.as_str();
            match k.as_str() {
                "wavelength_nm" => {
                    self.optical.wavelength_nm = num!(v, k).unwrap_or(self.optical.wavelength_nm)
                }
                "magnification" => {
                    self.optical.magnification = num!(v, k).unwrap_or(self.optical.magnification)
                }
                "camera_pixel_um" => {
                    self.optical.camera_pixel_um =
                        num!(v, k).unwrap_or(self.optical.camera_pixel_um)
                }
                "blur_fwhm_um" => {
                    self.optical.blur_fwhm_um = num!(v, k).unwrap_or(self.optical.blur_fwhm_um)
                }
                "l_cff_um" => self.twin.l_cff_um = num!(v, k).unwrap_or(self.twin.l_cff_um),
                "sigma_um" => {
                    if let Some(s) = num!(v, k) {
                        self.twin.sigma_um = s;
                        sigma_given = true;
                    }
                }
                "eta0" => self.twin.eta0 = num!(v, k).unwrap_or(self.twin.eta0),
                "epsilon" => self.twin.epsilon = num!(v, k).unwrap_or(self.twin.epsilon),
                "mean_photons" => {
                    self.twin.mean_photons_per_pixel =
                        num!(v, k).unwrap_or(self.twin.mean_photons_per_pixel)
                }
                "beam_waist_um" => {
                    if v == "uniform" {
                        self.twin.beam_profile = BeamProfile::Uniform;
                    } else if let Some(w) = num!(v, k) {
                        self.twin.beam_profile = BeamProfile::Gaussian { waist_um: w };
                    }
                }
                "grid" => self.grid = num!(v, k).unwrap_or(self.grid),
                "phase_pi" => self.phase_pi = num!(v, k).unwrap_or(self.phase_pi),
                "phase_null" => self.phase_null = num!(v, k).unwrap_or(self.phase_null),
                "tau_null" => self.tau_null = num!(v, k).unwrap_or(self.tau_null),
                "seed" => self.seed = num!(v, k).unwrap_or(self.seed),
                "frames" => self.frames = num!(v, k).unwrap_or(self.frames),
                "ref_frames" => self.ref_frames = num!(v, k).unwrap_or(self.ref_frames),
                "noise_trials" => self.noise_trials = num!(v, k).unwrap_or(self.noise_trials),
                "noise_i0" => self.noise_i0 = num!(v, k).unwrap_or(self.noise_i0),
                "threads" => {
                    let _: Option<usize> = num!(v, k);
                }
                "dz_mm" => match list(v) {
                    Some(l) => self.dz_mm = l,
                    None => errs.push(format!("dz_mm: cannot parse '{v}'")),
                },
                "noise_l_cff_um" => match list(v) {
                    Some(l) => self.noise_l_um = l,
                    None => errs.push(format!("noise_l_cff_um: cannot parse '{v}'")),
                },
                "bins" => match list(v) {
                    Some(l) => self.bins = Some(l),
                    None => errs.push(format!("bins: cannot parse '{v}'")),
                },
                "k_mode" => match v.parse::<KMode>() {
                    Ok(m) => self.k_mode = Some(m),
                    Err(e) => errs.push(e.to_string()),
                },
                _ => errs.push(format!("unknown key '{k}'")),
            }
        }
        if pairs.contains_key("l_cff_um") && !sigma_given {
            self.twin.sigma_um = fwhm_to_sigma(self.twin.l_cff_um);
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(QpiError::Config(errs))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, QpiError> {
        let text = std::fs::read_to_string(path)?;
        let mut s = Self::default();
        s.apply(&parse_pairs(&text)?)?;
        Ok(s)
    }

    /// Physical configuration plus run-level range checks.
    pub fn check(&self) -> Result<CheckedConfig, QpiError> {
        let mut errs = Vec::new();
        let cfg = match validate_config(&self.optical, &self.twin) {
            Ok(c) => Some(c),
            Err(QpiError::Config(e)) => {
                errs.extend(e);
                None
            }
            Err(e) => return Err(e),
        };
        if self.frames == 0 {
            errs.push("frames must be at least 1".into());
        }
        if self.dz_mm.iter().any(|d| d.is_nan() || *d <= 0.0) {
            errs.push("dz_mm values must be positive".into());
        }
        if self.bins.as_ref().is_some_and(|b| b.contains(&0)) {
            errs.push("bins must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.tau_null) {
            errs.push("tau_null must lie in [0, 1]".into());
        }
        if self.noise_trials == 0 || self.noise_i0.is_nan() || self.noise_i0 <= 0.0 {
            errs.push("noise scan needs trials >= 1 and i0 > 0".into());
        }
        if self.noise_l_um.iter().any(|l| l.is_nan() || *l <= 0.0) {
            errs.push("noise_l_cff_um values must be positive".into());
        }
        match (cfg, errs.is_empty()) {
            (Some(c), true) => Ok(c),
            _ => Err(QpiError::Config(errs)),
        }
    }

    /// Canonical `key = value` echo of every setting, for manifests.
    pub fn echo(&self) -> String {
        let f = |v: f64| qpi_core::report::fmt_num(v);
        let fl = |l: &[f64]| l.iter().map(|v| f(*v)).collect::<Vec<_>>().join(",");
        let waist = match self.twin.beam_profile {
            BeamProfile::Uniform => "uniform".to_string(),
            BeamProfile::Gaussian { waist_um } => f(waist_um),
        };
        let bins = self
            .bins
            .as_ref()
            .map(|b| {
                b.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .unwrap_or_else(|| "default".into());
        let lines = [
            ("wavelength_nm", f(self.optical.wavelength_nm)),
            ("magnification", f(self.optical.magnification)),
            ("camera_pixel_um", f(self.optical.camera_pixel_um)),
            ("blur_fwhm_um", f(self.optical.blur_fwhm_um)),
            ("l_cff_um", f(self.twin.l_cff_um)),
            ("sigma_um", f(self.twin.sigma_um)),
            ("eta0", f(self.twin.eta0)),
            ("epsilon", f(self.twin.epsilon)),
            ("mean_photons", f(self.twin.mean_photons_per_pixel)),
            ("beam_waist_um", waist),
            ("grid", self.grid.to_string()),
            ("phase_pi", f(self.phase_pi)),
            ("phase_null", f(self.phase_null)),
            ("tau_null", f(self.tau_null)),
            ("seed", self.seed.to_string()),
            ("frames", self.frames.to_string()),
            ("dz_mm", fl(&self.dz_mm)),
            ("bins", bins),
            (
                "k_mode",
                self.k_mode
                    .map(|k| k.label())
                    .unwrap_or_else(|| "default".into()),
            ),
            ("ref_frames", self.ref_frames.to_string()),
            ("noise_l_cff_um", fl(&self.noise_l_um)),
            ("noise_trials", self.noise_trials.to_string()),
            ("noise_i0", f(self.noise_i0)),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let p =
            parse_pairs("# header\nseed = 7  # trailing\ndz_mm = 0.0125, 0.05\n\nk_mode = tie\n")
                .unwrap();
        let mut s = Settings::default();
        s.apply(&p).unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.dz_mm, vec![0.0125, 0.05]);
        assert_eq!(s.k_mode, Some(KMode::TieOpt));
    }

    #[test]
    fn collects_all_errors() {
        let e = parse_pairs("bogus = 1\nnot a pair\nseed = 1\nseed = 2\n").unwrap_err();
        match e {
            QpiError::Config(v) => assert_eq!(v.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn l_cff_updates_sigma() {
        let mut s = Settings::default();
        s.apply(&parse_pairs("l_cff_um = 10").unwrap()).unwrap();
        assert!((s.twin.sigma_um - 10.0 / 2.354_820_045_030_949_3).abs() < 1e-12);
        assert!(s.check().is_ok());
    }

    #[test]
    fn check_rejects_bad_physics() {
        let mut s = Settings::default();
        s.apply(&parse_pairs("eta0 = 1.5\nmagnification = -2").unwrap())
            .unwrap();
        match s.check().unwrap_err() {
            QpiError::Config(v) => assert!(v.len() >= 2),
            other => panic!("{other:?}"),
        }
    }
}
