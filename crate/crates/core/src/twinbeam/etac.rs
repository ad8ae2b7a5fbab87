//! Pair-collection efficiency of matched detection areas and the NRF model.

use crate::config::FWHM_PER_SIGMA;
use crate::error::{QpiError, Result};
use crate::fit::{least_squares, Model};
use crate::twinbeam::NrfPoint;

pub(crate) fn norm_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

pub(crate) fn norm_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Antiderivative of the Gaussian CDF: `G(a) = ∫_{-∞}^{a} Φ(s/σ) ds`.
fn cdf_integral(a: f64, sigma: f64) -> f64 {
    let t = a / sigma;
    sigma * (t * norm_cdf(t) + norm_pdf(t))
}

/// One-axis factor: probability that the partner of a photon uniformly spread over
/// a cell of side `l` lands in the matched cell, with offset `delta` and
/// correlation width `sigma` (all in the same units).
pub fn axis_collection(l: f64, delta: f64, sigma: f64) -> f64 {
    if l <= 0.0 {
        return 0.0;
    }
    if sigma == 0.0 {
        return (1.0 - delta.abs() / l).max(0.0);
    }
    let v = (cdf_integral(l + delta, sigma) - 2.0 * cdf_integral(delta, sigma)
        + cdf_integral(delta - l, sigma))
        / l;
    v.clamp(0.0, 1.0)
}

/// Conditional detection efficiency η_c(D, ε) for square areas of side D·l_CFF
/// offset by ε·l_CFF along both axes; the product of two identical axis factors.
pub fn eta_c(d_factor: f64, epsilon: f64) -> f64 {
    if !(d_factor > 0.0) {
        return 0.0;
    }
    let f = axis_collection(d_factor, epsilon, 1.0 / FWHM_PER_SIGMA);
    f * f
}

/// NRF ≈ 1 − η0 η_c(D, ε).
pub fn nrf_predicted(eta0: f64, d_factor: f64, epsilon: f64) -> f64 {
    1.0 - eta0 * eta_c(d_factor, epsilon)
}

/// Fitted source parameters with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyFit {
    pub eta0: f64,
    pub epsilon: f64,
    pub se_eta0: f64,
    pub se_epsilon: f64,
}

struct NrfModel<'a> {
    points: &'a [NrfPoint],
}

impl Model for NrfModel<'_> {
    fn n_params(&self) -> usize {
        2
    }
    fn n_residuals(&self) -> usize {
        self.points.len()
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (o, pt) in out.iter_mut().zip(self.points) {
            *o = nrf_predicted(p[0], pt.d_factor, p[1].abs()) - pt.nrf;
        }
    }
}

/// Least-squares fit of `NRF(D) = 1 − η0 η_c(D, ε)` to a measured curve.
pub fn fit_efficiencies(points: &[NrfPoint]) -> Result<EfficiencyFit> {
    if points.len() < 3 {
        return Err(QpiError::InvalidInput(
            "need at least three NRF points".into(),
        ));
    }
    let model = NrfModel { points };
    let f = least_squares(&model, &[0.5, 0.3])?;
    Ok(EfficiencyFit {
        eta0: f.params[0],
        epsilon: f.params[1].abs(),
        se_eta0: f.std_err(0),
        se_epsilon: f.std_err(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Riemann-sum oracle of the 4D overlap integral, in units of l_CFF.
    fn brute(d: f64, eps: f64, n: usize) -> f64 {
        let s = 1.0 / FWHM_PER_SIGMA;
        let h = d / n as f64;
        // One axis suffices: the 4D integral factorizes into identical axes.
        let mut acc = 0.0;
        for i in 0..n {
            let xs = (i as f64 + 0.5) * h;
            for j in 0..n {
                let xi = (j as f64 + 0.5) * h;
                let u = (xi - xs - eps) / s;
                acc += norm_pdf(u) / s * h * h;
            }
        }
        let f = acc / d;
        f * f
    }

    /// Full 4D sum on a coarse grid, checking the factorization itself.
    fn brute4(d: f64, eps: f64, n: usize) -> f64 {
        let s = 1.0 / FWHM_PER_SIGMA;
        let h = d / n as f64;
        let c: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let mut acc = 0.0;
        for &sx in &c {
            for &sy in &c {
                for &ix in &c {
                    for &iy in &c {
                        let r2 = (ix - sx - eps).powi(2) + (iy - sy - eps).powi(2);
                        acc += (-r2 / (2.0 * s * s)).exp() / (2.0 * std::f64::consts::PI * s * s);
                    }
                }
            }
        }
        acc * h.powi(4) / (d * d)
    }

    #[test]
    fn zero_area() {
        assert_eq!(eta_c(0.0, 0.2), 0.0);
        assert_eq!(eta_c(0.0, 0.0), 0.0);
    }

    #[test]
    fn matches_riemann_oracle() {
        for &(d, e) in &[(1.0, 0.0), (1.0, 0.2), (0.32, 0.2), (3.8, 0.2), (8.0, 0.5)] {
            let b = brute(d, e, 3000);
            assert!(
                (eta_c(d, e) - b).abs() < 1e-6,
                "D={d} eps={e}: {} vs {b}",
                eta_c(d, e)
            );
        }
        let b4 = brute4(1.0, 0.0, 40);
        // Coarse 4D midpoint sum; its error is O(h²).
        assert!(
            (eta_c(1.0, 0.0) - b4).abs() < 5e-4,
            "{} vs {b4}",
            eta_c(1.0, 0.0)
        );
    }

    #[test]
    fn large_area_limit() {
        // Edge losses scale as sigma / L.
        assert!((eta_c(100.0, 0.0) - brute(100.0, 0.0, 4000)).abs() < 1e-5);
        assert!((eta_c(1e4, 0.0) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn nrf_values() {
        assert!((nrf_predicted(0.7, 3.8, 0.2) - 0.45).abs() < 0.03);
        assert_eq!(nrf_predicted(0.0, 2.0, 0.3), 1.0);
        assert!((nrf_predicted(0.7, 100.0, 0.0) - 0.30).abs() < 0.01);
    }

    #[test]
    fn fit_recovers_parameters() {
        let pts: Vec<NrfPoint> = [0.325, 0.975, 1.95, 3.9, 8.125]
            .iter()
            .map(|&d| NrfPoint {
                d_factor: d,
                nrf: nrf_predicted(0.7, d, 0.2),
                fano: 1.0,
                n_frames: 1,
                stderr: 0.0,
            })
            .collect();
        let f = fit_efficiencies(&pts).unwrap();
        assert!((f.eta0 - 0.7).abs() < 1e-6);
        assert!((f.epsilon - 0.2).abs() < 1e-5);
    }
}
