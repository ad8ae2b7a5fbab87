//! Image similarity, quantum advantage, edge-spread resolution and noise scans.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::config::{fwhm_to_sigma, CheckedConfig, FWHM_PER_SIGMA};
use crate::error::{QpiError, Result};
use crate::field::{Grid, ScalarField2D};
use crate::fit::{least_squares, Model};
use crate::object::ObjectSpec;
use crate::optics::{default_illumination, defocus_stack, IntensityStack};
use crate::retrieval::{quantum_correct, tie_retrieve, KMode, PhaseImage, RetrievalConfig};
use crate::rng::RngStream;
use crate::target::TargetLayout;
use crate::twinbeam::{offset_table, register_idler, AliasTable, TwinBeamFrame};

/// Sample Pearson correlation over all pixels.
pub fn pearson(a: &ScalarField2D, b: &ScalarField2D) -> Result<f64> {
    a.grid().ensure_same(&b.grid(), "pearson")?;
    pearson_slices(a.values(), b.values())
}

pub fn pearson_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(QpiError::Numerical(
            "pearson of a constant image is undefined".into(),
        ));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Exposures of one defocus stack (each plane has its own idler).
#[derive(Debug, Clone)]
pub struct StackFrames {
    pub minus: TwinBeamFrame,
    pub zero: TwinBeamFrame,
    pub plus: TwinBeamFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageResult {
    pub c_quant: f64,
    pub c_clas: f64,
    pub ratio: f64,
    /// Standard error of `ratio` (paired delta method).
    pub stderr: f64,
    pub dz_mm: f64,
    pub d_factor: f64,
    pub k: f64,
    pub n_frames: usize,
}

/// Single-frame phase with idler correction weight `k` (0 = classical).
pub fn retrieve_stack(
    s: &StackFrames,
    idler_mean: &ScalarField2D,
    config: &RetrievalConfig,
    k: f64,
) -> Result<PhaseImage> {
    let corr =
        |f: &TwinBeamFrame| quantum_correct(&f.n_s, &register_idler(&f.n_i), Some(idler_mean), k);
    let rc = RetrievalConfig {
        k,
        ..config.clone()
    };
    tie_retrieve(&corr(&s.zero)?, &corr(&s.plus)?, &corr(&s.minus)?, &rc)
}

/// Ratio of frame-averaged Pearson coefficients (quantum over classical) against a
/// shot-noise-free reference. `config.k` is the quantum weight.
pub fn quantum_advantage(
    frames: &[StackFrames],
    idler_mean: &ScalarField2D,
    config: &RetrievalConfig,
    phi_ref: &PhaseImage,
    d_factor: f64,
) -> Result<AdvantageResult> {
    if frames.is_empty() {
        return Err(QpiError::InvalidInput("no frames".into()));
    }
    let pairs: Vec<(f64, f64)> = frames
        .par_iter()
        .map(|s| -> Result<(f64, f64)> {
            let q = retrieve_stack(s, idler_mean, config, config.k)?;
            let c = retrieve_stack(s, idler_mean, config, 0.0)?;
            Ok((
                pearson(&q.values, &phi_ref.values)?,
                pearson(&c.values, &phi_ref.values)?,
            ))
        })
        .collect::<Result<_>>()?;
    let n = pairs.len() as f64;
    let mq = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mc = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let stderr = if pairs.len() > 1 {
        let vq = pairs.iter().map(|p| (p.0 - mq).powi(2)).sum::<f64>() / (n - 1.0);
        let vc = pairs.iter().map(|p| (p.1 - mc).powi(2)).sum::<f64>() / (n - 1.0);
        let cv = pairs.iter().map(|p| (p.0 - mq) * (p.1 - mc)).sum::<f64>() / (n - 1.0);
        let var = (vq / (mc * mc) + mq * mq * vc / mc.powi(4) - 2.0 * mq * cv / mc.powi(3)) / n;
        var.max(0.0).sqrt()
    } else {
        f64::NAN
    };
    Ok(AdvantageResult {
        c_quant: mq,
        c_clas: mc,
        ratio: mq / mc,
        stderr,
        dz_mm: config.dz_mm,
        d_factor,
        k: config.k,
        n_frames: frames.len(),
    })
}

/// Pearson between two independent half-references; 0.999 is the convergence bar.
pub fn reference_agreement(a: &PhaseImage, b: &PhaseImage) -> Result<(f64, bool)> {
    let c = pearson(&a.values, &b.values)?;
    Ok((c, c >= 0.999))
}

/// Edge-spread fit `ESF(x) = (a/2) erf((x − x0)/(√2 w)) + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsfFit {
    pub a: f64,
    pub b: f64,
    /// Edge centre, micrometers from the start of the profile.
    pub x0: f64,
    /// Width parameter, micrometers.
    pub w: f64,
    /// 95% interval on `w`.
    pub w_ci: [f64; 2],
    pub r_phase: f64,
    pub se_r: f64,
    /// Set when the fitted edge is outside the profile or the data are not monotone around it.
    pub flagged: bool,
}

struct Esf<'a> {
    x: &'a [f64],
    y: &'a [f64],
}

impl Model for Esf<'_> {
    fn n_params(&self) -> usize {
        4
    }
    fn n_residuals(&self) -> usize {
        self.x.len()
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for ((o, &x), &y) in out.iter_mut().zip(self.x).zip(self.y) {
            let t = (x - p[2]) / (std::f64::consts::SQRT_2 * p[3]);
            *o = 0.5 * p[0] * libm::erf(t) + p[1] - y;
        }
    }
    fn jacobian(&self, p: &[f64], out: &mut [f64]) {
        let s2 = std::f64::consts::SQRT_2;
        let gauss = 2.0 / std::f64::consts::PI.sqrt();
        for (row, &x) in out.chunks_exact_mut(4).zip(self.x) {
            let t = (x - p[2]) / (s2 * p[3]);
            let e = gauss * (-t * t).exp();
            row[0] = 0.5 * libm::erf(t);
            row[1] = 1.0;
            row[2] = -0.5 * p[0] * e / (s2 * p[3]);
            row[3] = -0.5 * p[0] * e * t / p[3];
        }
    }
}

/// Least-squares ESF fit of a profile sampled at `x_i = (i + 1/2)·pitch`.
pub fn esf_fit(profile: &[f64], pitch: f64) -> Result<EsfFit> {
    let n = profile.len();
    if n < 16 {
        return Err(QpiError::InvalidInput(format!(
            "profile has {n} samples, need 16"
        )));
    }
    let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * pitch).collect();
    let k = (n / 8).max(2);
    let lo = profile[..k].iter().sum::<f64>() / k as f64;
    let hi = profile[n - k..].iter().sum::<f64>() / k as f64;
    // Start at the steepest smoothed slope.
    let i0 = (1..n - 1)
        .max_by(|&i, &j| {
            let s = |m: usize| (profile[m + 1] - profile[m - 1]).abs();
            s(i).total_cmp(&s(j))
        })
        .unwrap_or(n / 2);
    let start = [hi - lo, 0.5 * (hi + lo), x[i0], 2.0 * pitch];
    let f = least_squares(&Esf { x: &x, y: profile }, &start)?;
    let w = f.params[3].abs();
    let half = 1.96 * f.std_err(3);
    let w_ci = [w - half, w + half];
    let x0 = f.params[2];
    let flagged = !(x0 > x[0] && x0 < x[n - 1]) || !monotone_about(profile, f.params[0]);
    Ok(EsfFit {
        a: f.params[0],
        b: f.params[1],
        x0,
        w,
        w_ci,
        r_phase: FWHM_PER_SIGMA * w,
        se_r: (2.0 * std::f64::consts::LN_2).sqrt() * (w_ci[1] - w_ci[0]) / 1.96,
        flagged,
    })
}

/// Coarse monotonicity: quarter means must step in the direction of the edge.
fn monotone_about(p: &[f64], a: f64) -> bool {
    let q = p.len() / 4;
    let m = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (m0, m3) = (m(&p[..q]), m(&p[p.len() - q..]));
    (m3 - m0) * a > 0.0
}

/// Mean of `rows` of a phase image over columns `cols` (half-open ranges).
pub fn edge_profile(phi: &ScalarField2D, rows: (usize, usize), cols: (usize, usize)) -> Vec<f64> {
    let nr = (rows.1 - rows.0) as f64;
    (cols.0..cols.1)
        .map(|c| (rows.0..rows.1).map(|r| phi.get(r, c)).sum::<f64>() / nr)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionPoint {
    pub dz_mm: f64,
    pub bin_px: usize,
    pub d_factor: f64,
    pub fit: std::result::Result<EsfFit, String>,
}

/// Resolution scan output with monotonicity diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionScan {
    pub points: Vec<ResolutionPoint>,
    /// r_phase non-decreasing in D at every dz, within 2 standard errors.
    pub monotone_in_d: bool,
    /// r_phase non-increasing as dz shrinks at every D, within 2 standard errors.
    pub monotone_in_dz: bool,
}

impl ResolutionScan {
    pub fn r_phase(&self, dz_mm: f64, bin_px: usize) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.dz_mm == dz_mm && p.bin_px == bin_px)
            .and_then(|p| p.fit.as_ref().ok().map(|f| f.r_phase))
    }
}

/// Pooled exposure of `n_frames` frames of a deterministic intensity: Poisson(N·I).
pub fn pooled_exposure(i: &ScalarField2D, n_frames: u64, stream: RngStream) -> ScalarField2D {
    let mut rng = stream.rng();
    let v = i
        .values()
        .iter()
        .map(|&m| {
            let mu = m * n_frames as f64;
            if mu > 0.0 {
                Poisson::new(mu).map(|d| d.sample(&mut rng)).unwrap_or(0.0)
            } else {
                0.0
            }
        })
        .collect();
    ScalarField2D::from_parts(i.grid(), v)
}

/// Phase image from an `n_frames` pooled exposure of a wave-optics stack.
pub fn pooled_stack_phase(
    stack: &IntensityStack,
    n_frames: u64,
    config: &RetrievalConfig,
    seed: u64,
    lane: u16,
) -> Result<PhaseImage> {
    let draw = |plane: u64, f: &ScalarField2D| {
        if n_frames == 0 {
            f.clone()
        } else {
            pooled_exposure(f, n_frames, RngStream::lane(seed, lane, plane))
        }
    };
    let (m, z, p) = (
        draw(0, &stack.i_minus),
        draw(1, &stack.i_zero),
        draw(2, &stack.i_plus),
    );
    let mut out = tie_retrieve(&z, &p, &m, config)?;
    out.aliasing = stack.aliasing;
    Ok(out)
}

/// r_phase over a (dz, D) grid using the wave-optics forward model of the π/∅ target.
/// `n_frames = 0` uses noiseless intensities.
pub fn resolution_scan(
    target: &ObjectSpec,
    dz_list: &[f64],
    bins: &[usize],
    cfg: &CheckedConfig,
    n_frames: u64,
    seed: u64,
) -> Result<ResolutionScan> {
    let layout = TargetLayout::new(target.grid())?;
    let edge = layout.resolution_edge();
    let illum = default_illumination(target.grid())?;
    let mut points = Vec::new();
    for (iz, &dz) in dz_list.iter().enumerate() {
        let stack = defocus_stack(
            target,
            &illum,
            dz,
            &cfg.optical,
            cfg.twin.mean_photons_per_pixel,
        )?;
        let per_bin: Vec<ResolutionPoint> = bins
            .par_iter()
            .enumerate()
            .map(|(ib, &b)| -> Result<ResolutionPoint> {
                let rc = RetrievalConfig::new(cfg, dz, KMode::Classical, b)?;
                let lane = 0x100 + (iz * bins.len() + ib) as u16;
                let phi = pooled_stack_phase(&stack, n_frames, &rc, seed, lane)?;
                let prof = edge_profile(&phi.values, edge.rows, edge.cols);
                Ok(ResolutionPoint {
                    dz_mm: dz,
                    bin_px: b,
                    d_factor: cfg.d_factor(b),
                    fit: esf_fit(&prof, target.grid().pitch).map_err(|e| e.to_string()),
                })
            })
            .collect::<Result<_>>()?;
        points.extend(per_bin);
    }
    let r = |dz: f64, b: usize| {
        points
            .iter()
            .find(|p| p.dz_mm == dz && p.bin_px == b)
            .and_then(|p| p.fit.as_ref().ok().map(|f| (f.r_phase, f.se_r)))
    };
    // Orderings are judged within two combined standard errors of the fits.
    let ordered = |lo: Option<(f64, f64)>, hi: Option<(f64, f64)>| match (lo, hi) {
        (Some((a, sa)), Some((b, sb))) => a <= b + 2.0 * (sa * sa + sb * sb).sqrt(),
        _ => false,
    };
    let mut bs = bins.to_vec();
    bs.sort_unstable();
    let mut dzs = dz_list.to_vec();
    dzs.sort_by(f64::total_cmp);
    let monotone_in_d = dzs
        .iter()
        .all(|&dz| bs.windows(2).all(|w| ordered(r(dz, w[0]), r(dz, w[1]))));
    let monotone_in_dz = bs
        .iter()
        .all(|&b| dzs.windows(2).all(|w| ordered(r(w[0], b), r(w[1], b))));
    Ok(ResolutionScan {
        points,
        monotone_in_d,
        monotone_in_dz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePoint {
    pub l_cff_um: f64,
    /// 100·(1 − Var[φ_corrected]/Var[φ_classical]), pooled over trials.
    pub suppression_pct: f64,
    pub stderr: f64,
}

/// Phase noise driven by an intensity-difference field `s` over a uniform `i0`.
fn tie_noise(s: &[f64], grid: Grid, i0: f64, dz_mm: f64, k: f64) -> Result<ScalarField2D> {
    let flat = ScalarField2D::filled(grid, i0)?;
    let plus = ScalarField2D::new(grid, s.iter().map(|v| i0 + v).collect())?;
    let rc = RetrievalConfig {
        dz_mm,
        k_mode: KMode::Classical,
        k: 0.0,
        bin_px: 1,
        wavenumber: k,
        intensity_floor: 1e-3,
        reference_mean: None,
        idler_mean: None,
    };
    Ok(tie_retrieve(&flat, &plus, &flat, &rc)?.values)
}

/// Shot-noise removal versus correlation length with lossless detection (k = η0 = 1).
///
/// For each trial a Poisson count map is drawn on a domain padded by 4σ + 2 pixels;
/// every photon is then displaced by an independent Gaussian of FWHM `l_cff` to
/// form the partner map σ'. Both maps are cropped to the grid, and the TIE phase
/// noise of σ and of σ − σ' is compared.
pub fn noise_suppression_scan(
    l_cff_list: &[f64],
    grid: Grid,
    dz_mm: f64,
    i0: f64,
    wavenumber: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<NoisePoint>> {
    if trials == 0 {
        return Err(QpiError::InvalidInput("need at least one trial".into()));
    }
    let k_corr = 1.0;
    l_cff_list
        .iter()
        .enumerate()
        .map(|(il, &l)| {
            let sigma = fwhm_to_sigma(l) / grid.pitch;
            let table = offset_table(0.0, sigma);
            let alias = AliasTable::new(&table.probs)?;
            let pad = (4.0 * sigma).ceil() as usize + 2;
            let per_trial: Vec<(f64, f64)> = (0..trials)
                .into_par_iter()
                .map(|t| -> Result<(f64, f64)> {
                    let mut rng = RngStream::lane(seed, 0x200 + il as u16, t as u64).rng();
                    let (dw, dh) = (grid.width + 2 * pad, grid.height + 2 * pad);
                    let pois =
                        Poisson::new(i0).map_err(|e| QpiError::InvalidInput(format!("i0: {e}")))?;
                    let mut s = vec![0.0; grid.len()];
                    let mut sp = vec![0.0; grid.len()];
                    for r in 0..dh {
                        for c in 0..dw {
                            let n = pois.sample(&mut rng) as u64;
                            let inside = r >= pad
                                && r < pad + grid.height
                                && c >= pad
                                && c < pad + grid.width;
                            if inside {
                                s[(r - pad) * grid.width + (c - pad)] += n as f64;
                            }
                            for _ in 0..n {
                                let ox = table.first as isize + alias.sample(&mut rng) as isize;
                                let oy = table.first as isize + alias.sample(&mut rng) as isize;
                                let (rr, cc) = (
                                    r as isize + oy - pad as isize,
                                    c as isize + ox - pad as isize,
                                );
                                if rr >= 0
                                    && rr < grid.height as isize
                                    && cc >= 0
                                    && cc < grid.width as isize
                                {
                                    sp[rr as usize * grid.width + cc as usize] += 1.0;
                                }
                            }
                        }
                    }
                    let noise: Vec<f64> = s.iter().map(|v| v - i0).collect();
                    let corrected: Vec<f64> = s
                        .iter()
                        .zip(&sp)
                        .map(|(a, b)| a - k_corr * (b - i0) - i0)
                        .collect();
                    let pc = tie_noise(&noise, grid, i0, dz_mm, wavenumber)?;
                    let pq = tie_noise(&corrected, grid, i0, dz_mm, wavenumber)?;
                    Ok((pq.variance(), pc.variance()))
                })
                .collect::<Result<_>>()?;
            let (vq, vc): (f64, f64) = per_trial
                .iter()
                .fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
            let pct: Vec<f64> = per_trial
                .iter()
                .map(|p| 100.0 * (1.0 - p.0 / p.1))
                .collect();
            let n = pct.len() as f64;
            let m = pct.iter().sum::<f64>() / n;
            let stderr = if pct.len() > 1 {
                (pct.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                f64::NAN
            };
            Ok(NoisePoint {
                l_cff_um: l,
                suppression_pct: (100.0 * (1.0 - vq / vc)).clamp(0.0, 100.0),
                stderr,
            })
        })
        .collect()
}

/// Knee of the suppression curve: the smallest l_CFF whose suppression is below `threshold` percent.
pub fn noise_knee(points: &[NoisePoint], threshold: f64) -> Option<f64> {
    points
        .iter()
        .find(|p| p.suppression_pct < threshold)
        .map(|p| p.l_cff_um)
}

/// True when no step up exceeds `n_sigma` combined standard errors.
pub fn non_increasing(points: &[NoisePoint], n_sigma: f64) -> bool {
    points.windows(2).all(|w| {
        let tol = n_sigma * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].suppression_pct <= w[0].suppression_pct + if tol.is_finite() { tol } else { 0.0 }
    })
}

/// Azimuthal average of |F(q)| in rings of width 1/(N·pitch); returns (|q|, mean) for non-empty rings.
pub fn radial_average(spec: &crate::field::ComplexField2D) -> Vec<(f64, f64)> {
    let g = spec.grid();
    let qx = crate::spectral::fftfreq(g.width, g.pitch);
    let qy = crate::spectral::fftfreq(g.height, g.pitch);
    let dq = 1.0 / (g.width.max(g.height) as f64 * g.pitch);
    let nbin = g.width.max(g.height);
    let (mut sum, mut cnt, mut qsum) = (vec![0.0; nbin], vec![0usize; nbin], vec![0.0; nbin]);
    for (r, fy) in qy.iter().enumerate() {
        for (c, fx) in qx.iter().enumerate() {
            let q = (fx * fx + fy * fy).sqrt();
            let b = (q / dq).round() as usize;
            if b < nbin {
                sum[b] += spec.values()[r * g.width + c].norm();
                qsum[b] += q;
                cnt[b] += 1;
            }
        }
    }
    (1..nbin)
        .filter(|&b| cnt[b] > 0)
        .map(|b| (qsum[b] / cnt[b] as f64, sum[b] / cnt[b] as f64))
        .collect()
}

/// Least-squares slope of ln(y) against ln(x) for points with x in [x_lo, x_hi].
pub fn loglog_slope(points: &[(f64, f64)], x_lo: f64, x_hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x >= x_lo && *x <= x_hi && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_basics() {
        let g = Grid::square(8, 1.0).unwrap();
        let a = ScalarField2D::from_fn(g, |r, c| ((r * 5 + c * 3) % 7) as f64).unwrap();
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let b = a.map(|v| -v + 4.0);
        assert!((pearson(&a, &b).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson(&a, &ScalarField2D::filled(g, 1.0).unwrap()).is_err());
    }

    #[test]
    fn pearson_small_cases() {
        let a: Vec<f64> = (1..=9).map(|v| v as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        assert_eq!(pearson_slices(&a, &b).unwrap(), 1.0);
        // Direct formula r = (nΣxy − ΣxΣy) / sqrt((nΣx² − (Σx)²)(nΣy² − (Σy)²)).
        let c = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0, 6.0, 9.0, 8.0];
        let n = 9.0;
        let (sx, sy): (f64, f64) = (a.iter().sum(), c.iter().sum());
        let sxy: f64 = a.iter().zip(&c).map(|(x, y)| x * y).sum();
        let sxx: f64 = a.iter().map(|x| x * x).sum();
        let syy: f64 = c.iter().map(|y| y * y).sum();
        let want = (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
        assert!((pearson_slices(&a, &c).unwrap() - want).abs() < 1e-14);
        assert!((want - 0.9).abs() < 1e-12);
    }

    fn synth(a: f64, b: f64, x0: f64, w: f64, n: usize, pitch: f64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) * pitch;
                0.5 * a * libm::erf((x - x0) / (std::f64::consts::SQRT_2 * w)) + b
            })
            .collect()
    }

    #[test]
    fn esf_exact_model() {
        let p = synth(1.0, 0.0, 20.3, 2.0, 40, 1.0);
        let f = esf_fit(&p, 1.0).unwrap();
        assert!((f.r_phase - 4.709_640_090).abs() < 1e-6, "{}", f.r_phase);
        assert!((f.a - 1.0).abs() < 1e-8 && f.b.abs() < 1e-8 && (f.x0 - 20.3).abs() < 1e-8);
        assert!(!f.flagged);
    }

    #[test]
    fn esf_se_formula() {
        let mut p = synth(-0.2, 0.1, 30.0, 2.5, 72, 1.625);
        for (i, v) in p.iter_mut().enumerate() {
            *v += 0.002 * ((i * 37 % 11) as f64 - 5.0) / 5.0;
        }
        let f = esf_fit(&p, 1.625).unwrap();
        assert!(f.w_ci[0] <= f.w && f.w <= f.w_ci[1]);
        let want = (2.0 * std::f64::consts::LN_2).sqrt() * (f.w_ci[1] - f.w_ci[0]) / 1.96;
        assert!((f.se_r - want).abs() < 1e-15);
        assert!((f.r_phase - FWHM_PER_SIGMA * f.w).abs() < 1e-12);
    }

    #[test]
    fn esf_rejects_short_profiles() {
        assert!(esf_fit(&[0.0; 10], 1.0).is_err());
    }

    #[test]
    fn knee_and_monotonicity() {
        let pts: Vec<NoisePoint> = [1.0, 5.0, 10.0, 20.0, 30.0, 40.0, 60.0, 80.0]
            .iter()
            .map(|&l| NoisePoint {
                l_cff_um: l,
                suppression_pct: if l < 25.0 {
                    99.0
                } else {
                    99.0 - 1.5 * (l - 25.0)
                },
                stderr: 0.1,
            })
            .collect();
        assert_eq!(noise_knee(&pts, 90.0), Some(40.0));
        assert_eq!(noise_knee(&pts, 10.0), None);
        assert!(non_increasing(&pts, 2.0));
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..50)
            .map(|i| (i as f64, 3.0 * (i as f64).powf(-2.0)))
            .collect();
        assert!((loglog_slope(&pts, 1.0, 50.0).unwrap() + 2.0).abs() < 1e-12);
    }
}
