//! Monte-Carlo twin-beam frames.
//!
//! Pairs are born per pixel of the object window grown by a margin. Each pair is
//! split into three independent Poisson classes: both photons detected, signal
//! only, idler only. Single-photon classes are drawn per pixel from their
//! expected images. Both-detected pairs are sampled one by one from per-axis
//! joint (signal offset, idler offset) tables, which integrate the uniform
//! sub-pixel birth position, the signal blur and the pair-correlation spread.
//! Idler offsets are expressed in registered (point-reflected) coordinates.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{norm_cdf, AliasTable, SpillStats, TwinBeamFrame};
use crate::config::{fwhm_to_sigma, BeamProfile, CheckedConfig};
use crate::error::Result;
use crate::field::{Grid, ScalarField2D};
use crate::object::ObjectSpec;
use crate::retrieval::gradient;
use crate::rng::RngStream;

const QUAD_NODES: usize = 128;
const TAIL_SIGMAS: f64 = 7.0;
const KEY_SCALE: f64 = 4096.0;
const MAX_MARGIN: usize = 64;

/// Probability that `floor(u + shift + σ·g)` equals each integer, averaged over
/// `u ~ U[0,1)` and standard normal `g`. Entry `k` is offset `first + k`.
#[derive(Debug, Clone)]
pub struct OffsetTable {
    pub first: i32,
    pub probs: Vec<f64>,
}

fn cell_prob(u: f64, shift: f64, sigma: f64, a: i32) -> f64 {
    // P(a <= u + shift + σ g < a + 1)
    let lo = a as f64 - u - shift;
    if sigma == 0.0 {
        return if lo <= 0.0 && 0.0 < lo + 1.0 {
            1.0
        } else {
            0.0
        };
    }
    norm_cdf((lo + 1.0) / sigma) - norm_cdf(lo / sigma)
}

fn offset_range(shift: f64, sigma: f64) -> (i32, i32) {
    let lo = (shift - TAIL_SIGMAS * sigma).floor() as i32 - 1;
    let hi = (shift + 1.0 + TAIL_SIGMAS * sigma).floor() as i32 + 1;
    (lo, hi)
}

fn nodes() -> impl Iterator<Item = f64> {
    (0..QUAD_NODES).map(|q| (q as f64 + 0.5) / QUAD_NODES as f64)
}

/// Single-photon offset law for a uniform sub-pixel start, a fixed shift and a
/// Gaussian spread, both in pixels.
pub fn offset_table(shift: f64, sigma: f64) -> OffsetTable {
    let (lo, hi) = offset_range(shift, sigma);
    let mut probs = vec![0.0; (hi - lo + 1) as usize];
    for u in nodes() {
        for (k, p) in probs.iter_mut().enumerate() {
            *p += cell_prob(u, shift, sigma, lo + k as i32);
        }
    }
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    OffsetTable { first: lo, probs }
}

/// Joint law of (signal offset, registered idler offset) along one axis.
struct PairTable {
    a0: i32,
    c0: i32,
    nc: usize,
    /// Marginals (for the single-photon classes and expected images).
    pa: Vec<f64>,
    pc: Vec<f64>,
    alias: AliasTable,
}

impl PairTable {
    fn new(displacement: f64, sb: f64, delta: f64, si: f64) -> Result<Self> {
        let (a0, a1) = offset_range(displacement, sb);
        let (c0, c1) = offset_range(-delta, si);
        let (na, nc) = ((a1 - a0 + 1) as usize, (c1 - c0 + 1) as usize);
        let mut joint = vec![0.0; na * nc];
        let (mut fa, mut fc) = (vec![0.0; na], vec![0.0; nc]);
        for u in nodes() {
            for (k, v) in fa.iter_mut().enumerate() {
                *v = cell_prob(u, displacement, sb, a0 + k as i32);
            }
            // Registered idler lands at x - Δ - n.
            for (k, v) in fc.iter_mut().enumerate() {
                *v = cell_prob(u, -delta, si, c0 + k as i32);
            }
            for i in 0..na {
                if fa[i] > 0.0 {
                    for j in 0..nc {
                        joint[i * nc + j] += fa[i] * fc[j];
                    }
                }
            }
        }
        let s: f64 = joint.iter().sum();
        joint.iter_mut().for_each(|p| *p /= s);
        let pa = (0..na)
            .map(|i| joint[i * nc..(i + 1) * nc].iter().sum())
            .collect();
        let pc = (0..nc)
            .map(|j| (0..na).map(|i| joint[i * nc + j]).sum())
            .collect();
        let alias = AliasTable::new(&joint)?;
        Ok(Self {
            a0,
            c0,
            nc,
            pa,
            pc,
            alias,
        })
    }

    #[inline]
    fn draw(&self, rng: &mut impl Rng) -> (i32, i32) {
        let k = self.alias.sample(rng);
        (
            self.a0 + (k / self.nc) as i32,
            self.c0 + (k % self.nc) as i32,
        )
    }
}

/// Pre-computed sampler for one (object, defocus, configuration) triple.
pub struct TwinBeamSampler {
    window: Grid,
    margin: usize,
    dz_mm: f64,
    dom_w: usize,
    dom_h: usize,
    rate_both: Vec<f64>,
    key_x: Vec<u32>,
    key_y: Vec<u32>,
    tables: Vec<PairTable>,
    signal_only: Vec<f64>,
    idler_only: Vec<f64>,
    signal_mean: Vec<f64>,
    idler_mean: Vec<f64>,
}

impl TwinBeamSampler {
    /// `obj = None` samples the object-free beam on `grid`.
    pub fn new(
        obj: Option<&ObjectSpec>,
        grid: Grid,
        cfg: &CheckedConfig,
        dz_mm: f64,
    ) -> Result<Self> {
        grid.check()?;
        if let Some(o) = obj {
            o.grid().ensure_same(&grid, "sampler object")?;
        }
        let (w, h, pitch) = (grid.width, grid.height, grid.pitch);
        let twin = &cfg.twin;
        let sb = fwhm_to_sigma(cfg.optical.blur_fwhm_um) / pitch;
        let si = twin.sigma_um / pitch;
        let delta = twin.delta_um() / pitch;

        // Ray displacement (dz/k)∇φ in pixels.
        let scale = dz_mm * 1e3 / cfg.optical.wavenumber() / pitch;
        let (gx, gy) = match obj {
            Some(o) => gradient(o.phi()),
            None => (vec![0.0; grid.len()], vec![0.0; grid.len()]),
        };
        let quant = |g: f64| (g * scale * KEY_SCALE).round() as i64;
        let dmax = gx
            .iter()
            .chain(&gy)
            .fold(0.0f64, |m, &g| m.max((g * scale).abs()));
        let need = (dmax + TAIL_SIGMAS * sb)
            .max(delta.abs() + TAIL_SIGMAS * si)
            .ceil() as usize
            + 2;
        let margin = need.min(MAX_MARGIN);
        let (dw, dh) = (w + 2 * margin, h + 2 * margin);

        let mut cache: HashMap<i64, u32> = HashMap::new();
        let mut tables = Vec::new();
        let mut key_of = |q: i64| -> Result<u32> {
            if let Some(&k) = cache.get(&q) {
                return Ok(k);
            }
            tables.push(PairTable::new(q as f64 / KEY_SCALE, sb, delta, si)?);
            let k = (tables.len() - 1) as u32;
            cache.insert(q, k);
            Ok(k)
        };

        let lambda = if twin.eta0 > 0.0 {
            twin.mean_photons_per_pixel / twin.eta0
        } else {
            0.0
        };
        let envelope = beam_envelope(grid, margin, twin.beam_profile);
        let eta = twin.eta0;
        let n = dw * dh;
        let (mut rate_both, mut rate_s, mut rate_i) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let (mut key_x, mut key_y) = (vec![0u32; n], vec![0u32; n]);
        for r in 0..dh {
            for c in 0..dw {
                let p = r * dw + c;
                let inside = r >= margin && r < margin + h && c >= margin && c < margin + w;
                let (tau, qx, qy) = if inside {
                    let i = (r - margin) * w + (c - margin);
                    (
                        obj.map_or(1.0, |o| o.tau().values()[i]),
                        quant(gx[i]),
                        quant(gy[i]),
                    )
                } else {
                    (1.0, 0, 0)
                };
                let l = lambda * envelope[p];
                rate_both[p] = l * eta * eta * tau;
                rate_s[p] = l * eta * tau * (1.0 - eta);
                rate_i[p] = l * eta * (1.0 - eta * tau);
                key_x[p] = key_of(qx)?;
                key_y[p] = key_of(qy)?;
            }
        }

        let mut me = Self {
            window: grid,
            margin,
            dz_mm,
            dom_w: dw,
            dom_h: dh,
            rate_both,
            key_x,
            key_y,
            tables,
            signal_only: Vec::new(),
            idler_only: Vec::new(),
            signal_mean: Vec::new(),
            idler_mean: Vec::new(),
        };
        me.signal_only = me.scatter(&rate_s, true);
        me.idler_only = me.scatter(&rate_i, false);
        let both_s = me.scatter(&me.rate_both, true);
        let both_i = me.scatter(&me.rate_both, false);
        me.signal_mean = both_s
            .iter()
            .zip(&me.signal_only)
            .map(|(a, b)| a + b)
            .collect();
        me.idler_mean = both_i
            .iter()
            .zip(&me.idler_only)
            .map(|(a, b)| a + b)
            .collect();
        Ok(me)
    }

    /// Expected window image of a birth-rate map through the signal or idler marginals.
    fn scatter(&self, rate: &[f64], signal: bool) -> Vec<f64> {
        let (w, h, m) = (
            self.window.width as isize,
            self.window.height as isize,
            self.margin as isize,
        );
        let mut out = vec![0.0; self.window.len()];
        for r in 0..self.dom_h {
            for c in 0..self.dom_w {
                let p = r * self.dom_w + c;
                if rate[p] == 0.0 {
                    continue;
                }
                let (tx, ty) = (
                    &self.tables[self.key_x[p] as usize],
                    &self.tables[self.key_y[p] as usize],
                );
                let (px, x0, py, y0) = if signal {
                    (&tx.pa, tx.a0, &ty.pa, ty.a0)
                } else {
                    (&tx.pc, tx.c0, &ty.pc, ty.c0)
                };
                for (j, &qy) in py.iter().enumerate() {
                    let rr = r as isize + y0 as isize + j as isize - m;
                    if rr < 0 || rr >= h {
                        continue;
                    }
                    for (i, &qx) in px.iter().enumerate() {
                        let cc = c as isize + x0 as isize + i as isize - m;
                        if cc >= 0 && cc < w {
                            out[(rr * w + cc) as usize] += rate[p] * qx * qy;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn window(&self) -> Grid {
        self.window
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    /// Mean signal counts per pixel.
    pub fn expected_signal(&self) -> ScalarField2D {
        ScalarField2D::from_parts(self.window, self.signal_mean.clone())
    }

    /// Mean idler counts per pixel in registered coordinates.
    pub fn expected_idler_registered(&self) -> ScalarField2D {
        ScalarField2D::from_parts(self.window, self.idler_mean.clone())
    }

    /// Signal counts summed over `n_frames` independent exposures (exact law).
    pub fn pooled_signal(&self, n_frames: u64, stream: RngStream) -> ScalarField2D {
        let mut rng = stream.rng();
        let v = self
            .signal_mean
            .iter()
            .map(|&m| poisson(m * n_frames as f64, &mut rng))
            .collect();
        ScalarField2D::from_parts(self.window, v)
    }

    pub fn sample(&self, stream: RngStream) -> TwinBeamFrame {
        let mut rng = stream.rng();
        let (w, h, m) = (
            self.window.width as isize,
            self.window.height as isize,
            self.margin as isize,
        );
        let mut ns = vec![0.0; self.window.len()];
        let mut ni = vec![0.0; self.window.len()];
        let mut spill = SpillStats::default();
        let (dw, dh) = (self.dom_w as isize, self.dom_h as isize);
        for r in 0..self.dom_h {
            for c in 0..self.dom_w {
                let p = r * self.dom_w + c;
                let n = poisson(self.rate_both[p], &mut rng) as u64;
                if n == 0 {
                    continue;
                }
                let (tx, ty) = (
                    &self.tables[self.key_x[p] as usize],
                    &self.tables[self.key_y[p] as usize],
                );
                let (ri, ci) = (r as isize, c as isize);
                let born_inside = ri >= m && ri < m + h && ci >= m && ci < m + w;
                if born_inside {
                    spill.born_in_window += 2 * n;
                }
                for _ in 0..n {
                    let (ax, cx) = tx.draw(&mut rng);
                    let (ay, cy) = ty.draw(&mut rng);
                    for (dy, dx, buf) in [(ay, ax, &mut ns), (cy, cx, &mut ni)] {
                        let (rr, cc) = (ri + dy as isize, ci + dx as isize);
                        if born_inside && (rr < 0 || rr >= dh || cc < 0 || cc >= dw) {
                            spill.dropped += 1;
                        }
                        let (wr, wc) = (rr - m, cc - m);
                        if wr >= 0 && wr < h && wc >= 0 && wc < w {
                            buf[(wr * w + wc) as usize] += 1.0;
                        }
                    }
                }
            }
        }
        for (v, &mu) in ns.iter_mut().zip(&self.signal_only) {
            *v += poisson(mu, &mut rng);
        }
        for (v, &mu) in ni.iter_mut().zip(&self.idler_only) {
            *v += poisson(mu, &mut rng);
        }
        let n_s = ScalarField2D::from_parts(self.window, ns);
        let n_i = ScalarField2D::from_parts(self.window, ni).rotate180();
        TwinBeamFrame {
            n_s,
            n_i,
            dz_mm: self.dz_mm,
            stream_index: stream.stream_index,
            spill,
        }
    }
}

fn poisson(mean: f64, rng: &mut impl Rng) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(0.0)
}

/// Birth-rate envelope over the domain, normalized to unit mean on the window.
fn beam_envelope(grid: Grid, margin: usize, profile: BeamProfile) -> Vec<f64> {
    let (dw, dh) = (grid.width + 2 * margin, grid.height + 2 * margin);
    match profile {
        BeamProfile::Uniform => vec![1.0; dw * dh],
        BeamProfile::Gaussian { waist_um } => {
            let (cy, cx) = (dh as f64 / 2.0, dw as f64 / 2.0);
            let mut e: Vec<f64> = (0..dh * dw)
                .map(|p| {
                    let y = ((p / dw) as f64 + 0.5 - cy) * grid.pitch;
                    let x = ((p % dw) as f64 + 0.5 - cx) * grid.pitch;
                    (-2.0 * (x * x + y * y) / (waist_um * waist_um)).exp()
                })
                .collect();
            let mut s = 0.0;
            for r in margin..margin + grid.height {
                for c in margin..margin + grid.width {
                    s += e[r * dw + c];
                }
            }
            let k = grid.len() as f64 / s;
            e.iter_mut().for_each(|v| *v *= k);
            e
        }
    }
}

/// Builds a sampler and draws one frame.
pub fn sample_twin_frame(
    obj: Option<&ObjectSpec>,
    grid: Grid,
    cfg: &CheckedConfig,
    dz_mm: f64,
    stream: RngStream,
) -> Result<TwinBeamFrame> {
    Ok(TwinBeamSampler::new(obj, grid, cfg, dz_mm)?.sample(stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate_config, OpticalSystem, TwinBeamConfig};

    /// P(k) = ∫₀¹ [Φ((k+1−u−s)/σ) − Φ((k−u−s)/σ)] du in closed form.
    fn cell_oracle(k: i32, s: f64, sg: f64) -> f64 {
        let g = |a: f64| {
            let t = a / sg;
            sg * (t * crate::twinbeam::norm_cdf(t)
                + (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt())
        };
        // ∫₀¹ Φ((a−u)/σ) du = G(a) − G(a−1).
        let f = |a: f64| g(a) - g(a - 1.0);
        f(k as f64 + 1.0 - s) - f(k as f64 - s)
    }

    #[test]
    fn offset_table_matches_closed_form() {
        let (s, sg) = (0.3, 1.1);
        let t = offset_table(s, sg);
        for (j, p) in t.probs.iter().enumerate() {
            let k = t.first + j as i32;
            assert!((p - cell_oracle(k, s, sg)).abs() < 1e-5, "k={k}");
        }
        // Uniform birth position adds 1/12 and pixel grouping another 1/12.
        let mean: f64 = t
            .probs
            .iter()
            .enumerate()
            .map(|(k, p)| (t.first + k as i32) as f64 * p)
            .sum();
        let var: f64 = t
            .probs
            .iter()
            .enumerate()
            .map(|(k, p)| ((t.first + k as i32) as f64 - mean).powi(2) * p)
            .sum();
        assert!((mean - s).abs() < 1e-5, "{mean}");
        assert!((var - (sg * sg + 1.0 / 6.0)).abs() < 1e-4, "{var}");
    }

    #[test]
    fn pair_table_marginals_sum_to_one() {
        let t = PairTable::new(0.4, 0.39, 0.615, 1.31).unwrap();
        assert!((t.pa.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((t.pc.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expected_signal_is_flat_without_object() {
        let cfg = validate_config(&OpticalSystem::default(), &TwinBeamConfig::default()).unwrap();
        let g = Grid::square(16, 1.625).unwrap();
        let s = TwinBeamSampler::new(None, g, &cfg, 0.0).unwrap();
        for v in s.expected_signal().values() {
            assert!((v - 600.0).abs() < 1e-6);
        }
        for v in s.expected_idler_registered().values() {
            assert!((v - 600.0).abs() < 1e-6);
        }
    }
}
