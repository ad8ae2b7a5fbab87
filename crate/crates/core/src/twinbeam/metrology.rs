use super::{NrfPoint, TwinBeamFrame};
use crate::config::CheckedConfig;
use crate::error::{QpiError, Result};
use crate::field::{Grid, ScalarField2D};

/// Non-overlapping `bin_px × bin_px` sums; pitch scales by `bin_px`.
///
/// When `bin_px` does not divide a side, the covered region is centred and the
/// leftover rows/columns (at most `bin_px - 1`) are cropped, floor half first.
pub fn bin_counts(img: &ScalarField2D, bin_px: usize) -> Result<ScalarField2D> {
    if bin_px == 0 {
        return Err(QpiError::InvalidInput("bin_px must be at least 1".into()));
    }
    if bin_px == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let (bw, bh) = (w / bin_px, h / bin_px);
    let (ox, oy) = ((w - bw * bin_px) / 2, (h - bh * bin_px) / 2);
    let g = Grid::new(bw, bh, img.pitch() * bin_px as f64)?;
    let mut out = vec![0.0; g.len()];
    for r in 0..bh * bin_px {
        let src = img.row(r + oy);
        let dst = &mut out[(r / bin_px) * bw..(r / bin_px + 1) * bw];
        for (c, &v) in src[ox..ox + bw * bin_px].iter().enumerate() {
            dst[c / bin_px] += v;
        }
    }
    ScalarField2D::new(g, out)
}

/// Maps raw idler counts onto signal pixels (point reflection about the centre).
pub fn register_idler(n_i: &ScalarField2D) -> ScalarField2D {
    n_i.rotate180()
}

/// Pooled per-pixel variance over frames (unbiased) averaged over pixels, with the per-pixel mean.
fn pixel_moments(fields: &[ScalarField2D]) -> (f64, f64) {
    let n = fields.len() as f64;
    let len = fields[0].values().len();
    let (mut var, mut mean) = (0.0, 0.0);
    for p in 0..len {
        let m = fields.iter().map(|f| f.values()[p]).sum::<f64>() / n;
        let v = fields
            .iter()
            .map(|f| (f.values()[p] - m).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        var += v;
        mean += m;
    }
    (var / len as f64, mean / len as f64)
}

/// Variance-to-mean ratio of a set of count images of one arm.
pub fn fano_factor(fields: &[ScalarField2D]) -> Result<f64> {
    if fields.len() < 2 {
        return Err(QpiError::InvalidInput("need at least two frames".into()));
    }
    let (v, m) = pixel_moments(fields);
    Ok(v / m)
}

/// NRF = ⟨δ²(N_s − N_i)⟩ / ⟨N_s + N_i⟩ at the given binning, with fluctuations taken
/// per pixel across frames, and the signal-arm Fano factor.
pub fn measure_nrf(
    frames: &[TwinBeamFrame],
    bin_px: usize,
    cfg: &CheckedConfig,
) -> Result<NrfPoint> {
    let (nrf, fano, cells) = nrf_and_fano(frames, bin_px)?;
    let n = frames.len();
    Ok(NrfPoint {
        d_factor: cfg.d_factor(bin_px),
        nrf,
        fano,
        n_frames: n,
        stderr: nrf * (2.0 / (cells as f64 * (n as f64 - 1.0))).sqrt(),
    })
}

fn nrf_and_fano(frames: &[TwinBeamFrame], bin_px: usize) -> Result<(f64, f64, usize)> {
    if frames.len() < 2 {
        return Err(QpiError::InvalidInput(
            "measure_nrf needs at least two frames".into(),
        ));
    }
    let mut diff = Vec::with_capacity(frames.len());
    let mut sum = Vec::with_capacity(frames.len());
    let mut sig = Vec::with_capacity(frames.len());
    for f in frames {
        let s = bin_counts(&f.n_s, bin_px)?;
        let i = bin_counts(&register_idler(&f.n_i), bin_px)?;
        diff.push(s.sub(&i)?);
        sum.push(s.add(&i)?);
        sig.push(s);
    }
    let (vd, _) = pixel_moments(&diff);
    let mean_sum = sum.iter().map(|f| f.mean()).sum::<f64>() / sum.len() as f64;
    let fano = fano_factor(&sig)?;
    Ok((vd / mean_sum, fano, sig[0].values().len()))
}

/// Fano factor of the registered idler arm at the given binning.
pub fn idler_fano(frames: &[TwinBeamFrame], bin_px: usize) -> Result<f64> {
    let v = frames
        .iter()
        .map(|f| bin_counts(&f.n_i, bin_px))
        .collect::<Result<Vec<_>>>()?;
    fano_factor(&v)
}
