//! FFT-based building blocks: 2D complex transforms, DST-I and Gaussian filtering.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned 2D complex FFT on a row-major `height × width` buffer.
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: p.plan_fft_forward(width),
            row_inv: p.plan_fft_inverse(width),
            col_fwd: p.plan_fft_forward(height),
            col_inv: p.plan_fft_inverse(height),
        }
    }

    fn run(&self, data: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.width * self.height);
        rows.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); self.height];
        for c in 0..self.width {
            for r in 0..self.height {
                col[r] = data[r * self.width + c];
            }
            cols.process(&mut col);
            for r in 0..self.height {
                data[r * self.width + c] = col[r];
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform including the 1/(w·h) factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_inv, &self.col_inv);
        let s = 1.0 / (self.width * self.height) as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }
}

/// Sample frequencies (cycles per unit of `d`) in FFT order.
pub fn fftfreq(n: usize, d: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let k = if i <= (n - 1) / 2 {
                i as f64
            } else {
                i as f64 - n as f64
            };
            k / (n as f64 * d)
        })
        .collect()
}

/// Type-I discrete sine transform of length-`n` vectors,
/// `S_k = Σ_j x_j sin(π (j+1)(k+1) / (n+1))`, computed through a length `2(n+1)` FFT.
pub struct Dst1 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst1 {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        Self { n, fft }
    }

    /// Transforms `x` in place using `buf` (length `2(n+1)`) as scratch.
    pub fn apply(&self, x: &mut [f64], buf: &mut [Complex64]) {
        let n = self.n;
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for j in 0..n {
            buf[j + 1] = Complex64::new(x[j], 0.0);
            buf[2 * n + 1 - j] = Complex64::new(-x[j], 0.0);
        }
        self.fft.process(buf);
        for k in 0..n {
            x[k] = -0.5 * buf[k + 1].im;
        }
    }

    pub fn scratch(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); 2 * (self.n + 1)]
    }
}

/// Separable 2D DST-I over a row-major `ny × nx` block (unnormalized; applying it
/// twice multiplies by `(nx+1)(ny+1)/4`).
pub fn dst1_2d(data: &mut [f64], nx: usize, ny: usize) {
    let (tx, ty) = (Dst1::new(nx), Dst1::new(ny));
    let mut bx = tx.scratch();
    for r in 0..ny {
        tx.apply(&mut data[r * nx..(r + 1) * nx], &mut bx);
    }
    let mut by = ty.scratch();
    let mut col = vec![0.0; ny];
    for c in 0..nx {
        for r in 0..ny {
            col[r] = data[r * nx + c];
        }
        ty.apply(&mut col, &mut by);
        for r in 0..ny {
            data[r * nx + c] = col[r];
        }
    }
}

/// Periodic convolution with a unit-sum Gaussian of standard deviation `sigma_px`.
pub fn gaussian_filter_periodic(
    values: &[f64],
    width: usize,
    height: usize,
    sigma_px: f64,
) -> Vec<f64> {
    if sigma_px == 0.0 {
        return values.to_vec();
    }
    let fft = Fft2::new(width, height);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut buf);
    let (qx, qy) = (fftfreq(width, 1.0), fftfreq(height, 1.0));
    let a = -2.0 * std::f64::consts::PI.powi(2) * sigma_px * sigma_px;
    for r in 0..height {
        for c in 0..width {
            buf[r * width + c] *= (a * (qx[c] * qx[c] + qy[r] * qy[r])).exp();
        }
    }
    fft.inverse(&mut buf);
    buf.iter().map(|z| z.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fftfreq_matches_numpy_layout() {
        assert_eq!(fftfreq(4, 1.0), vec![0.0, 0.25, -0.5, -0.25]);
        assert_eq!(fftfreq(5, 0.5), vec![0.0, 0.4, 0.8, -0.8, -0.4]);
    }

    #[test]
    fn dst1_against_direct_sum() {
        let n = 7;
        let x: Vec<f64> = (0..n)
            .map(|i| ((i * i) as f64).sin() + 0.3 * i as f64)
            .collect();
        let mut y = x.clone();
        let t = Dst1::new(n);
        t.apply(&mut y, &mut t.scratch());
        for (k, yk) in y.iter().enumerate() {
            let direct: f64 = (0..n)
                .map(|j| {
                    x[j] * (std::f64::consts::PI * ((j + 1) * (k + 1)) as f64 / (n + 1) as f64)
                        .sin()
                })
                .sum();
            assert!((yk - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn fft2_round_trip() {
        let (w, h) = (6, 5);
        let f = Fft2::new(w, h);
        let orig: Vec<Complex64> = (0..w * h)
            .map(|i| Complex64::new(i as f64, -(i as f64).sqrt()))
            .collect();
        let mut d = orig.clone();
        f.forward(&mut d);
        f.inverse(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gaussian_filter_preserves_sum() {
        let v: Vec<f64> = (0..64).map(|i| (i % 7) as f64).collect();
        let out = gaussian_filter_periodic(&v, 8, 8, 1.3);
        let (a, b): (f64, f64) = (v.iter().sum(), out.iter().sum());
        assert!((a - b).abs() / a < 1e-12);
    }
}
