//! Deterministic scalar-wave forward model.

use num_complex::Complex64;

use crate::config::{fwhm_to_sigma, OpticalSystem};
use crate::error::{QpiError, Result};
use crate::field::{ComplexField2D, Grid, ScalarField2D};
use crate::object::ObjectSpec;
use crate::spectral::{fftfreq, gaussian_filter_periodic, Fft2};
use crate::target::WINDOW;

/// Intensities at z = -dz, 0, +dz.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityStack {
    pub i_minus: ScalarField2D,
    pub i_zero: ScalarField2D,
    pub i_plus: ScalarField2D,
    pub dz_mm: f64,
    /// Multiplier mapping raw intensity to photons per pixel.
    pub normalization: f64,
    /// Set when the transfer-function chirp is undersampled at this distance.
    pub aliasing: bool,
}

fn apply_transfer(buf: &mut [Complex64], grid: Grid, distance_mm: f64, wavelength_nm: f64) {
    let fft = Fft2::new(grid.width, grid.height);
    fft.forward(buf);
    let (qx, qy) = (
        fftfreq(grid.width, grid.pitch),
        fftfreq(grid.height, grid.pitch),
    );
    let a = -std::f64::consts::PI * wavelength_nm * 1e-3 * distance_mm * 1e3;
    for r in 0..grid.height {
        for c in 0..grid.width {
            let q2 = qx[c] * qx[c] + qy[r] * qy[r];
            buf[r * grid.width + c] *= Complex64::from_polar(1.0, a * q2);
        }
    }
    fft.inverse(buf);
}

/// Paraxial propagation by `distance_mm` with the transfer function
/// `exp(-i π λ z |q|²)` on the periodic grid. Unitary; negative distances back-propagate.
pub fn angular_spectrum_propagate(
    u: &ComplexField2D,
    distance_mm: f64,
    wavelength_nm: f64,
) -> Result<ComplexField2D> {
    if !(wavelength_nm > 0.0) || !distance_mm.is_finite() {
        return Err(QpiError::InvalidInput(
            "wavelength must be positive and distance finite".into(),
        ));
    }
    let grid = u.grid();
    if distance_mm == 0.0 {
        return Ok(u.clone());
    }
    let mut buf = u.values().to_vec();
    apply_transfer(&mut buf, grid, distance_mm, wavelength_nm);
    Ok(ComplexField2D::from_parts(grid, buf))
}

/// Propagation with the field embedded in a 2× zero-padded frame, cropped back after.
pub fn propagate_padded(
    u: &ComplexField2D,
    distance_mm: f64,
    wavelength_nm: f64,
) -> Result<ComplexField2D> {
    let g = u.grid();
    let big = Grid::new(2 * g.width, 2 * g.height, g.pitch)?;
    let (oy, ox) = (g.height / 2, g.width / 2);
    let mut buf = vec![Complex64::new(0.0, 0.0); big.len()];
    for r in 0..g.height {
        let s = big.idx(r + oy, ox);
        buf[s..s + g.width].copy_from_slice(&u.values()[r * g.width..(r + 1) * g.width]);
    }
    if distance_mm != 0.0 {
        apply_transfer(&mut buf, big, distance_mm, wavelength_nm);
    }
    let mut out = Vec::with_capacity(g.len());
    for r in 0..g.height {
        let s = big.idx(r + oy, ox);
        out.extend_from_slice(&buf[s..s + g.width]);
    }
    Ok(ComplexField2D::from_parts(g, out))
}

/// True when `λ·|dz|` exceeds `pitch²·N` on the propagation frame (chirp aliasing).
pub fn aliasing_flag(grid: Grid, distance_mm: f64, wavelength_nm: f64, padded: bool) -> bool {
    let n = grid.width.min(grid.height) as f64 * if padded { 2.0 } else { 1.0 };
    wavelength_nm * 1e-3 * distance_mm.abs() * 1e3 > grid.pitch * grid.pitch * n
}

/// Pointwise `u · sqrt(τ) · exp(iφ)`.
pub fn apply_object(u: &ComplexField2D, obj: &ObjectSpec) -> Result<ComplexField2D> {
    u.grid().ensure_same(&obj.grid(), "apply_object")?;
    let v = u
        .values()
        .iter()
        .zip(obj.tau().values().iter().zip(obj.phi().values()))
        .map(|(z, (&t, &p))| z * Complex64::from_polar(t.sqrt(), p))
        .collect();
    Ok(ComplexField2D::from_parts(u.grid(), v))
}

/// Periodic convolution with a normalized Gaussian of the given FWHM (micrometers).
pub fn imaging_blur(i: &ScalarField2D, fwhm_um: f64) -> Result<ScalarField2D> {
    if !(fwhm_um >= 0.0) {
        return Err(QpiError::InvalidInput(format!(
            "blur FWHM {fwhm_um} must be non-negative"
        )));
    }
    if fwhm_um == 0.0 {
        return Ok(i.clone());
    }
    let s = fwhm_to_sigma(fwhm_um) / i.pitch();
    ScalarField2D::new(
        i.grid(),
        gaussian_filter_periodic(i.values(), i.width(), i.height(), s),
    )
}

/// Gaussian illumination amplitude with intensity `exp(-2 r² / w²)` about the grid centre.
pub fn gaussian_illumination(grid: Grid, waist_um: f64) -> Result<ComplexField2D> {
    let (cy, cx) = (grid.height as f64 / 2.0, grid.width as f64 / 2.0);
    ComplexField2D::from_fn(grid, |r, c| {
        let y = (r as f64 + 0.5 - cy) * grid.pitch;
        let x = (c as f64 + 0.5 - cx) * grid.pitch;
        Complex64::new((-(x * x + y * y) / (waist_um * waist_um)).exp(), 0.0)
    })
}

/// Waist giving at least 90% intensity flatness over the central 220×220 window.
pub fn default_waist_um(pitch: f64) -> f64 {
    let corner = (WINDOW as f64 / 2.0) * std::f64::consts::SQRT_2 * pitch;
    // exp(-2 r²/w²) >= 0.9 at the corner, with 10% headroom.
    1.1 * corner * (2.0 / (1.0f64 / 0.9).ln()).sqrt()
}

pub fn default_illumination(grid: Grid) -> Result<ComplexField2D> {
    gaussian_illumination(grid, default_waist_um(grid.pitch))
}

/// Blurred intensity images at -dz, 0 and +dz, scaled so that the object-free
/// in-focus mean intensity equals `mean_photons`.
pub fn defocus_stack(
    obj: &ObjectSpec,
    illumination: &ComplexField2D,
    dz_mm: f64,
    sys: &OpticalSystem,
    mean_photons: f64,
) -> Result<IntensityStack> {
    if !(dz_mm > 0.0) {
        return Err(QpiError::InvalidInput(format!(
            "dz = {dz_mm} must be positive"
        )));
    }
    let u0 = apply_object(illumination, obj)?;
    let norm = mean_photons / illumination.intensity().mean();
    let plane = |z: f64| -> Result<ScalarField2D> {
        let u = if z == 0.0 {
            u0.clone()
        } else {
            propagate_padded(&u0, z, sys.wavelength_nm)?
        };
        Ok(imaging_blur(&u.intensity(), sys.blur_fwhm_um)?
            .scale(norm)
            .map(|v| v.max(0.0)))
    };
    Ok(IntensityStack {
        i_minus: plane(-dz_mm)?,
        i_zero: plane(0.0)?,
        i_plus: plane(dz_mm)?,
        dz_mm,
        normalization: norm,
        aliasing: aliasing_flag(illumination.grid(), dz_mm, sys.wavelength_nm, true),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::square(n, 1.625).unwrap()
    }

    #[test]
    fn zero_distance_is_identity() {
        let g = grid(32);
        let u =
            ComplexField2D::from_fn(g, |r, c| Complex64::new(r as f64, c as f64 * 0.5)).unwrap();
        let v = angular_spectrum_propagate(&u, 0.0, 810.0).unwrap();
        assert_eq!(u, v);
    }

    #[test]
    fn plane_wave_invariant() {
        let g = grid(32);
        let u = ComplexField2D::filled(g, Complex64::new(0.6, -0.2)).unwrap();
        let v = angular_spectrum_propagate(&u, 3.7, 810.0).unwrap();
        for z in v.values() {
            assert!((z - Complex64::new(0.6, -0.2)).norm() < 1e-12);
        }
    }

    #[test]
    fn back_propagation_inverts() {
        let g = grid(32);
        let u = ComplexField2D::from_fn(g, |r, c| Complex64::from_polar(1.0, 0.1 * (r * c) as f64))
            .unwrap();
        let v = angular_spectrum_propagate(
            &angular_spectrum_propagate(&u, 0.2, 810.0).unwrap(),
            -0.2,
            810.0,
        )
        .unwrap();
        for (a, b) in u.values().iter().zip(v.values()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn gaussian_beam_width() {
        // Second-moment width vs w(z) = w0 sqrt(1 + (λz/πw0²)²).
        let g = grid(256);
        let w0 = 20.0;
        let u = gaussian_illumination(g, w0).unwrap();
        let v = angular_spectrum_propagate(&u, 1.0, 810.0).unwrap();
        let i = v.intensity();
        let c = 128.0;
        let (mut s, mut sx) = (0.0, 0.0);
        for r in 0..256 {
            for col in 0..256 {
                let x = (col as f64 + 0.5 - c) * g.pitch;
                s += i.get(r, col);
                sx += i.get(r, col) * x * x;
            }
        }
        let w = 2.0 * (sx / s).sqrt();
        let zr = std::f64::consts::PI * w0 * w0 / 0.81;
        let want = w0 * (1.0 + (1000.0 / zr).powi(2)).sqrt();
        assert!((w - want).abs() / want < 0.01, "w = {w}, want {want}");
    }

    #[test]
    fn blur_spot_fwhm() {
        let g = Grid::square(64, 0.25).unwrap();
        let mut v = vec![0.0; g.len()];
        v[g.idx(32, 32)] = 1.0;
        let out = imaging_blur(&ScalarField2D::new(g, v).unwrap(), 1.5).unwrap();
        let row = out.row(32);
        let peak = row[32];
        // Linear interpolation of the half-maximum crossings.
        let cross = |range: &mut dyn Iterator<Item = usize>| -> f64 {
            for c in range {
                let (a, b) = (row[c], row[c + 1]);
                if (a - peak / 2.0) * (b - peak / 2.0) <= 0.0 {
                    return c as f64 + (peak / 2.0 - a) / (b - a);
                }
            }
            f64::NAN
        };
        let left = cross(&mut (20..32));
        let right = cross(&mut (32..44));
        let fwhm = (right - left) * g.pitch;
        assert!((fwhm - 1.5).abs() < 0.5 * g.pitch, "fwhm {fwhm}");
    }

    #[test]
    fn blur_keeps_uniform_and_total() {
        let g = grid(16);
        let f = ScalarField2D::filled(g, 3.0).unwrap();
        let b = imaging_blur(&f, 4.0).unwrap();
        assert!(b.values().iter().all(|v| (v - 3.0).abs() < 1e-12));
        let f = ScalarField2D::from_fn(g, |r, c| ((r * 3 + c) % 5) as f64).unwrap();
        let b = imaging_blur(&f, 2.0).unwrap();
        assert!((b.sum() - f.sum()).abs() / f.sum() < 1e-10);
        assert_eq!(imaging_blur(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn object_interaction() {
        let g = grid(16);
        let u = ComplexField2D::filled(g, Complex64::new(1.0, 0.0)).unwrap();
        let o = ObjectSpec::new(
            ScalarField2D::filled(g, 0.94).unwrap(),
            ScalarField2D::zeros(g).unwrap(),
        )
        .unwrap();
        let v = apply_object(&u, &o).unwrap();
        assert!(v
            .intensity()
            .values()
            .iter()
            .all(|i| (i - 0.94).abs() < 1e-15));
        assert_eq!(
            apply_object(&u, &ObjectSpec::uniform(g).unwrap()).unwrap(),
            u
        );
    }

    #[test]
    fn default_illumination_flatness() {
        let g = grid(220);
        let i = default_illumination(g).unwrap().intensity();
        assert!(i.min() / i.max() >= 0.9);
    }
}
