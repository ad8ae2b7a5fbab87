//! Small nonlinear least-squares layer over `levenberg-marquardt`.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt, TerminationReason};
use nalgebra::{storage::Owned, DMatrix, DVector, Dyn};

use crate::error::{QpiError, Result};

/// A residual model `r_i(p)` with analytic or numeric Jacobian.
pub trait Model {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, p: &[f64], out: &mut [f64]);
    /// Row-major `n_residuals × n_params` Jacobian. Defaults to central differences.
    fn jacobian(&self, p: &[f64], out: &mut [f64]) {
        let (m, n) = (self.n_residuals(), self.n_params());
        let mut q = p.to_vec();
        let (mut hi, mut lo) = (vec![0.0; m], vec![0.0; m]);
        for j in 0..n {
            let h = 1e-6 * p[j].abs().max(1e-3);
            q[j] = p[j] + h;
            self.residuals(&q, &mut hi);
            q[j] = p[j] - h;
            self.residuals(&q, &mut lo);
            q[j] = p[j];
            for i in 0..m {
                out[i * n + j] = (hi[i] - lo[i]) / (2.0 * h);
            }
        }
    }
}

struct Problem<'a, M: Model> {
    model: &'a M,
    p: DVector<f64>,
}

impl<M: Model> LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_, M> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.p.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.p.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let mut r = vec![0.0; self.model.n_residuals()];
        self.model.residuals(self.p.as_slice(), &mut r);
        r.iter()
            .all(|v| v.is_finite())
            .then(|| DVector::from_vec(r))
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let (m, n) = (self.model.n_residuals(), self.model.n_params());
        let mut j = vec![0.0; m * n];
        self.model.jacobian(self.p.as_slice(), &mut j);
        j.iter()
            .all(|v| v.is_finite())
            .then(|| DMatrix::from_row_slice(m, n, &j))
    }
}

/// Fit result with the linearized parameter covariance `s² (JᵀJ)⁻¹`.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub covariance: Vec<f64>,
    pub rss: f64,
    pub dof: usize,
}

impl FitResult {
    pub fn std_err(&self, j: usize) -> f64 {
        let n = self.params.len();
        self.covariance[j * n + j].max(0.0).sqrt()
    }
}

pub fn least_squares<M: Model>(model: &M, start: &[f64]) -> Result<FitResult> {
    let (m, n) = (model.n_residuals(), model.n_params());
    if m < n {
        return Err(QpiError::InvalidInput(format!(
            "{m} residuals cannot fix {n} parameters"
        )));
    }
    let problem = Problem {
        model,
        p: DVector::from_column_slice(start),
    };
    let (problem, report) = LevenbergMarquardt::new()
        .with_ftol(1e-15)
        .with_xtol(1e-15)
        .with_gtol(1e-15)
        .with_patience(400)
        .minimize(problem);
    // Hitting machine precision before the tolerances counts as converged.
    let ok = report.termination.was_successful()
        || matches!(
            report.termination,
            TerminationReason::NoImprovementPossible(_)
        );
    if !ok {
        return Err(QpiError::Numerical(format!(
            "fit did not converge: {:?}",
            report.termination
        )));
    }
    let p = problem.p.as_slice().to_vec();
    let mut r = vec![0.0; m];
    model.residuals(&p, &mut r);
    let rss: f64 = r.iter().map(|v| v * v).sum();
    let mut jac = vec![0.0; m * n];
    model.jacobian(&p, &mut jac);
    let j = DMatrix::from_row_slice(m, n, &jac);
    let jtj = j.transpose() * &j;
    let inv = jtj
        .try_inverse()
        .ok_or_else(|| QpiError::Numerical("singular normal matrix".into()))?;
    let dof = m - n;
    let s2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    let cov = inv * s2;
    let mut covariance = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            covariance[a * n + b] = cov[(a, b)];
        }
    }
    Ok(FitResult {
        params: p,
        covariance,
        rss,
        dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line<'a> {
        x: &'a [f64],
        y: &'a [f64],
    }

    impl Model for Line<'_> {
        fn n_params(&self) -> usize {
            2
        }
        fn n_residuals(&self) -> usize {
            self.x.len()
        }
        fn residuals(&self, p: &[f64], out: &mut [f64]) {
            for ((o, x), y) in out.iter_mut().zip(self.x).zip(self.y) {
                *o = p[0] + p[1] * x - y;
            }
        }
    }

    #[test]
    fn recovers_line_and_covariance() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let noise = [0.1, -0.1, 0.05, -0.05, 0.0, 0.1, -0.1, 0.05, -0.05, 0.0];
        let y: Vec<f64> = x
            .iter()
            .zip(noise)
            .map(|(x, e)| 1.0 + 2.0 * x + e)
            .collect();
        let f = least_squares(&Line { x: &x, y: &y }, &[0.0, 0.0]).unwrap();
        // Ordinary least squares closed form.
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let icpt = (sy - slope * sx) / n;
        assert!((f.params[1] - slope).abs() < 1e-9);
        assert!((f.params[0] - icpt).abs() < 1e-9);
        let s2 = f.rss / 8.0;
        let var_slope = s2 * n / (n * sxx - sx * sx);
        assert!((f.std_err(1) - var_slope.sqrt()).abs() < 1e-9);
    }
}
