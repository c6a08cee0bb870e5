//! Thin wrappers over the optimizer backends.

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: u64,
    pub converged: bool,
}

struct Cost<'a, F>(&'a F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Cost<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let v = (self.0)(p);
        Ok(if v.is_finite() { v } else { f64::MAX })
    }
}

/// Nelder-Mead from an axis-aligned simplex `x0 + step·e_i`.
pub fn nelder_mead<F>(f: &F, x0: &[f64], step: f64, max_iters: u64, sd_tolerance: f64) -> Result<Outcome>
where
    F: Fn(&[f64]) -> f64,
{
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(sd_tolerance).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let result = Executor::new(Cost(f), solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .map_err(|e| Error::InvalidParameter(format!("simplex search failed: {e}")))?;
    let state = result.state();
    let converged = matches!(state.get_termination_status(), TerminationStatus::Terminated(TerminationReason::SolverConverged));
    Ok(Outcome {
        x: state.get_best_param().cloned().unwrap_or_else(|| x0.to_vec()),
        value: state.get_best_cost(),
        iterations: state.get_iter(),
        converged,
    })
}

struct Problem<'a, R> {
    residual: &'a R,
    x: DVector<f64>,
}

impl<R> LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_, R>
where
    R: Fn(&DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)>,
{
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        (self.residual)(&self.x).map(|r| r.0)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        (self.residual)(&self.x).map(|r| r.1)
    }
}

/// Levenberg-Marquardt on `½‖r(x)‖²`; `residual` returns `(r, ∂r/∂x)` or
/// `None` where undefined. The reported value is `‖r‖²`.
pub fn levenberg_marquardt<R>(residual: &R, x0: DVector<f64>, patience: usize) -> Outcome
where
    R: Fn(&DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)>,
{
    let problem = Problem { residual, x: x0 };
    let (solved, report) = LevenbergMarquardt::new().with_patience(patience).with_ftol(1e-15).with_xtol(1e-15).minimize(problem);
    Outcome {
        x: solved.x.iter().copied().collect(),
        value: 2.0 * report.objective_function,
        iterations: report.number_of_evaluations as u64,
        converged: report.termination.was_successful(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_finds_rosenbrock_minimum() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let o = nelder_mead(&f, &[-1.2, 1.0], 0.5, 5000, 1e-14).unwrap();
        assert!(o.converged);
        assert!((o.x[0] - 1.0).abs() < 1e-5 && (o.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn lm_fits_exponential() {
        let t: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.0 * (-0.7 * t).exp()).collect();
        let r = |x: &DVector<f64>| {
            let res = DVector::from_iterator(t.len(), t.iter().zip(&y).map(|(t, y)| x[0] * (-x[1] * t).exp() - y));
            let jac = DMatrix::from_fn(t.len(), 2, |i, j| {
                let e = (-x[1] * t[i]).exp();
                if j == 0 {
                    e
                } else {
                    -x[0] * t[i] * e
                }
            });
            Some((res, jac))
        };
        let o = levenberg_marquardt(&r, DVector::from_vec(vec![1.0, 0.1]), 100);
        assert!(o.converged);
        assert!((o.x[0] - 2.0).abs() < 1e-10 && (o.x[1] - 0.7).abs() < 1e-10);
    }
}
