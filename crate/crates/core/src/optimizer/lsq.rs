//! Box-constrained Levenberg-Marquardt.
//!
//! Trial steps are projected onto the box; parameters pinned at a bound with
//! the gradient pointing outward are frozen for the step. The Jacobian of
//! the stacked residual comes from central finite differences.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::LengthMismatch {
                left: lower.len(),
                right: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Invalid(format!("bounds {lower:?} > {upper:?}")));
        }
        Ok(Self { lower, upper })
    }

    pub fn scalar(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    fn project(&self, x: &mut DVector<f64>) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub fd_relative_step: f64,
    pub initial_damping: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tol: 1e-10,
            step_tol: 1e-12,
            fd_relative_step: 1e-7,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    Step,
    MaxIterations,
    /// No cost-decreasing step found even at maximal damping.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsqSolution {
    pub x: Vec<f64>,
    /// `0.5 * |r(x)|^2`
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
}

fn half_sq(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

fn eval<F>(f: &F, x: &DVector<f64>) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    Ok(DVector::from_vec(f(x.as_slice())?))
}

fn fd_jacobian<F>(f: &F, x: &DVector<f64>, m: usize, rel: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.clone();
    for j in 0..n {
        let h = rel * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let rp = eval(f, &xp)?;
        xp[j] = x[j] - h;
        let rm = eval(f, &xp)?;
        xp[j] = x[j];
        if rp.len() != m || rm.len() != m {
            return Err(Error::Invalid(
                "residual length changed between evaluations".into(),
            ));
        }
        jac.set_column(j, &((rp - rm) / (2.0 * h)));
    }
    Ok(jac)
}

/// Minimizes `0.5 |r(x)|^2` over the box. Deterministic for fixed inputs.
pub fn solve_bounded_lsq<F>(
    residual: F,
    bounds: &Bounds,
    init: &[f64],
    opts: &LsqOptions,
) -> Result<LsqSolution>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !bounds.contains(init) {
        return Err(Error::Invalid(format!("initial point {init:?} outside bounds")));
    }
    let n = init.len();
    let mut x = DVector::from_column_slice(init);
    let mut r = eval(&residual, &x)?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let m = r.len();
    let mut cost = half_sq(&r);
    let mut lambda = opts.initial_damping;
    let mut iterations = 0;
    let termination = loop {
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        if m == 0 {
            break Termination::Gradient;
        }
        iterations += 1;
        let jac = fd_jacobian(&residual, &x, m, opts.fd_relative_step)?;
        let grad = jac.transpose() * &r;
        let mut free = vec![true; n];
        for i in 0..n {
            let at_lower = x[i] <= bounds.lower[i] && grad[i] > 0.0;
            let at_upper = x[i] >= bounds.upper[i] && grad[i] < 0.0;
            free[i] = !(at_lower || at_upper);
        }
        let pg_norm = (0..n)
            .filter(|&i| free[i])
            .map(|i| grad[i].abs())
            .fold(0.0, f64::max);
        if pg_norm <= opts.gradient_tol {
            break Termination::Gradient;
        }
        let jtj = jac.transpose() * &jac;
        let mut accepted = false;
        let mut tiny_step = false;
        while lambda <= 1e16 {
            let mut a = jtj.clone();
            let mut b = -grad.clone();
            for i in 0..n {
                if free[i] {
                    a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
                } else {
                    a.row_mut(i).fill(0.0);
                    a.column_mut(i).fill(0.0);
                    a[(i, i)] = 1.0;
                    b[i] = 0.0;
                }
            }
            let Some(step) = a.lu().solve(&b) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = &x + &step;
            bounds.project(&mut trial);
            let moved = (&trial - &x).norm();
            if moved <= opts.step_tol * (1.0 + x.norm()) {
                tiny_step = true;
                break;
            }
            let r_trial = match eval(&residual, &trial) {
                Ok(v) if v.iter().all(|e| e.is_finite()) => v,
                _ => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let c_trial = half_sq(&r_trial);
            if c_trial < cost {
                x = trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if tiny_step {
            break Termination::Step;
        }
        if !accepted {
            break Termination::Stalled;
        }
    };
    Ok(LsqSolution {
        x: x.iter().copied().collect(),
        cost,
        iterations,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_interior() {
        let b = Bounds::scalar(0.0, 10.0).unwrap();
        let s = solve_bounded_lsq(|x| Ok(vec![x[0] - 3.0]), &b, &[0.0], &LsqOptions::default()).unwrap();
        assert_abs_diff_eq!(s.x[0], 3.0, epsilon = 1e-9);
        assert!(s.cost < 1e-18);
    }

    #[test]
    fn linear_active_bound() {
        let b = Bounds::scalar(0.0, 2.0).unwrap();
        let s = solve_bounded_lsq(|x| Ok(vec![x[0] - 3.0]), &b, &[0.0], &LsqOptions::default()).unwrap();
        assert_eq!(s.x[0], 2.0);
        assert_abs_diff_eq!(s.cost, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rosenbrock_with_bound() {
        let f = |x: &[f64]| Ok(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let free = Bounds::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let s = solve_bounded_lsq(f, &free, &[-1.2, 1.0], &LsqOptions::default()).unwrap();
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.x[1], 1.0, epsilon = 1e-6);
        // x1 capped at 0.5: optimum on the bound x1 = 0.5, x0 near sqrt(0.5)
        let capped = Bounds::new(vec![-2.0, -2.0], vec![2.0, 0.5]).unwrap();
        let s = solve_bounded_lsq(f, &capped, &[-1.2, 0.4], &LsqOptions::default()).unwrap();
        assert_eq!(s.x[1], 0.5);
        assert!(s.x[0] > 0.7 && s.x[0] < 0.72, "{:?}", s.x);
    }

    #[test]
    fn rejects_bad_init() {
        let b = Bounds::scalar(0.0, 1.0).unwrap();
        assert!(solve_bounded_lsq(|x| Ok(vec![x[0]]), &b, &[2.0], &LsqOptions::default()).is_err());
        assert!(matches!(
            solve_bounded_lsq(|_| Ok(vec![f64::NAN]), &b, &[0.5], &LsqOptions::default()),
            Err(Error::NonFinite)
        ));
        assert!(Bounds::scalar(1.0, 0.0).is_err());
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| Ok(vec![x[0].sin() - 0.3, x[0] * x[0] - 0.2]);
        let b = Bounds::scalar(-1.0, 1.0).unwrap();
        let a = solve_bounded_lsq(f, &b, &[0.9], &LsqOptions::default()).unwrap();
        let c = solve_bounded_lsq(f, &b, &[0.9], &LsqOptions::default()).unwrap();
        assert_eq!(a, c);
    }
}
