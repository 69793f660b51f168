//! Damped least squares (Levenberg–Marquardt with Marquardt scaling).

use nalgebra::{DMatrix, DVector};

/// Relative and absolute step tolerance on every parameter.
pub const PARAM_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200;

/// A residual vector r(p); the fit minimizes ½‖r‖².
pub trait Residuals {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut [f64]);

    /// Typical magnitude of each parameter, used to size finite-difference
    /// steps when a parameter sits near zero.
    fn scales(&self) -> Vec<f64> {
        vec![1.0; self.n_params()]
    }

    /// Jacobian ∂r_i/∂p_j. Central differences unless overridden.
    fn jacobian(&self, params: &[f64], jac: &mut DMatrix<f64>) {
        let scales = self.scales();
        let m = self.n_residuals();
        let mut p = params.to_vec();
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        for j in 0..params.len() {
            let h = 1e-7 * params[j].abs().max(scales[j]);
            p[j] = params[j] + h;
            self.residuals(&p, &mut plus);
            p[j] = params[j] - h;
            self.residuals(&p, &mut minus);
            p[j] = params[j];
            for i in 0..m {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: MAX_ITERATIONS,
            tolerance: PARAM_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// ½‖r‖² at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// (JᵀJ)⁻¹ scaled by the residual variance 2·cost/(m − n).
    pub covariance: DMatrix<f64>,
}

impl LmOutcome {
    pub fn sigmas(&self) -> Vec<f64> {
        (0..self.params.len())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect()
    }
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

pub fn minimize<R: Residuals + ?Sized>(
    problem: &R,
    initial: &[f64],
    options: LmOptions,
) -> LmOutcome {
    let n = problem.n_params();
    let m = problem.n_residuals();
    assert_eq!(initial.len(), n, "initial parameter count");

    let mut p = initial.to_vec();
    let mut r = vec![0.0; m];
    problem.residuals(&p, &mut r);
    let mut cost = cost_of(&r);
    let mut jac = DMatrix::zeros(m, n);
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];
    let mut lambda = -1.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        problem.jacobian(&p, &mut jac);
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        // Floor the scaling so a direction the data cannot see still gets damped.
        let top = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
        let diag: Vec<f64> = (0..n)
            .map(|i| a[(i, i)].max(1e-12 * top).max(1e-300))
            .collect();
        if lambda < 0.0 {
            lambda = 1e-3;
        }
        if cost == 0.0 || g.amax() == 0.0 {
            converged = true;
            break;
        }

        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * diag[i];
            }
            let step = match damped.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => match damped.lu().solve(&(-&g)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                },
            };
            for i in 0..n {
                trial[i] = p[i] + step[i];
            }
            problem.residuals(&trial, &mut r_trial);
            let trial_cost = cost_of(&r_trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let small_step = (0..n)
                    .all(|i| step[i].abs() <= options.tolerance * (p[i].abs() + options.tolerance));
                let stalled = cost - trial_cost <= 1e-15 * cost;
                p.copy_from_slice(&trial);
                r.copy_from_slice(&r_trial);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if small_step || stalled {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: p is a minimum to rounding.
            converged = true;
        }
        if converged {
            break;
        }
    }

    problem.jacobian(&p, &mut jac);
    let normal = jac.transpose() * &jac;
    let inverse = normal
        .clone()
        .try_inverse()
        .or_else(|| normal.pseudo_inverse(1e-14).ok())
        .unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let variance = if m > n {
        2.0 * cost / (m - n) as f64
    } else {
        0.0
    };
    LmOutcome {
        params: p,
        cost,
        iterations,
        converged,
        covariance: inverse * variance,
    }
}
