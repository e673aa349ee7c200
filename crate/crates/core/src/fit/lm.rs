//! Box-constrained damped least squares (Levenberg-Marquardt) with a
//! central-difference Jacobian.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub(crate) struct LmOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub tolerance: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct LmOutcome {
    pub x: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after the initial evaluation and after every accepted step.
    pub history: Vec<f64>,
    /// J^T J at the returned point.
    pub jtj: DMatrix<f64>,
}

pub(crate) struct Problem<'a> {
    pub residuals: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    /// Characteristic size of each parameter; sets the difference step.
    pub scale: &'a [f64],
}

fn sse(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn jacobian(problem: &Problem<'_>, x: &[f64], m: usize) -> DMatrix<f64> {
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = 1e-6 * problem.scale[j].abs().max(x[j].abs()).max(1e-12);
        probe[j] = x[j] + h;
        let plus = (problem.residuals)(&probe);
        probe[j] = x[j] - h;
        let minus = (problem.residuals)(&probe);
        probe[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

pub(crate) fn minimize(problem: &Problem<'_>, x0: &[f64], opts: LmOptions) -> LmOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp(&mut x, problem.lower, problem.upper);
    let mut r = (problem.residuals)(&x);
    let m = r.len();
    let mut cost = sse(&r);
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = jacobian(problem, &x, m);

    while iterations < opts.max_iterations {
        iterations += 1;
        if cost <= f64::MIN_POSITIVE {
            converged = true;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);
        let mut accepted = false;
        // Raise the damping until a step lowers the cost.
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut trial, problem.lower, problem.upper);
            let r_trial = (problem.residuals)(&trial);
            let trial_cost = sse(&r_trial);
            if trial_cost.is_finite() && trial_cost < cost {
                let gain = (cost - trial_cost) / cost;
                x = trial;
                r = r_trial;
                cost = trial_cost;
                history.push(cost);
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if gain < opts.tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No descent direction left at machine precision: a stationary point.
            converged = true;
            break;
        }
        jac = jacobian(problem, &x, m);
        if converged {
            break;
        }
    }
    let jtj = jac.transpose() * &jac;
    LmOutcome {
        x,
        sse: cost,
        iterations,
        converged,
        history,
        jtj,
    }
}
