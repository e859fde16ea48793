//! Small dense Gauss-Newton solver with step halving.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LsqOptions {
    pub max_iterations: usize,
    /// Converged when every `|step_i| / (|p_i| + scale_i)` is below this.
    pub rel_step_tol: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            rel_step_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LsqResult {
    pub params: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual_rms: f64,
    /// Standard errors from `s^2 (J^T J)^-1`, when the problem is over-determined.
    pub std_errors: Option<Vec<f64>>,
}

/// Minimize `sum r_i(p)^2`.
///
/// `model(p, r, jac)` fills the residual vector and the Jacobian (rows =
/// residuals). `project` clamps a trial point into the feasible box. `scales`
/// gives the magnitude below which a parameter is compared absolutely.
pub fn gauss_newton<M, P>(mut params: Vec<f64>, m: usize, mut model: M, project: P, scales: &[f64], opts: LsqOptions) -> LsqResult
where
    M: FnMut(&[f64], &mut DVector<f64>, &mut DMatrix<f64>),
    P: Fn(&mut [f64]),
{
    let n = params.len();
    let mut r = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, n);
    let mut trial_r = DVector::zeros(m);
    let mut scratch = DMatrix::zeros(m, n);
    project(&mut params);
    model(&params, &mut r, &mut jac);
    let mut cost = r.norm_squared();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let jt = jac.transpose();
        let mut normal = &jt * &jac;
        let grad = &jt * &r;
        let step = match normal.clone().cholesky() {
            Some(ch) => ch.solve(&(-&grad)),
            None => {
                // Rank-deficient: fall back to a lightly damped system.
                let damp = 1e-12 * normal.diagonal().max().max(f64::MIN_POSITIVE);
                for i in 0..n {
                    normal[(i, i)] += damp;
                }
                match normal.cholesky() {
                    Some(ch) => ch.solve(&(-&grad)),
                    None => break,
                }
            }
        };

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + t * s).collect();
            project(&mut trial);
            model(&trial, &mut trial_r, &mut scratch);
            let c = trial_r.norm_squared();
            if c.is_finite() && c <= cost {
                accepted = Some((trial, c));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, c)) = accepted else {
            // No descent possible within rounding: at the minimum.
            converged = true;
            break;
        };
        let rel = trial
            .iter()
            .zip(&params)
            .zip(scales)
            .map(|((a, b), s)| (a - b).abs() / (b.abs() + s))
            .fold(0.0, f64::max);
        params = trial;
        cost = c;
        model(&params, &mut r, &mut jac);
        if rel < opts.rel_step_tol {
            converged = true;
            break;
        }
    }

    let residual_rms = (cost / m as f64).sqrt();
    let std_errors = (m > n)
        .then(|| {
            let normal = jac.transpose() * &jac;
            normal.try_inverse().map(|inv| {
                let s2 = cost / (m - n) as f64;
                (0..n).map(|i| (s2 * inv[(i, i)]).max(0.0).sqrt()).collect()
            })
        })
        .flatten();
    LsqResult {
        params,
        iterations,
        converged,
        residual_rms,
        std_errors,
    }
}
