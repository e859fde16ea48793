//! Edge-spread and point-spread fits on 1-D cross-sections.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::erf::{erf, erf_inv};

use super::lsq::{gauss_newton, LsqOptions};
use super::{AnalysisError, Profile};

/// Error-function fit `v(x) = a + b (1 - erf((x - c)/s)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EsfFit {
    pub sigma: f64,
    pub edge_position: f64,
    pub baseline: f64,
    pub plateau: f64,
    /// True when the profile rises with `x`.
    pub rising: bool,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Distance over which the fitted curve goes from 24% to 76% of its swing.
    pub transition_24_76: f64,
    pub sigma_stderr: f64,
    pub edge_stderr: f64,
}

impl EsfFit {
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = self.level_params();
        a + b * 0.5 * (1.0 - erf((x - self.edge_position) / self.sigma))
    }

    fn level_params(&self) -> (f64, f64) {
        // a is the level to the right, a + b the level to the left
        if self.rising {
            (self.plateau, self.baseline - self.plateau)
        } else {
            (self.baseline, self.plateau - self.baseline)
        }
    }
}

/// Half-distance, in units of `s`, between the 24% and 76% points of
/// `(1 - erf(z))/2`.
pub fn half_transition_24_76() -> f64 {
    erf_inv(0.52)
}

fn edge_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// First `x` at which `u` drops below `level`, linearly interpolated.
fn crossing(x: &[f64], u: &[f64], level: f64) -> Option<f64> {
    u.windows(2).zip(x.windows(2)).find_map(|(uw, xw)| {
        if uw[0] >= level && uw[1] < level {
            let t = (uw[0] - level) / (uw[0] - uw[1]);
            Some(xw[0] + t * (xw[1] - xw[0]))
        } else {
            None
        }
    })
}

/// Least-squares error-function fit to an edge profile (x increasing).
///
/// Initialization uses the end plateaus and the 24%/76% crossings; the fit is
/// Gauss-Newton with at most 100 iterations and a relative step tolerance of
/// `1e-9`.
pub fn fit_esf(profile: &Profile) -> Result<EsfFit, AnalysisError> {
    let n = profile.len();
    if n < 8 {
        return Err(AnalysisError::TooFewSamples(n));
    }
    let (x, v) = (&profile.x, &profile.v);
    let tail = (n / 10).max(3);
    let left = edge_mean(&v[..tail]);
    let right = edge_mean(&v[n - tail..]);
    let swing = (left - right).abs();
    let level = left.abs().max(right.abs());
    if !(swing >= 0.05 * level) || swing == 0.0 {
        return Err(AnalysisError::NoEdge { swing, plateau: level });
    }
    let a0 = right;
    let b0 = left - right;
    let u: Vec<f64> = v.iter().map(|&vi| (vi - a0) / b0).collect();
    let pitch = (x[n - 1] - x[0]) / (n - 1) as f64;
    let c0 = crossing(x, &u, 0.5).unwrap_or(0.5 * (x[0] + x[n - 1]));
    let s0 = match (crossing(x, &u, 0.76), crossing(x, &u, 0.24)) {
        (Some(hi), Some(lo)) if lo > hi => (lo - hi) / (2.0 * half_transition_24_76()),
        _ => pitch,
    }
    .max(pitch * 0.1);

    let span = x[n - 1] - x[0];
    let min_s = 1e-3 * pitch.abs().max(f64::MIN_POSITIVE);
    let res = gauss_newton(
        vec![a0, b0, c0, s0],
        n,
        |p, r, j| {
            let (a, b, c, s) = (p[0], p[1], p[2], p[3]);
            for i in 0..n {
                let z = (x[i] - c) / s;
                let g = (-z * z).exp() / (PI.sqrt() * s);
                let e = 0.5 * (1.0 - erf(z));
                r[i] = a + b * e - v[i];
                j[(i, 0)] = 1.0;
                j[(i, 1)] = e;
                j[(i, 2)] = b * g;
                j[(i, 3)] = b * z * g;
            }
        },
        |p| p[3] = p[3].max(min_s),
        &[level.max(1e-300), level.max(1e-300), span, s0],
        LsqOptions::default(),
    );
    let [a, b, c, s] = [res.params[0], res.params[1], res.params[2], res.params[3]];
    if !res.converged {
        return Err(AnalysisError::NotConverged {
            iterations: res.iterations,
            last: res.params,
        });
    }
    let (lo, hi) = if b >= 0.0 { (a, a + b) } else { (a + b, a) };
    let se = res.std_errors.unwrap_or_else(|| vec![f64::NAN; 4]);
    Ok(EsfFit {
        sigma: s,
        edge_position: c,
        baseline: lo,
        plateau: hi,
        rising: b < 0.0,
        residual_rms: res.residual_rms,
        converged: true,
        iterations: res.iterations,
        transition_24_76: 2.0 * half_transition_24_76() * s,
        sigma_stderr: se[3],
        edge_stderr: se[2],
    })
}

/// Gaussian fit `A exp(-(x - c)^2 / w^2)`; `width` is the 1/e half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub residual_rms: f64,
}

pub fn fit_gaussian(profile: &Profile) -> Result<GaussianFit, AnalysisError> {
    let n = profile.len();
    if n < 5 {
        return Err(AnalysisError::TooFewSamples(n));
    }
    let (x, v) = (&profile.x, &profile.v);
    let (imax, &vmax) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(AnalysisError::TooFewSamples(0))?;
    if !(vmax > 0.0) {
        return Err(AnalysisError::NoPeak);
    }
    let above = v.iter().filter(|&&vi| vi >= 0.5 * vmax).count();
    let pitch = (x[n - 1] - x[0]) / (n - 1) as f64;
    // FWHM = 2 w sqrt(ln 2)
    let w0 = (above as f64 * pitch / (2.0 * 2f64.ln().sqrt())).max(pitch);
    let res = gauss_newton(
        vec![vmax, x[imax], w0],
        n,
        |p, r, j| {
            for i in 0..n {
                let z = (x[i] - p[1]) / p[2];
                let e = (-z * z).exp();
                r[i] = p[0] * e - v[i];
                j[(i, 0)] = e;
                j[(i, 1)] = p[0] * e * 2.0 * z / p[2];
                j[(i, 2)] = p[0] * e * 2.0 * z * z / p[2];
            }
        },
        |p| p[2] = p[2].max(1e-3 * pitch),
        &[vmax, x[n - 1] - x[0], w0],
        LsqOptions::default(),
    );
    if !res.converged {
        return Err(AnalysisError::NotConverged {
            iterations: res.iterations,
            last: res.params,
        });
    }
    Ok(GaussianFit {
        amplitude: res.params[0],
        center: res.params[1],
        width: res.params[2],
        residual_rms: res.residual_rms,
    })
}
