//! Image formation.
//!
//! For every camera pixel the engine forms the complex response
//! `F = sum_q_u p(q_u | q_d) T(r_q_u)`: the conditional-momentum average of the
//! object transmission. `|F|` is the visibility image of an absorptive object
//! and `Re F` the interference term of a phase object. Intensity frames follow
//! as `I = I0 (1 + Re[exp(i phi) F])`.
//!
//! In the object plane the conditional average is a Gaussian of 1/e
//! half-width `sigma_o` centered on the perfectly anti-correlated point
//! `-x_c / M`, so [`compute_response`] evaluates it as a separable quadrature
//! with exact (erf) cell weights. [`brute_force_response`] is the slow oracle
//! that sums the momentum-space kernel directly.

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::erf::erf;
use thiserror::Error;

use crate::grid::{CameraGrid, Grid, ScalarMap};
use crate::optics::{
    conditional_momentum_pdf, magnification, momentum_from_position, position_from_momentum, sigma_camera, sigma_object, MomentumVector,
    Plane, PlanePoint, SetupConfig,
};
use crate::scene::ObjectMask;

/// Kernel truncation in units of the object-plane 1/e half-width.
pub const KERNEL_REACH: f64 = 4.0;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("object mask does not cover the imaged region along {axis}: {margin:.3e} m uncovered")]
    InsufficientCoverage { axis: char, margin: f64 },
    #[error("momentum grid under-resolved: {0}")]
    UnderResolved(String),
    #[error("point separation must be finite and positive, got {0}")]
    BadSeparation(f64),
}

/// Per-pixel complex response on the camera grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexResponseMap {
    pub grid: CameraGrid,
    pub values: Vec<Complex64>,
}

impl ComplexResponseMap {
    pub fn new(grid: CameraGrid, values: Vec<Complex64>) -> Self {
        assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn uniform(grid: CameraGrid, value: Complex64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn get(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[self.grid.index(ix, iy)]
    }

    fn map(&self, f: impl Fn(&Complex64) -> f64) -> ScalarMap {
        ScalarMap::new(self.grid, self.values.iter().map(f).collect())
    }

    /// `|F|`, the visibility image.
    pub fn modulus(&self) -> ScalarMap {
        self.map(|v| v.norm())
    }

    pub fn argument(&self) -> ScalarMap {
        self.map(|v| v.arg())
    }

    pub fn real(&self) -> ScalarMap {
        self.map(|v| v.re)
    }
}

/// Exact cell weights of a normalized truncated Gaussian `exp(-(x-c)^2/s^2)`
/// over the cells of one grid axis. Returns the first cell index and weights.
fn axis_weights(centers_first: f64, pitch: f64, n: usize, c: f64, s: f64) -> (usize, Vec<f64>) {
    let reach = KERNEL_REACH * s;
    let lo_edge = centers_first - 0.5 * pitch;
    let first = (((c - reach) - lo_edge) / pitch).floor().max(0.0) as usize;
    let last = ((((c + reach) - lo_edge) / pitch).ceil() as usize).min(n);
    if first >= last {
        return (first.min(n), Vec::new());
    }
    let norm = erf(KERNEL_REACH);
    let cdf = |x: f64| erf((x.clamp(c - reach, c + reach) - c) / s);
    let mut prev = cdf(lo_edge + first as f64 * pitch);
    let w = (first..last)
        .map(|i| {
            let next = cdf(lo_edge + (i + 1) as f64 * pitch);
            let v = 0.5 * (next - prev) / norm;
            prev = next;
            v
        })
        .collect();
    (first, w)
}

fn check_coverage(axis: char, targets: (f64, f64), reach: f64, extent: (f64, f64)) -> Result<(), EngineError> {
    let lo = targets.0 - reach;
    let hi = targets.1 + reach;
    // tolerate rounding of the order of a picometre
    let tol = 1e-12;
    let margin = (extent.0 - lo).max(hi - extent.1);
    if margin > tol {
        return Err(EngineError::InsufficientCoverage { axis, margin });
    }
    Ok(())
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Complex response of `mask` seen through `setup` on the camera `grid`.
///
/// Pixel `(x_c, y_c)` averages the mask with a Gaussian of 1/e half-width
/// `sigma_object(setup)` centered on `(-x_c/M, -y_c/M)`, truncated at
/// [`KERNEL_REACH`] half-widths and renormalized. The mask must cover that
/// reach around every mapped pixel.
pub fn compute_response(mask: &ObjectMask, setup: &SetupConfig, grid: &CameraGrid) -> Result<ComplexResponseMap, EngineError> {
    let m = magnification(setup);
    let s = sigma_object(setup);
    let reach = KERNEL_REACH * s;
    let og = mask.grid();

    let us: Vec<f64> = grid.xs().iter().map(|&x| -x / m).collect();
    let vs: Vec<f64> = grid.ys().iter().map(|&y| -y / m).collect();
    check_coverage('x', min_max(&us), reach, og.x_extent())?;
    check_coverage('y', min_max(&vs), reach, og.y_extent())?;

    let wx: Vec<(usize, Vec<f64>)> = us.iter().map(|&u| axis_weights(og.x(0), og.pitch(), og.nx(), u, s)).collect();
    let wy: Vec<(usize, Vec<f64>)> = vs.iter().map(|&v| axis_weights(og.y(0), og.pitch(), og.ny(), v, s)).collect();

    let row_lo = wy.iter().map(|(f, _)| *f).min().unwrap_or(0);
    let row_hi = wy.iter().map(|(f, w)| f + w.len()).max().unwrap_or(0);
    let t = mask.complex_values();
    let onx = og.nx();

    // Pass 1: collapse x for every object row the camera can see.
    let partial: Vec<Vec<Complex64>> = (row_lo..row_hi)
        .into_par_iter()
        .map(|j| {
            let row = &t[j * onx..(j + 1) * onx];
            wx.iter()
                .map(|(first, w)| {
                    w.iter()
                        .zip(&row[*first..])
                        .fold(Complex64::new(0.0, 0.0), |acc, (&wi, &ti)| acc + ti * wi)
                })
                .collect()
        })
        .collect();

    // Pass 2: collapse y.
    let nx = grid.nx();
    let values: Vec<Complex64> = wy
        .par_iter()
        .flat_map_iter(|(first, w)| {
            let partial = &partial;
            (0..nx).map(move |cx| {
                w.iter()
                    .enumerate()
                    .fold(Complex64::new(0.0, 0.0), |acc, (k, &wk)| acc + partial[first + k - row_lo][cx] * wk)
            })
        })
        .collect();
    Ok(ComplexResponseMap::new(*grid, values))
}

/// Visibility image of two point objects `d` apart, evaluated analytically:
/// two camera-plane Gaussians of 1/e half-width `sigma_camera` at `+-M d/2`,
/// scaled so the continuous peak equals 1.
pub fn response_point_pair(d: f64, setup: &SetupConfig, grid: &CameraGrid) -> Result<ComplexResponseMap, EngineError> {
    if !(d.is_finite() && d > 0.0) {
        return Err(EngineError::BadSeparation(d));
    }
    let s = sigma_camera(setup);
    let a = 0.5 * magnification(setup) * d;
    let profile = |x: f64| (-((x - a) / s).powi(2)).exp() + (-((x + a) / s).powi(2)).exp();
    let peak = golden_max(profile, 0.0, a);
    let values = (0..grid.len())
        .map(|k| {
            let (x, y) = (grid.x(k % grid.nx()), grid.y(k / grid.nx()));
            Complex64::new(profile(x) * (-(y / s).powi(2)).exp() / peak, 0.0)
        })
        .collect();
    Ok(ComplexResponseMap::new(*grid, values))
}

/// Maximum of a function unimodal on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.abs().max(1e-30) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    f(lo).max(f(hi)).max(f1).max(f2)
}

/// Intensity frame `I0 (1 + Re[exp(i phi) F])`, clamped at zero.
pub fn intensity_frame(response: &ComplexResponseMap, phi: f64, i0: f64) -> ScalarMap {
    let rot = Complex64::from_polar(1.0, phi);
    let data = response.values.iter().map(|&f| (i0 * (1.0 + (rot * f).re)).max(0.0)).collect();
    ScalarMap::new(response.grid, data)
}

/// Momentum-space sampling for [`brute_force_response`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QGridSpec {
    /// Half-width of the `q_u` window around `-q_d`, in units of `1/w_p`.
    pub half_span: f64,
    /// Minimum number of `q_u` samples per axis across the window.
    pub samples_per_axis: usize,
}

impl Default for QGridSpec {
    fn default() -> Self {
        Self {
            half_span: 5.0,
            samples_per_axis: 64,
        }
    }
}

/// Direct evaluation of `sum_q_u p(q_u|q_d) T(r_q_u) / sum_q_u p(q_u|q_d)` for
/// every camera pixel.
///
/// The `q_u` lattice is laid out so that its far-field images are the centers
/// of an integer subdivision of the mask cells; each cell is subdivided just
/// enough to reach the requested sample count. The object is looked up cell by
/// cell, so no convolution or separability is used.
pub fn brute_force_response(
    mask: &ObjectMask,
    setup: &SetupConfig,
    grid: &CameraGrid,
    spec: QGridSpec,
) -> Result<ComplexResponseMap, EngineError> {
    if !(spec.half_span >= 5.0) {
        return Err(EngineError::UnderResolved(format!(
            "window +-{}/w_p is narrower than +-5/w_p",
            spec.half_span
        )));
    }
    if spec.samples_per_axis < 64 {
        return Err(EngineError::UnderResolved(format!(
            "{} samples per axis, need at least 64",
            spec.samples_per_axis
        )));
    }
    let og: &Grid = mask.grid();
    let w_p = setup.w_p();
    let half = spec.half_span / w_p;
    let to_q = |x: f64| {
        momentum_from_position(
            PlanePoint {
                x,
                y: 0.0,
                plane: Plane::Object,
            },
            setup,
        )
        .qx
    };
    let cell_dq = to_q(og.pitch());
    let sub = ((spec.samples_per_axis as f64 * cell_dq / (2.0 * half)).ceil() as usize).max(1);
    let dq = cell_dq / sub as f64;
    let (x_lo, _) = og.x_extent();
    let (y_lo, _) = og.y_extent();
    let qx0 = to_q(x_lo) + 0.5 * dq;
    let qy0 = to_q(y_lo) + 0.5 * dq;
    let nqx = og.nx() * sub;
    let nqy = og.ny() * sub;

    let lattice_range = |center: f64, q0: f64, n: usize, axis: char| -> Result<(usize, usize), EngineError> {
        let lo = ((center - half - q0) / dq).ceil();
        let hi = ((center + half - q0) / dq).floor();
        if lo < 0.0 || hi > (n - 1) as f64 {
            let over = (-lo).max(hi - (n - 1) as f64) * dq;
            let margin = position_from_momentum(MomentumVector::new(over, 0.0), Plane::Object, setup).x;
            return Err(EngineError::InsufficientCoverage { axis, margin });
        }
        Ok((lo as usize, hi as usize))
    };

    // Windows for every pixel are validated up front so the parallel sum is
    // infallible.
    let qd_of = |ix: usize, iy: usize| {
        momentum_from_position(
            PlanePoint {
                x: grid.x(ix),
                y: grid.y(iy),
                plane: Plane::Camera,
            },
            setup,
        )
    };
    let mut windows = Vec::with_capacity(grid.len());
    for iy in 0..grid.ny() {
        for ix in 0..grid.nx() {
            let qd = qd_of(ix, iy);
            let rx = lattice_range(-qd.qx, qx0, nqx, 'x')?;
            let ry = lattice_range(-qd.qy, qy0, nqy, 'y')?;
            windows.push((qd, rx, ry));
        }
    }

    let values = windows
        .par_iter()
        .map(|&(qd, (x0, x1), (y0, y1))| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut norm = 0.0;
            for ny in y0..=y1 {
                let qy = qy0 + ny as f64 * dq;
                for nx in x0..=x1 {
                    let qu = MomentumVector::new(qx0 + nx as f64 * dq, qy);
                    let p = conditional_momentum_pdf(qd, qu, setup);
                    let r = position_from_momentum(qu, Plane::Object, setup);
                    acc += mask.sample(r.x, r.y) * p;
                    norm += p;
                }
            }
            acc / norm
        })
        .collect();
    Ok(ComplexResponseMap::new(*grid, values))
}

/// Fraction of a 1-D normalized Gaussian `exp(-x^2/s^2)` lying beyond the
/// truncation reach on both sides.
pub fn truncated_tail_mass() -> f64 {
    1.0 - erf(KERNEL_REACH)
}
