//! Phase-stepped acquisition and per-pixel sinusoid reconstruction.
//!
//! A stack holds one intensity frame per interferometer phase. Every pixel is
//! then fit with `A + B cos(phi + theta)` by linear least squares in the basis
//! `{1, cos phi, sin phi}`; the visibility is `B / A` and the image phase is
//! `theta`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{intensity_frame, ComplexResponseMap};
use crate::grid::{Grid, ScalarMap};
use crate::scene::wrap_phase;

pub const DEFAULT_PHASE_STEPS: usize = 49;

#[derive(Debug, Error, PartialEq)]
pub enum AcquisitionError {
    #[error("need at least 3 phase steps, got {0}")]
    TooFewPhases(usize),
    #[error("{samples} samples for {phases} phases")]
    LengthMismatch { samples: usize, phases: usize },
    #[error("phase set is degenerate; normal equations are singular")]
    SingularPhases,
    #[error("invalid frame stack: {0}")]
    InvalidStack(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub enum NoiseModel {
    #[default]
    None,
    /// Shot noise; `mean_counts` is the expected count of a pixel at `I = I0`.
    Poisson { mean_counts: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    frames: Vec<ScalarMap>,
    phases: Vec<f64>,
    noise: NoiseModel,
    seed: u64,
}

impl FrameStack {
    pub fn new(frames: Vec<ScalarMap>, phases: Vec<f64>, noise: NoiseModel, seed: u64) -> Result<Self, AcquisitionError> {
        if phases.len() < 3 {
            return Err(AcquisitionError::TooFewPhases(phases.len()));
        }
        if frames.len() != phases.len() {
            return Err(AcquisitionError::LengthMismatch {
                samples: frames.len(),
                phases: phases.len(),
            });
        }
        let grid = frames[0].grid;
        if frames.iter().any(|f| f.grid != grid) {
            return Err(AcquisitionError::InvalidStack("frames on different grids".into()));
        }
        if frames.iter().flat_map(|f| &f.data).any(|&v| !(v >= 0.0)) {
            return Err(AcquisitionError::InvalidStack("negative or non-finite intensity".into()));
        }
        for (i, a) in phases.iter().enumerate() {
            for b in &phases[i + 1..] {
                if wrap_phase(a - b).abs() < 1e-12 {
                    return Err(AcquisitionError::InvalidStack(format!("phases {a} and {b} coincide modulo 2 pi")));
                }
            }
        }
        Ok(Self {
            frames,
            phases,
            noise,
            seed,
        })
    }

    pub fn frames(&self) -> &[ScalarMap] {
        &self.frames
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grid(&self) -> Grid {
        self.frames[0].grid
    }
}

/// `n` phases uniformly spaced over `[0, 2 pi)`.
pub fn uniform_phases(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

/// SplitMix64 finalizer, used to key independent RNG streams.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn substream_seed(seed: u64, frame: usize, pixel: usize) -> u64 {
    mix(mix(mix(seed) ^ frame as u64) ^ pixel as u64)
}

fn poisson_draw(mean: f64, seed: u64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // mean > 0 and finite, so construction cannot fail
    Poisson::new(mean).map(|d| d.sample(&mut rng)).unwrap_or(0.0)
}

/// Render `n_phases` uniformly stepped frames of `response` at flat level
/// `i0`. With Poisson noise every pixel of every frame is an independent draw
/// whose stream depends only on `(seed, frame, pixel)`.
pub fn synthesize_stack(
    response: &ComplexResponseMap,
    n_phases: usize,
    noise: NoiseModel,
    seed: u64,
    i0: f64,
) -> Result<FrameStack, AcquisitionError> {
    if n_phases < 3 {
        return Err(AcquisitionError::TooFewPhases(n_phases));
    }
    let phases = uniform_phases(n_phases);
    let frames = phases
        .iter()
        .enumerate()
        .map(|(k, &phi)| {
            let clean = intensity_frame(response, phi, i0);
            match noise {
                NoiseModel::None => clean,
                NoiseModel::Poisson { mean_counts } => {
                    let scale = mean_counts / i0;
                    let data = clean
                        .data
                        .par_iter()
                        .enumerate()
                        .map(|(p, &v)| poisson_draw(v * scale, substream_seed(seed, k, p)) / scale)
                        .collect();
                    ScalarMap::new(clean.grid, data)
                }
            }
        })
        .collect();
    FrameStack::new(frames, phases, noise, seed)
}

/// Least-squares fit `A + B cos(phi + theta)` of one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub residual_rms: f64,
}

impl SinusoidFit {
    pub fn eval(&self, phi: f64) -> f64 {
        self.offset + self.amplitude * (phi + self.phase).cos()
    }
}

/// Precomputed solver for a fixed phase set.
#[derive(Debug, Clone)]
pub struct SinusoidFitter {
    basis: Vec<[f64; 3]>,
    inverse: Matrix3<f64>,
}

impl SinusoidFitter {
    pub fn new(phases: &[f64]) -> Result<Self, AcquisitionError> {
        if phases.len() < 3 {
            return Err(AcquisitionError::TooFewPhases(phases.len()));
        }
        let basis: Vec<[f64; 3]> = phases.iter().map(|&p| [1.0, p.cos(), p.sin()]).collect();
        let mut normal = Matrix3::zeros();
        for b in &basis {
            for i in 0..3 {
                for j in 0..3 {
                    normal[(i, j)] += b[i] * b[j];
                }
            }
        }
        // Relative conditioning guard: a degenerate phase set makes the
        // smallest eigenvalue vanish compared to the largest.
        let eig = normal.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > 1e-10 * hi) {
            return Err(AcquisitionError::SingularPhases);
        }
        let inverse = normal.try_inverse().ok_or(AcquisitionError::SingularPhases)?;
        Ok(Self { basis, inverse })
    }

    pub fn fit(&self, samples: &[f64]) -> Result<SinusoidFit, AcquisitionError> {
        if samples.len() != self.basis.len() {
            return Err(AcquisitionError::LengthMismatch {
                samples: samples.len(),
                phases: self.basis.len(),
            });
        }
        let mut rhs = Vector3::zeros();
        for (b, &s) in self.basis.iter().zip(samples) {
            rhs[0] += b[0] * s;
            rhs[1] += b[1] * s;
            rhs[2] += b[2] * s;
        }
        let c = self.inverse * rhs;
        // A + c1 cos(phi) + c2 sin(phi) = A + B cos(phi + theta)
        let amplitude = c[1].hypot(c[2]);
        let phase = wrap_phase((-c[2]).atan2(c[1]));
        let ss: f64 = self
            .basis
            .iter()
            .zip(samples)
            .map(|(b, &s)| {
                let r = s - (c[0] + c[1] * b[1] + c[2] * b[2]);
                r * r
            })
            .sum();
        Ok(SinusoidFit {
            offset: c[0],
            amplitude,
            phase,
            residual_rms: (ss / samples.len() as f64).sqrt(),
        })
    }
}

pub fn fit_pixel_sinusoid(samples: &[f64], phases: &[f64]) -> Result<SinusoidFit, AcquisitionError> {
    if samples.len() != phases.len() {
        return Err(AcquisitionError::LengthMismatch {
            samples: samples.len(),
            phases: phases.len(),
        });
    }
    SinusoidFitter::new(phases)?.fit(samples)
}

/// Per-pixel reconstruction of a stack.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedImage {
    pub grid: Grid,
    pub offset: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    /// `B / A`; zero where `valid` is false.
    pub visibility: Vec<f64>,
    /// False where the fitted offset is too small for a meaningful ratio.
    pub valid: Vec<bool>,
    pub residual_rms: Vec<f64>,
}

/// Offsets at or below this are treated as no signal.
pub const MIN_OFFSET: f64 = 10.0 * f64::EPSILON;

impl ReconstructedImage {
    pub fn visibility_map(&self) -> ScalarMap {
        ScalarMap::new(self.grid, self.visibility.clone())
    }

    pub fn phase_map(&self) -> ScalarMap {
        ScalarMap::new(self.grid, self.phase.clone())
    }

    /// The fitted sinusoid evaluated at interferometer phase `phi`.
    pub fn intensity_at(&self, phi: f64) -> ScalarMap {
        let data = (0..self.grid.len())
            .map(|k| self.offset[k] + self.amplitude[k] * (phi + self.phase[k]).cos())
            .collect();
        ScalarMap::new(self.grid, data)
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

pub fn reconstruct(stack: &FrameStack) -> Result<ReconstructedImage, AcquisitionError> {
    let fitter = SinusoidFitter::new(stack.phases())?;
    let grid = stack.grid();
    let fits: Vec<SinusoidFit> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let samples: Vec<f64> = stack.frames().iter().map(|f| f.data[p]).collect();
            fitter.fit(&samples)
        })
        .collect::<Result<_, _>>()?;
    let valid: Vec<bool> = fits.iter().map(|f| f.offset > MIN_OFFSET).collect();
    Ok(ReconstructedImage {
        grid,
        offset: fits.iter().map(|f| f.offset).collect(),
        amplitude: fits.iter().map(|f| f.amplitude).collect(),
        phase: fits.iter().map(|f| f.phase).collect(),
        visibility: fits
            .iter()
            .zip(&valid)
            .map(|(f, &ok)| if ok { f.amplitude / f.offset } else { 0.0 })
            .collect(),
        valid,
        residual_rms: fits.iter().map(|f| f.residual_rms).collect(),
    })
}
