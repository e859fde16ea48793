//! Object mask to reconstructed image, plus the sampling choices used by the
//! resolution studies.

use serde::Serialize;

use crate::acquisition::{reconstruct, synthesize_stack, FrameStack, NoiseModel, ReconstructedImage, DEFAULT_PHASE_STEPS};
use crate::engine::{compute_response, ComplexResponseMap, KERNEL_REACH};
use crate::grid::{CameraGrid, Grid};
use crate::optics::{magnification, sigma_camera, sigma_object, SetupConfig};
use crate::scene::ObjectMask;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcquisitionSpec {
    pub n_phases: usize,
    pub noise: NoiseModel,
    pub seed: u64,
    pub i0: f64,
}

impl Default for AcquisitionSpec {
    fn default() -> Self {
        Self {
            n_phases: DEFAULT_PHASE_STEPS,
            noise: NoiseModel::None,
            seed: 0,
            i0: 1.0,
        }
    }
}

impl AcquisitionSpec {
    /// Same acquisition with an independent noise stream for job `index`.
    pub fn for_job(&self, index: usize) -> Self {
        let seed = self.seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        Self { seed, ..*self }
    }
}

/// Grid resolution relative to the physical blur widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sampling {
    /// Camera pixels per camera-plane `sigma`.
    pub camera_per_sigma: f64,
    /// Minimum object cells per object-plane `sigma / M`.
    pub object_per_sigma: f64,
    /// Camera rows for 1-D cross-section studies (odd).
    pub profile_rows: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            camera_per_sigma: 16.0,
            object_per_sigma: 8.0,
            profile_rows: 3,
        }
    }
}

impl Sampling {
    pub fn camera_pitch(&self, setup: &SetupConfig) -> f64 {
        sigma_camera(setup) / self.camera_per_sigma
    }

    /// Object pitch `feature / k` with `k` even, fine enough for the kernel.
    /// Edges at multiples of `feature / 2` then sit on cell boundaries of a
    /// centered even grid.
    pub fn object_pitch_for(&self, setup: &SetupConfig, feature: f64) -> f64 {
        let k = (self.object_per_sigma * feature / sigma_object(setup)).ceil().max(2.0) as usize;
        feature / (k + k % 2) as f64
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub response: ComplexResponseMap,
    pub stack: FrameStack,
    pub image: ReconstructedImage,
}

/// Engine, phase-stepped acquisition and per-pixel reconstruction.
pub fn run(mask: &ObjectMask, setup: &SetupConfig, camera: &CameraGrid, acq: &AcquisitionSpec) -> Result<PipelineOutput, Error> {
    acquire(compute_response(mask, setup, camera)?, acq)
}

/// Phase-stepped acquisition and reconstruction of a given response.
pub fn acquire(response: ComplexResponseMap, acq: &AcquisitionSpec) -> Result<PipelineOutput, Error> {
    let stack = synthesize_stack(&response, acq.n_phases, acq.noise, acq.seed, acq.i0)?;
    let image = reconstruct(&stack)?;
    Ok(PipelineOutput { response, stack, image })
}

fn even_cells(half: f64, pitch: f64) -> usize {
    2 * ((half / pitch - 1e-9).ceil().max(1.0) as usize)
}

/// Centered object grid with an even cell count, so cell boundaries sit at
/// integer multiples of `pitch`. It covers the kernel reach around the image
/// of every camera pixel and at least `min_half` around the axis.
pub fn covering_object_grid(camera: &CameraGrid, setup: &SetupConfig, pitch: f64, min_half: (f64, f64)) -> Result<Grid, Error> {
    let m = magnification(setup);
    let reach = KERNEL_REACH * sigma_object(setup);
    let (x0, x1) = (camera.x(0), camera.x(camera.nx() - 1));
    let (y0, y1) = (camera.y(0), camera.y(camera.ny() - 1));
    let hx = (x0.abs().max(x1.abs()) / m + reach).max(min_half.0);
    let hy = (y0.abs().max(y1.abs()) / m + reach).max(min_half.1);
    Ok(Grid::centered(pitch, even_cells(hx, pitch), even_cells(hy, pitch))?)
}

/// Centered camera strip of odd width covering `+-half_width`.
pub fn profile_camera(half_width: f64, pitch: f64, rows: usize) -> Result<CameraGrid, Error> {
    let nx = 2 * (half_width / pitch).ceil() as usize + 1;
    let rows = rows.max(1) | 1;
    Ok(Grid::centered(pitch, nx, rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn object_pitch_divides_feature_evenly() {
        let s = Sampling::default();
        let setup = SetupConfig::setup1(148e-6).unwrap();
        for w in [50e-6, 250e-6, 1e-3] {
            let p = s.object_pitch_for(&setup, w);
            let k = (w / p).round();
            assert!((w / p - k).abs() < 1e-9 && (k as usize).is_multiple_of(2));
            assert!(p <= sigma_object(&setup) / 8.0 + 1e-15);
        }
    }

    #[test]
    fn covering_grid_boundaries_on_pitch_multiples() {
        let setup = SetupConfig::setup2(201e-6).unwrap();
        let cam = profile_camera(300e-6, 5e-6, 3).unwrap();
        let g = covering_object_grid(&cam, &setup, 2e-6, (0.0, 500e-6)).unwrap();
        assert_eq!(g.nx() % 2, 0);
        let (lo, _) = g.x_extent();
        assert!((lo / 2e-6 - (lo / 2e-6).round()).abs() < 1e-9);
        assert!(g.y_extent().1 >= 500e-6);
        assert!(compute_response(&ObjectMask::uniform(g, 1.0, 0.0).unwrap(), &setup, &cam).is_ok());
    }

    #[test]
    fn job_seeds_differ() {
        let a = AcquisitionSpec::default();
        assert_ne!(a.for_job(0).seed, a.for_job(1).seed);
        assert_eq!(a.for_job(3), a.for_job(3));
    }
}
