//! Full-pipeline resolution studies: knife and phase edges, point and bar
//! pairs, line-width sweeps and magnification.

use rayon::prelude::*;
use serde::Serialize;

use super::{fit_esf, two_slit_metrics, AnalysisError, EsfFit, Profile, TwoSlitMetrics};
use crate::acquisition::ReconstructedImage;
use crate::engine::response_point_pair;
use crate::grid::{CameraGrid, Grid};
use crate::optics::{magnification, sigma_camera, sigma_object, SetupConfig};
use crate::pipeline::{self, covering_object_grid, profile_camera, AcquisitionSpec, PipelineOutput, Sampling};
use crate::scene::{
    make_bar_pair, make_knife_edge, make_phase_edge, make_rectangle, make_usaf_triplet, usaf_line_width, wrap_phase, BarOrientation,
    UsafTriplet,
};
use crate::Error;

/// Pipeline output together with the cross-section that was analysed.
#[derive(Debug, Clone)]
pub struct ProfileStudy {
    pub output: PipelineOutput,
    pub profile: Profile,
}

/// Camera strip of `+-half` along x, or its transpose.
fn strip(half: f64, pitch: f64, rows: usize, orientation: BarOrientation) -> Result<CameraGrid, Error> {
    let g = profile_camera(half, pitch, rows)?;
    match orientation {
        BarOrientation::Vertical => Ok(g),
        BarOrientation::Horizontal => Ok(Grid::centered(pitch, g.ny(), g.nx())?),
    }
}

/// Visibility profile across the bars.
pub(crate) fn cross_section(image: &ReconstructedImage, orientation: BarOrientation) -> Profile {
    let v = image.visibility_map();
    match orientation {
        BarOrientation::Vertical => Profile::center_row(&v),
        BarOrientation::Horizontal => Profile::center_column(&v),
    }
}

/// Knife edge at the object origin; cross-section of the visibility image.
pub fn knife_edge_study(setup: &SetupConfig, sampling: &Sampling, acq: &AcquisitionSpec) -> Result<ProfileStudy, Error> {
    let camera = profile_camera(6.0 * sigma_camera(setup), sampling.camera_pitch(setup), sampling.profile_rows)?;
    let pitch = sampling.object_pitch_for(setup, sigma_object(setup));
    let grid = covering_object_grid(&camera, setup, pitch, (0.0, 0.0))?;
    let output = pipeline::run(&make_knife_edge(0.0, &grid)?, setup, &camera, acq)?;
    let profile = cross_section(&output.image, BarOrientation::Vertical);
    Ok(ProfileStudy { output, profile })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EsfSweepRow {
    pub w_p: f64,
    pub sigma: f64,
    pub sigma_stderr: f64,
    pub sigma_over_m: f64,
    pub sigma_theory: f64,
    pub sigma_over_m_theory: f64,
    pub magnification: f64,
}

/// Knife-edge ESF width for each pump waist, with the closed-form widths
/// alongside. Points run in parallel; each uses its own noise stream.
pub fn esf_sigma_sweep(
    setup: &SetupConfig,
    w_p_list: &[f64],
    sampling: &Sampling,
    acq: &AcquisitionSpec,
) -> Result<Vec<EsfSweepRow>, Error> {
    w_p_list
        .par_iter()
        .enumerate()
        .map(|(i, &w_p)| {
            let s = setup.with_pump_waist(w_p)?;
            let study = knife_edge_study(&s, sampling, &acq.for_job(i))?;
            let fit = fit_esf(&study.profile)?;
            let m = magnification(&s);
            Ok(EsfSweepRow {
                w_p,
                sigma: fit.sigma,
                sigma_stderr: fit.sigma_stderr,
                sigma_over_m: fit.sigma / m,
                sigma_theory: sigma_camera(&s),
                sigma_over_m_theory: sigma_object(&s),
                magnification: m,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseEdgeResult {
    pub fit: EsfFit,
    /// Reconstructed phase difference between the two sides, far from the edge.
    pub phase_step: f64,
}

fn circular_mean(angles: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = angles.fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    s.atan2(c)
}

/// Phase edge of height `delta` at the object origin. The ESF is fitted to
/// the constructive-interference intensity `A + B cos(theta)`.
pub fn phase_edge_sigma(
    setup: &SetupConfig,
    delta: f64,
    sampling: &Sampling,
    acq: &AcquisitionSpec,
) -> Result<(ProfileStudy, PhaseEdgeResult), Error> {
    let sigma = sigma_camera(setup);
    let camera = profile_camera(6.0 * sigma, sampling.camera_pitch(setup), sampling.profile_rows)?;
    let pitch = sampling.object_pitch_for(setup, sigma_object(setup));
    let grid = covering_object_grid(&camera, setup, pitch, (0.0, 0.0))?;
    let output = pipeline::run(&make_phase_edge(0.0, delta, &grid)?, setup, &camera, acq)?;
    let intensity = output.image.intensity_at(0.0);
    let iy = camera.ny() / 2;
    let profile = Profile::row(&intensity, iy);
    let fit = fit_esf(&profile)?;

    let phases = output.image.phase_map();
    let row = phases.row(iy);
    let side = |keep: &dyn Fn(f64) -> bool| circular_mean(camera.xs().into_iter().zip(row).filter(|(x, _)| keep(*x)).map(|(_, &p)| p));
    let left = side(&|x| x < -4.0 * sigma);
    let right = side(&|x| x > 4.0 * sigma);
    let phase_step = wrap_phase(left - right).abs();
    Ok((ProfileStudy { output, profile }, PhaseEdgeResult { fit, phase_step }))
}

/// Two point objects `d` apart through acquisition and reconstruction.
pub fn point_pair_study(
    d: f64,
    setup: &SetupConfig,
    sampling: &Sampling,
    acq: &AcquisitionSpec,
) -> Result<(ProfileStudy, TwoSlitMetrics), Error> {
    let half = 0.5 * magnification(setup) * d + 5.0 * sigma_camera(setup);
    let camera = profile_camera(half, sampling.camera_pitch(setup), sampling.profile_rows)?;
    let output = pipeline::acquire(response_point_pair(d, setup, &camera)?, acq)?;
    let profile = cross_section(&output.image, BarOrientation::Vertical);
    let metrics = two_slit_metrics(&profile)?;
    Ok((ProfileStudy { output, profile }, metrics))
}

/// Bars of width `w`, centered at `centers`, through the pipeline, analysed
/// across the bars through their middle.
fn bar_study(
    w: f64,
    centers_extent: f64,
    orientation: BarOrientation,
    setup: &SetupConfig,
    sampling: &Sampling,
    acq: &AcquisitionSpec,
    build: impl Fn(&Grid) -> Result<crate::scene::ObjectMask, crate::scene::SceneError>,
) -> Result<(ProfileStudy, TwoSlitMetrics), Error> {
    let half = magnification(setup) * (centers_extent + 0.5 * w) + 5.0 * sigma_camera(setup);
    let camera = strip(half, sampling.camera_pitch(setup), sampling.profile_rows, orientation)?;
    let pitch = sampling.object_pitch_for(setup, w);
    let across = centers_extent + 0.5 * w;
    let min_half = match orientation {
        BarOrientation::Vertical => (across, 2.5 * w),
        BarOrientation::Horizontal => (2.5 * w, across),
    };
    let grid = covering_object_grid(&camera, setup, pitch, min_half)?;
    let output = pipeline::run(&build(&grid)?, setup, &camera, acq)?;
    let profile = cross_section(&output.image, orientation);
    let metrics = two_slit_metrics(&profile)?;
    Ok((ProfileStudy { output, profile }, metrics))
}

/// Two vertical bars of width `w` separated by a gap `w`.
pub fn bar_pair_metrics(w: f64, setup: &SetupConfig, sampling: &Sampling, acq: &AcquisitionSpec) -> Result<TwoSlitMetrics, Error> {
    let o = BarOrientation::Vertical;
    bar_study(w, w, o, setup, sampling, acq, |g| make_bar_pair(w, o, g)).map(|(_, m)| m)
}

/// One USAF element (three bars) through the pipeline.
pub fn triplet_study(
    triplet: UsafTriplet,
    setup: &SetupConfig,
    sampling: &Sampling,
    acq: &AcquisitionSpec,
) -> Result<(ProfileStudy, TwoSlitMetrics), Error> {
    let w = triplet.line_width();
    bar_study(w, 2.0 * w, triplet.orientation, setup, sampling, acq, |g| {
        make_usaf_triplet(triplet, g)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UsafPick {
    pub group: i32,
    pub element: u8,
    pub line_width: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinResolvable {
    /// Line width at which the bar-pair ratio crosses the threshold.
    pub line_width: f64,
    pub threshold: f64,
    /// Smallest standard USAF element whose bar pair is below the threshold.
    pub nearest_usaf: Option<UsafPick>,
    pub evaluations: usize,
}

/// Standard elements from group -2 to 9, narrowest line first.
fn usaf_elements() -> Vec<(i32, u8, f64)> {
    let mut v: Vec<_> = (-2..=9)
        .flat_map(|g| (1..=6u8).map(move |e| (g, e, usaf_line_width(g, e))))
        .collect();
    v.sort_by(|a, b| a.2.total_cmp(&b.2));
    v
}

/// Bisection on the bar-pair ratio `R(w)` for the line width at which two
/// bars become resolved at `threshold`.
pub fn min_resolvable_linewidth(
    setup: &SetupConfig,
    threshold: f64,
    sampling: &Sampling,
    acq: &AcquisitionSpec,
) -> Result<MinResolvable, Error> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(AnalysisError::BadThreshold(threshold).into());
    }
    let mut evaluations = 0;
    let mut ratio = |w: f64| -> Result<f64, Error> {
        evaluations += 1;
        Ok(bar_pair_metrics(w, setup, sampling, acq)?.ratio)
    };
    let s = sigma_object(setup);
    let (mut lo, mut hi) = (0.5 * s, 4.0 * s);
    let mut tries = 0;
    while ratio(lo)? <= threshold {
        lo *= 0.5;
        tries += 1;
        if tries > 4 {
            return Err(AnalysisError::NoCrossing { lo, hi }.into());
        }
    }
    while ratio(hi)? > threshold {
        hi *= 2.0;
        tries += 1;
        if tries > 8 {
            return Err(AnalysisError::NoCrossing { lo, hi }.into());
        }
    }
    while hi - lo > 1e-5 * hi {
        let mid = 0.5 * (lo + hi);
        if ratio(mid)? > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let line_width = 0.5 * (lo + hi);

    let mut nearest_usaf = None;
    for (group, element, w) in usaf_elements().into_iter().filter(|e| e.2 >= line_width).take(6) {
        let r = ratio(w)?;
        if r < threshold {
            nearest_usaf = Some(UsafPick {
                group,
                element,
                line_width: w,
                ratio: r,
            });
            break;
        }
    }
    Ok(MinResolvable {
        line_width,
        threshold,
        nearest_usaf,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MagnificationEstimate {
    pub magnification: f64,
    pub uncertainty: f64,
    pub left_edge: f64,
    pub right_edge: f64,
    pub edge_sigma: f64,
}

/// Edge-to-edge distance of a bright feature on the middle camera row over
/// its known object size.
pub fn measure_magnification(image: &ReconstructedImage, known_size: f64) -> Result<MagnificationEstimate, Error> {
    let profile = Profile::center_row(&image.visibility_map());
    let n = profile.len();
    let vmax = profile.v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bright: Vec<usize> = (0..n).filter(|&i| profile.v[i] >= 0.5 * vmax).collect();
    let (Some(&first), Some(&last)) = (bright.first(), bright.last()) else {
        return Err(AnalysisError::EdgesNotDetected("no bright feature".into()).into());
    };
    if !(vmax > 0.0) || first == 0 || last == n - 1 {
        return Err(AnalysisError::EdgesNotDetected("feature touches the image border".into()).into());
    }
    let mid = (first + last) / 2 + 1;
    let left = fit_esf(&profile.slice(0, mid))?;
    let right = fit_esf(&profile.slice(mid - 1, n))?;
    if !left.rising || right.rising {
        return Err(AnalysisError::EdgesNotDetected("edges do not bound a bright feature".into()).into());
    }
    let span = right.edge_position - left.edge_position;
    Ok(MagnificationEstimate {
        magnification: span / known_size,
        uncertainty: left.edge_stderr.hypot(right.edge_stderr) / known_size,
        left_edge: left.edge_position,
        right_edge: right.edge_position,
        edge_sigma: 0.5 * (left.sigma + right.sigma),
    })
}

/// Transparent `width x height` rectangle through the pipeline, then
/// [`measure_magnification`].
pub fn magnification_study(
    setup: &SetupConfig,
    width: f64,
    height: f64,
    sampling: &Sampling,
    acq: &AcquisitionSpec,
) -> Result<(ProfileStudy, MagnificationEstimate), Error> {
    let half = 0.5 * magnification(setup) * width + 6.0 * sigma_camera(setup);
    let camera = profile_camera(half, sampling.camera_pitch(setup), sampling.profile_rows)?;
    let pitch = sampling.object_pitch_for(setup, width);
    let grid = covering_object_grid(&camera, setup, pitch, (0.5 * width, 0.5 * height))?;
    let output = pipeline::run(&make_rectangle(width, height, &grid)?, setup, &camera, acq)?;
    let estimate = measure_magnification(&output.image, width)?;
    let profile = cross_section(&output.image, BarOrientation::Vertical);
    Ok((ProfileStudy { output, profile }, estimate))
}
