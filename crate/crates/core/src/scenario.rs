//! Named scenarios, one per reproduced figure, plus a generic `image` run.
//!
//! Every scenario writes into a staging directory inside the output
//! directory; files are moved into place only when the whole run succeeded.
//! The summary is written last.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    cross_section, esf_sigma_sweep, fit_esf, knife_edge_study, magnification_study, measure_magnification, min_resolvable_linewidth,
    phase_edge_sigma, point_pair_study, triplet_study, two_slit_metrics, Profile, RAYLEIGH_RATIO,
};
use crate::engine::{response_point_pair, KERNEL_REACH};
use crate::grid::{CameraGrid, Grid, ScalarMap};
use crate::io::config::{ObjectSpec, RunConfig};
use crate::io::pgm::{write_greymap, GreymapMeta, Normalization};
use crate::io::table::{write_csv, write_profile, UM};
use crate::optics::{magnification, sigma_camera, sigma_object, SetupConfig};
use crate::pipeline::{self, covering_object_grid, AcquisitionSpec, PipelineOutput};
use crate::scene::{
    load_raster, make_bar_pair, make_knife_edge, make_phase_edge, make_rectangle, make_usaf_triplet, BarOrientation, ObjectMask,
    SceneError, UsafTriplet,
};
use crate::Error;

/// Registered scenarios and what they reproduce.
pub const SCENARIOS: &[(&str, &str)] = &[
    (
        "fig2-magnification",
        "magnification measured from a 2.417 x 2.3 mm aperture in both setups",
    ),
    ("fig3-pump-sweep", "250 um USAF lines imaged at several pump waists"),
    ("fig4-esf-sweep", "knife-edge sigma and sigma/M against pump waist for both setups"),
    (
        "fig5-usaf",
        "minimum resolvable line width against pump waist, and 250 um lines in both setups",
    ),
    ("fig6-twopoint", "two points 180 um apart under four wavelength combinations"),
    (
        "fig7-stack-demo",
        "phase-stepped frames and per-pixel reconstruction of a phase object",
    ),
    ("fig8-phase-edge", "phase edge against absorptive edge"),
    ("fig9-testchart", "ratio and contrast across USAF group 1 in setup 2"),
    ("image", "image the configured object"),
];

pub fn is_registered(name: &str) -> bool {
    SCENARIOS.iter().any(|(n, _)| *n == name)
}

const DEFAULT_W_P_LIST: [f64; 3] = [148e-6, 201e-6, 300e-6];
const FIG5_W_P_LIST: [f64; 6] = [100e-6, 148e-6, 201e-6, 250e-6, 300e-6, 400e-6];
/// Side length cap for rendered 2-D images.
const DISPLAY_MAX: usize = 201;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub uncertainty: Option<f64>,
    pub theory: Option<f64>,
    pub unit: &'static str,
}

fn measured(name: impl Into<String>, value: f64, uncertainty: Option<f64>, theory: Option<f64>, unit: &'static str) -> Measurement {
    Measurement {
        name: name.into(),
        value,
        uncertainty,
        theory,
        unit,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derived {
    pub magnification: f64,
    pub sigma_camera_um: f64,
    pub sigma_object_um: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub derived: Derived,
    pub measurements: Vec<Measurement>,
    pub artifacts: Vec<String>,
    /// Wall time; reported on stderr, never written, so outputs stay
    /// byte-identical between runs.
    #[serde(skip)]
    pub elapsed: Duration,
}

struct Outputs {
    dir: PathBuf,
    meta: GreymapMeta,
    names: Vec<String>,
    emit_frames: bool,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.to_string());
        self.dir.join(name)
    }

    fn image(&mut self, name: &str, quantity: &str, map: &ScalarMap, norm: Normalization) -> Result<(), Error> {
        let path = self.path(&format!("{name}.pgm"));
        self.names.push(format!("{name}.pgm.txt"));
        let meta = GreymapMeta {
            quantity: quantity.to_string(),
            ..self.meta.clone()
        };
        Ok(write_greymap(map, &path, norm, &meta)?)
    }

    fn table<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), Error> {
        let path = self.path(&format!("{name}.csv"));
        write_csv(&path, rows)?;
        self.provenance(&path)
    }

    fn profile(&mut self, name: &str, profile: &Profile) -> Result<(), Error> {
        let path = self.path(&format!("{name}.csv"));
        write_profile(&path, profile)?;
        self.provenance(&path)
    }

    /// `<table>.txt` next to a table, naming the config hash and seed.
    fn provenance(&mut self, table: &Path) -> Result<(), Error> {
        let name = format!("{}.txt", table.file_name().unwrap_or_default().to_string_lossy());
        let path = self.path(&name);
        let text = format!("config_hash = {}\nseed = {}\n", self.meta.config_hash, self.meta.seed);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Visibility, phase and offset maps, plus the frames when requested.
    fn reconstruction(&mut self, prefix: &str, out: &PipelineOutput, i0: f64) -> Result<(), Error> {
        let img = &out.image;
        self.image(
            &format!("{prefix}visibility"),
            "visibility",
            &img.visibility_map(),
            Normalization::Fixed { lo: 0.0, hi: 1.0 },
        )?;
        self.image(
            &format!("{prefix}phase"),
            "phase [rad]",
            &img.phase_map(),
            Normalization::Fixed { lo: -PI, hi: PI },
        )?;
        let offset = ScalarMap::new(img.grid, img.offset.clone());
        self.image(
            &format!("{prefix}offset"),
            "offset",
            &offset,
            Normalization::Fixed { lo: 0.0, hi: 2.0 * i0 },
        )?;
        if self.emit_frames {
            for (k, f) in out.stack.frames().iter().enumerate() {
                self.image(
                    &format!("{prefix}frame{k:03}"),
                    "intensity",
                    f,
                    Normalization::Fixed { lo: 0.0, hi: 2.0 * i0 },
                )?;
            }
        }
        Ok(())
    }
}

fn derived(setup: &SetupConfig) -> Derived {
    Derived {
        magnification: magnification(setup),
        sigma_camera_um: sigma_camera(setup) * UM,
        sigma_object_um: sigma_object(setup) * UM,
    }
}

/// Validate the config, run the scenario and move its artifacts into the
/// output directory. On error nothing is left behind.
pub fn run_scenario(cfg: &RunConfig) -> Result<RunSummary, Error> {
    if !is_registered(&cfg.scenario) {
        return Err(Error::Input(format!("unknown scenario `{}`", cfg.scenario)));
    }
    for w in cfg.setup.warnings() {
        log::warn!("{w}");
    }
    let start = Instant::now();
    let out_dir = &cfg.output_dir;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".staging-")
        .tempdir_in(out_dir)
        .map_err(|e| Error::io(out_dir, e))?;
    let hash = cfg.hash();
    let mut outputs = Outputs {
        dir: staging.path().to_path_buf(),
        meta: GreymapMeta {
            config_hash: hash.clone(),
            seed: cfg.acquisition.seed,
            orientation: cfg.display_orientation,
            quantity: String::new(),
        },
        names: Vec::new(),
        emit_frames: cfg.emit_frames,
    };
    let measurements = match cfg.scenario.as_str() {
        "fig2-magnification" => fig2(cfg, &mut outputs),
        "fig3-pump-sweep" => fig3(cfg, &mut outputs),
        "fig4-esf-sweep" => fig4(cfg, &mut outputs),
        "fig5-usaf" => fig5(cfg, &mut outputs),
        "fig6-twopoint" => fig6(cfg, &mut outputs),
        "fig7-stack-demo" => fig7(cfg, &mut outputs),
        "fig8-phase-edge" => fig8(cfg, &mut outputs),
        "fig9-testchart" => fig9(cfg, &mut outputs),
        _ => image(cfg, &mut outputs),
    }?;

    let mut artifacts = outputs.names.clone();
    artifacts.push("summary.json".to_string());
    let summary = RunSummary {
        scenario: cfg.scenario.clone(),
        config_hash: hash,
        seed: cfg.acquisition.seed,
        config: cfg.clone(),
        derived: derived(&cfg.setup),
        measurements,
        artifacts,
        elapsed: Duration::ZERO,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Input(e.to_string()))?;
    let summary_path = outputs.path("summary.json");
    fs::write(&summary_path, json + "\n").map_err(|e| Error::io(&summary_path, e))?;

    for name in &outputs.names {
        let (from, to) = (staging.path().join(name), out_dir.join(name));
        fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
    }
    Ok(RunSummary {
        elapsed: start.elapsed(),
        ..summary
    })
}

fn w_p_list(cfg: &RunConfig, default: &[f64]) -> Vec<f64> {
    cfg.w_p_list.clone().unwrap_or_else(|| default.to_vec())
}

fn standard_setup(cfg: &RunConfig, which: u8, w_p: f64) -> Result<SetupConfig, Error> {
    let (ld, lu) = if which == 1 { (810e-9, 1550e-9) } else { (842e-9, 780e-9) };
    Ok(SetupConfig::new(ld, lu, cfg.setup.f_c(), cfg.setup.f_u(), w_p)?)
}

fn um_tag(x: f64) -> String {
    format!("{:.0}um", x * UM)
}

/// Square camera covering `+-half`, or the configured grid.
fn display_camera(cfg: &RunConfig, setup: &SetupConfig, half: f64) -> Result<CameraGrid, Error> {
    let c = cfg.camera;
    let pitch = c
        .pitch
        .unwrap_or_else(|| cfg.sampling.camera_pitch(setup).max(2.0 * half / (DISPLAY_MAX - 1) as f64));
    let n = 2 * (half / pitch).ceil() as usize + 1;
    Ok(Grid::centered(pitch, c.nx.unwrap_or(n), c.ny.unwrap_or(n))?)
}

/// Run the pipeline on a square display grid for a mask built on a covering
/// object grid with pitch chosen from `feature`.
fn render(
    cfg: &RunConfig,
    setup: &SetupConfig,
    half: f64,
    feature: f64,
    min_half: (f64, f64),
    acq: &AcquisitionSpec,
    build: impl Fn(&Grid) -> Result<ObjectMask, SceneError>,
) -> Result<PipelineOutput, Error> {
    let camera = display_camera(cfg, setup, half)?;
    let pitch = cfg.sampling.object_pitch_for(setup, feature);
    let grid = covering_object_grid(&camera, setup, pitch, min_half)?;
    pipeline::run(&build(&grid)?, setup, &camera, acq)
}

#[derive(Serialize)]
struct MagnificationRow {
    setup: u8,
    lambda_d_nm: f64,
    lambda_u_nm: f64,
    w_p_um: f64,
    m_theory: f64,
    m_measured: f64,
    m_uncertainty: f64,
}

fn fig2(cfg: &RunConfig, out: &mut Outputs) -> Result<Vec<Measurement>, Error> {
    let width = match cfg.object {
        ObjectSpec::Rectangle { width, .. } => width,
        _ => 2.417e-3,
    };
    let height = match cfg.object {
        ObjectSpec::Rectangle { height, .. } => height,
        _ => 2.3e-3,
    };
    let mut rows = Vec::new();
    let mut ms = Vec::new();
    for which in [1u8, 2] {
        let setup = standard_setup(cfg, which, cfg.setup.w_p())?;
        let acq = cfg.acquisition.for_job(which as usize);
        let (study, est) = magnification_study(&setup, width, height, &cfg.sampling, &acq)?;
        let m = magnification(&setup);
        rows.push(MagnificationRow {
            setup: which,
            lambda_d_nm: setup.lambda_d() * 1e9,
            lambda_u_nm: setup.lambda_u() * 1e9,
            w_p_um: setup.w_p() * UM,
            m_theory: m,
            m_measured: est.magnification,
            m_uncertainty: est.uncertainty,
        });
        ms.push(measured(
            format!("magnification_setup{which}"),
            est.magnification,
            Some(est.uncertainty),
            Some(m),
            "1",
        ));
        out.profile(&format!("profile_setup{which}"), &study.profile)?;
        let half = 0.5 * m * width.max(height) + 6.0 * sigma_camera(&setup);
        let shown = render(cfg, &setup, half, width, (0.5 * width, 0.5 * height), &acq, |g| {
            make_rectangle(width, height, g)
        })?;
        out.reconstruction(&format!("setup{which}_"), &shown, acq.i0)?;
    }
    out.table("magnification", &rows)?;
    Ok(ms)
}

#[derive(Serialize)]
struct PumpSweepRow {
    w_p_um: f64,
    line_width_um: f64,
    sigma_over_m_um: f64,
    ratio: f64,
    contrast: f64,
    resolved: bool,
}

fn fig3(cfg: &RunConfig, out: &mut Outputs) -> Result<Vec<Measurement>, Error> {
    let triplet = match cfg.object {
        ObjectSpec::Usaf { triplet } => triplet,
        _ => UsafTriplet::new(1, 1, BarOrientation::Vertical)?,
    };
    let w = triplet.line_width();
    let list = w_p_list(cfg, &DEFAULT_W_P_LIST);
    let results: Vec<_> = list
        .par_iter()
        .enumerate()
        .map(|(i, &w_p)| -> Result<_, Error> {
            let setup = cfg.setup.with_pump_waist(w_p)?;
            let acq = cfg.acquisition.for_job(i);
            let (study, metrics) = triplet_study(triplet, &setup, &cfg.sampling, &acq)?;
            let half = magnification(&setup) * 2.5 * w + 5.0 * sigma_camera(&setup);
            let shown = render(cfg, &setup, half, w, (2.5 * w, 2.5 * w), &acq, |g| make_usaf_triplet(triplet, g))?;
            Ok((setup, study, metrics, shown, acq))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut ms = Vec::new();
    for (setup, study, metrics, shown, acq) in results {
        let tag = um_tag(setup.w_p());
        rows.push(PumpSweepRow {
            w_p_um: setup.w_p() * UM,
            line_width_um: w * UM,
            sigma_over_m_um: sigma_object(&setup) * UM,
            ratio: metrics.ratio,
            contrast: metrics.contrast,
            resolved: metrics.resolved,
        });
        ms.push(measured(format!("ratio_wp{tag}"), metrics.ratio, None, None, "1"));
        out.profile(&format!("profile_wp{tag}"), &study.profile)?;
        out.reconstruction(&format!("wp{tag}_"), &shown, acq.i0)?;
    }
    out.table("pump_sweep", &rows)?;
    Ok(ms)
}

#[derive(Serialize)]
struct EsfRow {
    setup: u8,
    w_p_um: f64,
    sigma_um: f64,
    sigma_stderr_um: f64,
    sigma_theory_um: f64,
    sigma_over_m_um: f64,
    sigma_over_m_theory_um: f64,
    magnification: f64,
}

#[derive(Serialize)]
struct EsfProfileRow {
    x_um: f64,
    visibility: f64,
    fit: f64,
}

fn fig4(cfg: &RunConfig, out: &mut Outputs) -> Result<Vec<Measurement>, Error> {
    let list = w_p_list(cfg, &DEFAULT_W_P_LIST);
    let mut rows = Vec::new();
    let mut ms = Vec::new();
    for which in [1u8, 2] {
        let setup = standard_setup(cfg, which, list[0])?;
        let acq = cfg.acquisition.for_job(100 * which as usize);
        for r in esf_sigma_sweep(&setup, &list, &cfg.sampling, &acq)? {
            let tag = format!("setup{which}_wp{}", um_tag(r.w_p));
            ms.push(measured(
                format!("sigma_{tag}"),
                r.sigma * UM,
                Some(r.sigma_stderr * UM),
                Some(r.sigma_theory * UM),
                "um",
            ));
            ms.push(measured(
                format!("sigma_over_m_{tag}"),
                r.sigma_over_m * UM,
                Some(r.sigma_stderr / r.magnification * UM),
                Some(r.sigma_over_m_theory * UM),
                "um",
            ));
            rows.push(EsfRow {
                setup: which,
                w_p_um: r.w_p * UM,
                sigma_um: r.sigma * UM,
                sigma_stderr_um: r.sigma_stderr * UM,
                sigma_theory_um: r.sigma_theory * UM,
                sigma_over_m_um: r.sigma_over_m * UM,
                sigma_over_m_theory_um: r.sigma_over_m_theory * UM,
                magnification: r.magnification,
            });
        }
    }
    out.table("esf_sweep", &rows)?;

    // Single edge with its fit, setup 1 at the first pump waist.
    let setup = standard_setup(cfg, 1, list[0])?;
    let acq = cfg.acquisition.for_job(0);
    let study = knife_edge_study(&setup, &cfg.sampling, &acq)?;
    let fit = fit_esf(&study.profile)?;
    let prof: Vec<EsfProfileRow> = study
        .profile
        .x
        .iter()
        .zip(&study.profile.v)
        .map(|(&x, &v)| EsfProfileRow {
            x_um: x * UM,
            visibility: v,
            fit: fit.eval(x),
        })
        .collect();
    out.table("esf_profile", &prof)?;
    let half = 6.0 * sigma_camera(&setup);
    let shown = render(cfg, &setup, half, sigma_object(&setup), (0.0, 0.0), &acq, |g| {
        make_knife_edge(0.0, g)
    })?;
    out.reconstruction("knife_edge_", &shown, acq.i0)?;
    Ok(ms)
}

#[derive(Serialize)]
struct MinWidthRow {
    setup: u8,
    w_p_um: f64,
    threshold: f64,
    line_width_um: f64,
    sigma_over_m_um: f64,
    usaf_group: Option<i32>,
    usaf_element: Option<u8>,
    usaf_line_width_um: Option<f64>,
    usaf_ratio: Option<f64>,
}

#[derive(Serialize)]
struct UsafRow {
    setup: u8,
    w_p_um: f64,
    line_width_um: f64,
    ratio: f64,
    contrast: f64,
    resolved: bool,
}

/// Ratio thresholds per setup: the band centre, its edges, and the
/// Rayleigh-style value.
fn fig5_thresholds(which: u8) -> [f64; 4] {
    if which == 1 {
        [0.66, 0.70, 0.74, RAYLEIGH_RATIO]
    } else {
        [0.71, 0.74, 0.77, RAYLEIGH_RATIO]
    }
}

fn fig5(cfg: &RunConfig, out: &mut Outputs) -> Result<Vec<Measurement>, Error> {
    let list = w_p_list(cfg, &FIG5_W_P_LIST);
    let jobs: Vec<(u8, f64, f64)> = [1u8, 2]
        .iter()
        .flat_map(|&s| {
            list.iter()
                .flat_map(move |&w| fig5_thresholds(s).into_iter().map(move |t| (s, w, t)))
        })
        .collect();
    let rows: Vec<MinWidthRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(which, w_p, threshold))| -> Result<_, Error> {
            let setup = standard_setup(cfg, which, w_p)?;
            let r = min_resolvable_linewidth(&setup, threshold, &cfg.sampling, &cfg.acquisition.for_job(i))?;
            Ok(MinWidthRow {
                setup: which,
                w_p_um: w_p * UM,
                threshold,
                line_width_um: r.line_width * UM,
                sigma_over_m_um: sigma_object(&setup) * UM,
                usaf_group: r.nearest_usaf.map(|u| u.group),
                usaf_element: r.nearest_usaf.map(|u| u.element),
                usaf_line_width_um: r.nearest_usaf.map(|u| u.line_width * UM),
                usaf_ratio: r.nearest_usaf.map(|u| u.ratio),
            })
        })
        .collect::<Result<_, _>>()?;
    let mut ms: Vec<Measurement> = rows
        .iter()
        .filter(|r| r.threshold == RAYLEIGH_RATIO)
        .map(|r| {
            measured(
                format!("min_line_width_setup{}_wp{:.0}um", r.setup, r.w_p_um),
                r.line_width_um,
                None,
                None,
                "um",
            )
        })
        .collect();
    out.table("min_line_width", &rows)?;

    // 250 µm lines at a 148 µm pump waist in both setups.
    let triplet = UsafTriplet::new(1, 1, BarOrientation::Vertical)?;
    let w = triplet.line_width();
    let mut usaf = Vec::new();
    for which in [1u8, 2] {
        let setup = standard_setup(cfg, which, 148e-6)?;
        let acq = cfg.acquisition.for_job(10_000 + which as usize);
        let (study, m) = triplet_study(triplet, &setup, &cfg.sampling, &acq)?;
        usaf.push(UsafRow {
            setup: which,
            w_p_um: 148.0,
            line_width_um: w * UM,
            ratio: m.ratio,
            contrast: m.contrast,
            resolved: m.resolved,
        });
        ms.push(measured(format!("ratio_250um_setup{which}"), m.ratio, None, None, "1"));
        out.profile(&format!("usaf_250um_setup{which}_profile"), &study.profile)?;
        let half = magnification(&setup) * 2.5 * w + 5.0 * sigma_camera(&setup);
        let shown = render(cfg, &setup, half, w, (2.5 * w, 2.5 * w), &acq, |g| make_usaf_triplet(triplet, g))?;
        out.reconstruction(&format!("usaf_250um_setup{which}_"), &shown, acq.i0)?;
    }
    out.table("usaf_250um", &usaf)?;
    Ok(ms)
}

#[derive(Serialize)]
struct TwoPointRow {
    case: &'static str,
    lambda_d_nm: f64,
    lambda_u_nm: f64,
    separation_um: f64,
    w_p_um: f64,
    magnification: f64,
    sigma_camera_um: f64,
    ratio: f64,
    contrast: f64,
    resolved: bool,
}

fn fig6(cfg: &RunConfig, out: &mut Outputs) -> Result<Vec<Measurement>, Error> {
    let d = match cfg.object {
        ObjectSpec::PointPair { separation } => separation,
        _ => 180e-6,
    };
    let cases = [
        ("a", 810e-9, 810e-9),
        ("b", 1550e-9, 1550e-9),
        ("c", 1550e-9, 810e-9),
        ("d", 810e-9, 1550e-9),
    ];
    let mut rows = Vec::new();
    let mut ms = Vec::new();
    for (i, (case, ld, lu)) in cases.into_iter().enumerate() {
        let setup = cfg.setup.with_wavelengths(ld, lu)?;
        let acq = cfg.acquisition.for_job(i);
        let (study, m) = point_pair_study(d, &setup, &cfg.sampling, &acq)?;
        rows.push(TwoPointRow {
            case,
            lambda_d_nm: ld * 1e9,
            lambda_u_nm: lu * 1e9,
            separation_um: d * UM,
            w_p_um: setup.w_p() * UM,
            magnification: magnification(&setup),
            sigma_camera_um: sigma_camera(&setup) * UM,
            ratio: m.ratio,
            contrast: m.contrast,
            resolved: m.resolved,
        });
        ms.push(measured(format!("ratio_case_{case}"), m.ratio, None, None, "1"));
        out.profile(&format!("twopoint_{case}_profile"), &study.profile)?;
        let half = 0.5 * magnification(&setup) * d + 5.0 * sigma_camera(&setup);
        let camera = display_camera(cfg, &setup, half)?;
        let shown = pipeline::acquire(response_point_pair(d, &setup, &camera)?, &acq)?;
        out.reconstruction(&format!("twopoint_{case}_"), &shown, acq.i0)?;
    }
    out.table("twopoint", &rows)?;
    Ok(ms)
}

#[derive(Serialize)]
struct TraceRow {
    pixel: &'static str,
    phi: f64,
    intensity: f64,
    fit: f64,
}

fn fig7(cfg: &RunConfig, out: &mut Outputs) -> Result<Vec<Measurement>, Error> {
    let setup = cfg.setup;
    let acq = cfg.acquisition;
    let (w, h) = (1.0e-3, 2.0e-3);
    let half = 0.5 * magnification(&setup) * h + 6.0 * sigma_camera(&setup);
    let shown = if cfg.is_set("object") {
        imaged_object(cfg, &setup, &acq)?
    } else {
        render(cfg, &setup, half, w, (0.5 * w, 0.5 * h), &acq, |g| {
            make_rectangle(w, h, g)?.to_phase_object(PI)
        })?
    };
    out.reconstruction("", &shown, acq.i0)?;
    let grid = shown.image.grid;
    let (cy, cx) = (grid.ny() / 2, grid.nx() / 2);
    let mut rows = Vec::new();
    for (label, ix) in [("center", cx), ("edge", grid.nx() / 8)] {
        let k = grid.index(ix, cy);
        for (f, &phi) in shown.stack.frames().iter().zip(shown.stack.phases()) {
            let fit = shown.image.offset[k] + shown.image.amplitude[k] * (phi + shown.image.phase[k]).cos();
            rows.push(TraceRow {
                pixel: label,
                phi,
                intensity: f.data[k],
                fit,
            });
        }
    }
    out.table("pixel_trace", &rows)?;
    let k = grid.index(cx, cy);
    Ok(vec![
        measured("center_visibility", shown.image.visibility[k], None, None, "1"),
        measured("center_phase", shown.image.phase[k], None, None, "rad"),
        measured("invalid_pixels", shown.image.invalid_count() as f64, None, None, "1"),
    ])
}

#[derive(Serialize)]
struct PhaseEdgeRow {
    w_p_um: f64,
    sigma_phase_um: f64,
    sigma_amplitude_um: f64,
    sigma_theory_um: f64,
    phase_step_rad: f64,
}

fn fig8(cfg: &RunConfig, out: &mut Outputs) -> Result<Vec<Measurement>, Error> {
    let list = w_p_list(cfg, &DEFAULT_W_P_LIST);
    let delta = match cfg.object {
        ObjectSpec::PhaseEdge { delta, .. } => delta,
        _ => PI,
    };
    let results: Vec<_> = list
        .par_iter()
        .enumerate()
        .map(|(i, &w_p)| -> Result<_, Error> {
            let setup = cfg.setup.with_pump_waist(w_p)?;
            let acq = cfg.acquisition.for_job(2 * i);
            let (study, phase) = phase_edge_sigma(&setup, delta, &cfg.sampling, &acq)?;
            let amp = fit_esf(&knife_edge_study(&setup, &cfg.sampling, &cfg.acquisition.for_job(2 * i + 1))?.profile)?;
            Ok((setup, study, phase, amp))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut ms = Vec::new();
    for (setup, study, phase, amp) in &results {
        let tag = um_tag(setup.w_p());
        rows.push(PhaseEdgeRow {
            w_p_um: setup.w_p() * UM,
            sigma_phase_um: phase.fit.sigma * UM,
            sigma_amplitude_um: amp.sigma * UM,
            sigma_theory_um: sigma_camera(setup) * UM,
            phase_step_rad: phase.phase_step,
        });
        ms.push(measured(
            format!("sigma_phase_wp{tag}"),
            phase.fit.sigma * UM,
            Some(phase.fit.sigma_stderr * UM),
            Some(sigma_camera(setup) * UM),
            "um",
        ));
        ms.push(measured(
            format!("phase_step_wp{tag}"),
            phase.phase_step,
            None,
            Some(delta.abs()),
            "rad",
        ));
        out.profile(&format!("constructive_wp{tag}"), &study.profile)?;
    }
    out.table("phase_edge", &rows)?;
    let setup = cfg.setup.with_pump_waist(list[0])?;
    let acq = cfg.acquisition.for_job(0);
    let shown = render(
        cfg,
        &setup,
        6.0 * sigma_camera(&setup),
        sigma_object(&setup),
        (0.0, 0.0),
        &acq,
        |g| make_phase_edge(0.0, delta, g),
    )?;
    out.reconstruction("phase_edge_", &shown, acq.i0)?;
    out.image(
        "phase_edge_constructive",
        "intensity at phi = 0",
        &shown.image.intensity_at(0.0),
        Normalization::Fixed { lo: 0.0, hi: 2.0 * acq.i0 },
    )?;
    Ok(ms)
}

#[derive(Serialize)]
struct TestChartRow {
    group: i32,
    element: u8,
    orientation: &'static str,
    line_width_um: f64,
    ratio: f64,
    contrast: f64,
    resolved: bool,
}

fn fig9(cfg: &RunConfig, out: &mut Outputs) -> Result<Vec<Measurement>, Error> {
    let w_p = if cfg.is_set("w_p") { cfg.setup.w_p() } else { 201e-6 };
    let setup = if cfg.is_set("lambda_d") || cfg.is_set("lambda_u") || cfg.is_set("setup") {
        cfg.setup.with_pump_waist(w_p)?
    } else {
        standard_setup(cfg, 2, w_p)?
    };
    let group = match cfg.object {
        ObjectSpec::Usaf { triplet } => triplet.group,
        _ => 1,
    };
    let jobs: Vec<(u8, BarOrientation)> = (1..=6u8)
        .flat_map(|e| [BarOrientation::Vertical, BarOrientation::Horizontal].map(|o| (e, o)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(element, o))| -> Result<_, Error> {
            let t = UsafTriplet::new(group, element, o)?;
            let (study, m) = triplet_study(t, &setup, &cfg.sampling, &cfg.acquisition.for_job(i))?;
            Ok((t, study, m))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut ms = Vec::new();
    for (t, study, m) in &results {
        let o = match t.orientation {
            BarOrientation::Vertical => "vertical",
            BarOrientation::Horizontal => "horizontal",
        };
        rows.push(TestChartRow {
            group: t.group,
            element: t.element,
            orientation: o,
            line_width_um: t.line_width() * UM,
            ratio: m.ratio,
            contrast: m.contrast,
            resolved: m.resolved,
        });
        ms.push(measured(format!("ratio_g{}e{}_{o}", t.group, t.element), m.ratio, None, None, "1"));
        ms.push(measured(
            format!("contrast_g{}e{}_{o}", t.group, t.element),
            m.contrast,
            None,
            None,
            "1",
        ));
        out.profile(&format!("g{}e{}_{o}_profile", t.group, t.element), &study.profile)?;
    }
    out.table("testchart", &rows)?;
    for element in [1u8, 6] {
        let t = UsafTriplet::new(group, element, BarOrientation::Vertical)?;
        let w = t.line_width();
        let acq = cfg.acquisition.for_job(100 + element as usize);
        let half = magnification(&setup) * 2.5 * w + 5.0 * sigma_camera(&setup);
        let shown = render(cfg, &setup, half, w, (2.5 * w, 2.5 * w), &acq, |g| make_usaf_triplet(t, g))?;
        out.reconstruction(&format!("g{group}e{element}_"), &shown, acq.i0)?;
    }
    Ok(ms)
}

/// Pipeline output for the configured object on the display grid.
fn imaged_object(cfg: &RunConfig, setup: &SetupConfig, acq: &AcquisitionSpec) -> Result<PipelineOutput, Error> {
    let m = magnification(setup);
    let s = sigma_camera(setup);
    let so = sigma_object(setup);
    match &cfg.object {
        ObjectSpec::KnifeEdge { edge_position: x0 } => {
            let half = m * x0.abs() + 6.0 * s;
            render(cfg, setup, half, so, (x0.abs(), 0.0), acq, |g| make_knife_edge(*x0, g))
        }
        ObjectSpec::PhaseEdge { edge_position: x0, delta } => {
            let half = m * x0.abs() + 6.0 * s;
            render(cfg, setup, half, so, (x0.abs(), 0.0), acq, |g| make_phase_edge(*x0, *delta, g))
        }
        ObjectSpec::PointPair { separation } => {
            let camera = display_camera(cfg, setup, 0.5 * m * separation + 5.0 * s)?;
            pipeline::acquire(response_point_pair(*separation, setup, &camera)?, acq)
        }
        ObjectSpec::BarPair { line_width: w } => {
            let w = *w;
            render(cfg, setup, m * 2.5 * w + 5.0 * s, w, (2.5 * w, 2.5 * w), acq, |g| {
                make_bar_pair(w, BarOrientation::Vertical, g)
            })
        }
        ObjectSpec::Usaf { triplet } => {
            let w = triplet.line_width();
            render(cfg, setup, m * 2.5 * w + 5.0 * s, w, (2.5 * w, 2.5 * w), acq, |g| {
                make_usaf_triplet(*triplet, g)
            })
        }
        ObjectSpec::Rectangle { width, height } => {
            let (w, h) = (*width, *height);
            render(cfg, setup, 0.5 * m * w.max(h) + 6.0 * s, w, (0.5 * w, 0.5 * h), acq, |g| {
                make_rectangle(w, h, g)
            })
        }
        ObjectSpec::Raster { path, width } => {
            let mask = load_raster(path, *width)?;
            let (lo, hi) = mask.grid().x_extent();
            let (ylo, yhi) = mask.grid().y_extent();
            let reach = KERNEL_REACH * so;
            let half = (hi.min(-lo).min(yhi).min(-ylo) - reach) * m;
            if !(half > 0.0) {
                return Err(Error::Input(format!("raster {} is narrower than the blur reach", path.display())));
            }
            let camera = display_camera(cfg, setup, half)?;
            pipeline::run(&mask, setup, &camera, acq)
        }
    }
}

fn image(cfg: &RunConfig, out: &mut Outputs) -> Result<Vec<Measurement>, Error> {
    let setup = cfg.setup;
    let shown = imaged_object(cfg, &setup, &cfg.acquisition)?;
    out.reconstruction("", &shown, cfg.acquisition.i0)?;
    let profile = match &cfg.object {
        ObjectSpec::Usaf { triplet } => cross_section(&shown.image, triplet.orientation),
        _ => Profile::center_row(&shown.image.visibility_map()),
    };
    out.profile("profile", &profile)?;
    let s = sigma_camera(&setup) * UM;
    let mut ms = Vec::new();
    match &cfg.object {
        ObjectSpec::KnifeEdge { .. } => {
            let f = fit_esf(&profile)?;
            ms.push(measured("sigma", f.sigma * UM, Some(f.sigma_stderr * UM), Some(s), "um"));
        }
        ObjectSpec::PhaseEdge { .. } => {
            let constructive = Profile::center_row(&shown.image.intensity_at(0.0));
            out.profile("constructive", &constructive)?;
            let f = fit_esf(&constructive)?;
            ms.push(measured("sigma", f.sigma * UM, Some(f.sigma_stderr * UM), Some(s), "um"));
        }
        ObjectSpec::PointPair { .. } | ObjectSpec::BarPair { .. } | ObjectSpec::Usaf { .. } => {
            let m = two_slit_metrics(&profile)?;
            ms.push(measured("ratio", m.ratio, None, None, "1"));
            ms.push(measured("contrast", m.contrast, None, None, "1"));
        }
        ObjectSpec::Rectangle { width, .. } => {
            let est = measure_magnification(&shown.image, *width)?;
            ms.push(measured(
                "magnification",
                est.magnification,
                Some(est.uncertainty),
                Some(magnification(&setup)),
                "1",
            ));
        }
        ObjectSpec::Raster { .. } => {}
    }
    Ok(ms)
}
