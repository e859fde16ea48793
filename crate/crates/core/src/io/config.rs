//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`, `#` starts a comment. Lengths need a unit suffix
//! (`nm`, `um`, `µm`, `mm`, `m`). Relative paths are taken relative to the
//! config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::acquisition::{NoiseModel, DEFAULT_PHASE_STEPS};
use crate::io::pgm::DisplayOrientation;
use crate::optics::{SetupConfig, SetupError};
use crate::pipeline::{AcquisitionSpec, Sampling};
use crate::scenario;
use crate::scene::{BarOrientation, UsafTriplet};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: `{key}` needs a length unit (nm, um, mm or m)")]
    MissingUnit { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    BadValue { line: usize, key: String, reason: String },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("unknown keys: {}", .0.iter().map(|(l, k)| format!("`{k}` (line {l})")).collect::<Vec<_>>().join(", "))]
    UnknownKeys(Vec<(usize, String)>),
    #[error("unknown scenario `{0}` (see --list-scenarios)")]
    UnknownScenario(String),
    #[error("`{key}` refers to missing file {path}")]
    MissingFile { key: String, path: PathBuf },
    #[error("`{0}` is required for this object")]
    MissingKey(&'static str),
    #[error(transparent)]
    Setup(#[from] SetupError),
}

/// Object under test.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectSpec {
    KnifeEdge { edge_position: f64 },
    PointPair { separation: f64 },
    Usaf { triplet: UsafTriplet },
    BarPair { line_width: f64 },
    Rectangle { width: f64, height: f64 },
    PhaseEdge { edge_position: f64, delta: f64 },
    Raster { path: PathBuf, width: f64 },
}

/// Explicit camera grid; unset fields are chosen by the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CameraSpec {
    pub pitch: Option<f64>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: String,
    pub setup: SetupConfig,
    pub object: ObjectSpec,
    pub camera: CameraSpec,
    pub acquisition: AcquisitionSpec,
    pub sampling: Sampling,
    pub w_p_list: Option<Vec<f64>>,
    pub emit_frames: bool,
    pub display_orientation: DisplayOrientation,
    #[serde(skip)]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Keys given explicitly in the file.
    #[serde(skip)]
    pub explicit: BTreeSet<String>,
}

impl RunConfig {
    /// Defaults: setup with 810/1550 nm, 150/75 mm lenses and a 300 µm pump.
    pub fn new(scenario: &str) -> Result<Self, ConfigError> {
        if !scenario::is_registered(scenario) {
            return Err(ConfigError::UnknownScenario(scenario.to_string()));
        }
        Ok(Self {
            scenario: scenario.to_string(),
            setup: SetupConfig::setup1(300e-6)?,
            object: ObjectSpec::KnifeEdge { edge_position: 0.0 },
            camera: CameraSpec::default(),
            acquisition: AcquisitionSpec::default(),
            sampling: Sampling::default(),
            w_p_list: None,
            emit_frames: false,
            display_orientation: DisplayOrientation::Upright,
            output_dir: PathBuf::from("out"),
            threads: None,
            explicit: BTreeSet::new(),
        })
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// SHA-256 over everything that affects the outputs (not the output
    /// directory or thread count).
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_scenario(mut self, name: &str) -> Result<Self, ConfigError> {
        if !scenario::is_registered(name) {
            return Err(ConfigError::UnknownScenario(name.to_string()));
        }
        self.scenario = name.to_string();
        Ok(self)
    }
}

const KEYS: &[&str] = &[
    "scenario",
    "setup",
    "lambda_d",
    "lambda_u",
    "f_c",
    "f_u",
    "w_p",
    "crystal_half_extent_x",
    "crystal_half_extent_y",
    "object",
    "edge_position",
    "separation",
    "line_width",
    "rect_width",
    "rect_height",
    "usaf_group",
    "usaf_element",
    "usaf_orientation",
    "phase_delta",
    "raster_path",
    "raster_width",
    "camera_pitch",
    "camera_nx",
    "camera_ny",
    "camera_per_sigma",
    "object_per_sigma",
    "profile_rows",
    "n_phases",
    "noise",
    "mean_counts",
    "seed",
    "i0",
    "w_p_list",
    "emit_frames",
    "display_orientation",
    "output_dir",
    "threads",
];

/// Parse a length such as `810nm`, `2.417 mm` or `300µm` into metres.
pub fn parse_length(text: &str) -> Result<f64, Option<String>> {
    let t = text.trim();
    // Divide by exact powers of ten so `810nm` is the double nearest 810e-9.
    const UNITS: [(&str, f64); 6] = [("nm", 1e9), ("um", 1e6), ("µm", 1e6), ("μm", 1e6), ("mm", 1e3), ("m", 1.0)];
    let Some((num, per_metre)) = UNITS.iter().find_map(|(u, p)| t.strip_suffix(u).map(|n| (n.trim(), *p))) else {
        return Err(match t.parse::<f64>() {
            Ok(_) => None,
            Err(_) => Some(format!("`{t}` is not a length")),
        });
    };
    let v: f64 = num.parse().map_err(|_| Some(format!("`{num}` is not a number")))?;
    if !v.is_finite() {
        return Err(Some("not finite".into()));
    }
    Ok(v / per_metre)
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn bad(&self, reason: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            line: self.line,
            key: self.key.to_string(),
            reason: reason.into(),
        }
    }

    fn length(&self) -> Result<f64, ConfigError> {
        parse_length(self.value).map_err(|e| match e {
            None => ConfigError::MissingUnit {
                line: self.line,
                key: self.key.to_string(),
            },
            Some(r) => self.bad(r),
        })
    }

    fn lengths(&self) -> Result<Vec<f64>, ConfigError> {
        self.value
            .split(',')
            .map(|part| {
                parse_length(part).map_err(|e| match e {
                    None => ConfigError::MissingUnit {
                        line: self.line,
                        key: self.key.to_string(),
                    },
                    Some(r) => self.bad(r),
                })
            })
            .collect()
    }

    fn number<T: std::str::FromStr>(&self) -> Result<T, ConfigError> {
        self.value
            .parse()
            .map_err(|_| self.bad(format!("`{}` is not a valid number", self.value)))
    }

    fn float(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.number()?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.bad("not finite"))
        }
    }

    fn flag(&self) -> Result<bool, ConfigError> {
        match self.value {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.bad("expected true or false")),
        }
    }

    fn path(&self, base: &Path) -> PathBuf {
        let p = PathBuf::from(self.value);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base)
}

/// Parse config text; relative paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    let mut unknown = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if !KEYS.contains(&key) {
            unknown.push((line, key.to_string()));
            continue;
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
        entries.push(Entry { line, key, value });
    }
    if !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }
    let get = |k: &str| entries.iter().find(|e| e.key == k);

    let scenario = get("scenario").map(|e| e.value).unwrap_or("image");
    let mut cfg = RunConfig::new(scenario)?;
    cfg.explicit = seen;

    // Setup: preset first, then individual overrides.
    let mut setup = match get("setup") {
        None => cfg.setup,
        Some(e) => match e.value {
            "1" | "setup1" => SetupConfig::setup1(300e-6)?,
            "2" | "setup2" => SetupConfig::setup2(300e-6)?,
            _ => return Err(e.bad("expected setup1 or setup2")),
        },
    };
    let field = |k: &str, current: f64| -> Result<f64, ConfigError> { get(k).map_or(Ok(current), |e| e.length()) };
    setup = SetupConfig::new(
        field("lambda_d", setup.lambda_d())?,
        field("lambda_u", setup.lambda_u())?,
        field("f_c", setup.f_c())?,
        field("f_u", setup.f_u())?,
        field("w_p", setup.w_p())?,
    )?;
    match (get("crystal_half_extent_x"), get("crystal_half_extent_y")) {
        (None, None) => {}
        (Some(x), Some(y)) => setup = setup.with_crystal_half_extent(x.length()?, y.length()?)?,
        (Some(e), None) | (None, Some(e)) => return Err(e.bad("crystal extent needs both x and y")),
    }
    cfg.setup = setup;

    let length_or = |k: &str, d: f64| -> Result<f64, ConfigError> { get(k).map_or(Ok(d), |e| e.length()) };
    if let Some(e) = get("object") {
        cfg.object = match e.value {
            "knife_edge" => ObjectSpec::KnifeEdge {
                edge_position: length_or("edge_position", 0.0)?,
            },
            "point_pair" => ObjectSpec::PointPair {
                separation: get("separation").ok_or(ConfigError::MissingKey("separation"))?.length()?,
            },
            "bar_pair" => ObjectSpec::BarPair {
                line_width: get("line_width").ok_or(ConfigError::MissingKey("line_width"))?.length()?,
            },
            "rectangle" => ObjectSpec::Rectangle {
                width: get("rect_width").ok_or(ConfigError::MissingKey("rect_width"))?.length()?,
                height: get("rect_height").ok_or(ConfigError::MissingKey("rect_height"))?.length()?,
            },
            "usaf" => {
                let group = get("usaf_group").ok_or(ConfigError::MissingKey("usaf_group"))?;
                let element = get("usaf_element").ok_or(ConfigError::MissingKey("usaf_element"))?;
                let orientation = match get("usaf_orientation").map(|e| (e, e.value)) {
                    None | Some((_, "vertical")) => BarOrientation::Vertical,
                    Some((_, "horizontal")) => BarOrientation::Horizontal,
                    Some((e, _)) => return Err(e.bad("expected vertical or horizontal")),
                };
                let triplet =
                    UsafTriplet::new(group.number()?, element.number()?, orientation).map_err(|err| element.bad(err.to_string()))?;
                ObjectSpec::Usaf { triplet }
            }
            "phase_edge" => ObjectSpec::PhaseEdge {
                edge_position: length_or("edge_position", 0.0)?,
                delta: get("phase_delta").map_or(Ok(std::f64::consts::PI), |e| e.float())?,
            },
            "raster" => {
                let p = get("raster_path").ok_or(ConfigError::MissingKey("raster_path"))?;
                let path = p.path(base);
                if !path.is_file() {
                    return Err(ConfigError::MissingFile {
                        key: "raster_path".into(),
                        path,
                    });
                }
                let width = get("raster_width").ok_or(ConfigError::MissingKey("raster_width"))?.length()?;
                ObjectSpec::Raster { path, width }
            }
            _ => return Err(e.bad("unknown object kind")),
        };
    }

    if let Some(e) = get("camera_pitch") {
        cfg.camera.pitch = Some(e.length()?);
    }
    for (k, slot) in [("camera_nx", &mut cfg.camera.nx), ("camera_ny", &mut cfg.camera.ny)] {
        if let Some(e) = get(k) {
            let n: usize = e.number()?;
            if n == 0 {
                return Err(e.bad("must be positive"));
            }
            *slot = Some(n);
        }
    }
    if let Some(e) = get("camera_per_sigma") {
        cfg.sampling.camera_per_sigma = positive(e)?;
    }
    if let Some(e) = get("object_per_sigma") {
        cfg.sampling.object_per_sigma = positive(e)?;
    }
    if let Some(e) = get("profile_rows") {
        cfg.sampling.profile_rows = e.number()?;
    }

    let acq = &mut cfg.acquisition;
    acq.n_phases = get("n_phases").map_or(Ok(DEFAULT_PHASE_STEPS), |e| e.number())?;
    if acq.n_phases < 3 {
        return Err(get("n_phases")
            .map(|e| e.bad("at least 3 phases are needed"))
            .unwrap_or(ConfigError::MissingKey("n_phases")));
    }
    if let Some(e) = get("seed") {
        acq.seed = e.number()?;
    }
    if let Some(e) = get("i0") {
        acq.i0 = positive(e)?;
    }
    acq.noise = match get("noise").map(|e| (e, e.value)) {
        None | Some((_, "none")) => NoiseModel::None,
        Some((_, "poisson")) => {
            let mean_counts = get("mean_counts").ok_or(ConfigError::MissingKey("mean_counts"))?;
            NoiseModel::Poisson {
                mean_counts: positive(mean_counts)?,
            }
        }
        Some((e, _)) => return Err(e.bad("expected none or poisson")),
    };

    if let Some(e) = get("w_p_list") {
        let list = e.lengths()?;
        if list.iter().any(|&w| !(w > 0.0)) {
            return Err(e.bad("pump waists must be positive"));
        }
        cfg.w_p_list = Some(list);
    }
    if let Some(e) = get("emit_frames") {
        cfg.emit_frames = e.flag()?;
    }
    if let Some(e) = get("display_orientation") {
        cfg.display_orientation = match e.value {
            "upright" => DisplayOrientation::Upright,
            "physical" => DisplayOrientation::Physical,
            _ => return Err(e.bad("expected upright or physical")),
        };
    }
    if let Some(e) = get("output_dir") {
        cfg.output_dir = e.path(base);
    }
    if let Some(e) = get("threads") {
        let n: usize = e.number()?;
        if n == 0 {
            return Err(e.bad("must be positive"));
        }
        cfg.threads = Some(n);
    }
    Ok(cfg)
}

fn positive(e: &Entry) -> Result<f64, ConfigError> {
    let v = e.float()?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(e.bad("must be positive"))
    }
}
