//! Resolution metrics on reconstructed images.

mod esf;
mod lsq;
mod studies;
mod two_slit;

use thiserror::Error;

use crate::grid::ScalarMap;

pub use esf::{fit_esf, fit_gaussian, half_transition_24_76, EsfFit, GaussianFit};
pub use lsq::{gauss_newton, LsqOptions, LsqResult};
pub(crate) use studies::cross_section;
pub use studies::{
    bar_pair_metrics, esf_sigma_sweep, knife_edge_study, magnification_study, measure_magnification, min_resolvable_linewidth,
    phase_edge_sigma, point_pair_study, triplet_study, EsfSweepRow, MagnificationEstimate, MinResolvable, PhaseEdgeResult, ProfileStudy,
    UsafPick,
};
pub use two_slit::{two_slit_metrics, TwoSlitMetrics, RAYLEIGH_RATIO};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("profile has no edge: swing {swing:.3e} is below 5% of plateau {plateau:.3e}")]
    NoEdge { swing: f64, plateau: f64 },
    #[error("fit did not converge after {iterations} iterations (last iterate {last:?})")]
    NotConverged { iterations: usize, last: Vec<f64> },
    #[error("profile has {0} samples, too few to analyse")]
    TooFewSamples(usize),
    #[error("profile has no positive maximum")]
    NoPeak,
    #[error("edges not detected: {0}")]
    EdgesNotDetected(String),
    #[error("threshold must lie in (0, 1), got {0}")]
    BadThreshold(f64),
    #[error("ratio does not cross the threshold between {lo:.3e} m and {hi:.3e} m")]
    NoCrossing { lo: f64, hi: f64 },
}

/// 1-D cross-section, `x` increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl Profile {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn row(map: &ScalarMap, iy: usize) -> Self {
        Self {
            x: map.grid.xs(),
            v: map.row(iy).to_vec(),
        }
    }

    pub fn column(map: &ScalarMap, ix: usize) -> Self {
        Self {
            x: map.grid.ys(),
            v: map.column(ix),
        }
    }

    /// Row through the middle of the map.
    pub fn center_row(map: &ScalarMap) -> Self {
        Self::row(map, map.grid.ny() / 2)
    }

    pub fn center_column(map: &ScalarMap) -> Self {
        Self::column(map, map.grid.nx() / 2)
    }

    pub fn slice(&self, lo: usize, hi: usize) -> Self {
        Self {
            x: self.x[lo..hi].to_vec(),
            v: self.v[lo..hi].to_vec(),
        }
    }
}
