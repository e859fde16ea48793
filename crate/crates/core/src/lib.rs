//! Forward simulation and resolution analysis for quantum imaging with
//! undetected photons.
//!
//! The object is illuminated by one photon of a down-converted pair and the
//! image is read out from interference of its partner on a camera. Spatial
//! resolution is limited by how well the transverse momenta of the two photons
//! are correlated, which a Gaussian pump of waist `w_p` sets.
//!
//! Pipeline, one module per stage:
//!
//! 1. [`optics`]: setup parameters and closed-form optics (magnification,
//!    edge-spread widths, momentum/position mapping, correlation kernel).
//! 2. [`scene`]: object transmission masks (knife edges, point pairs, USAF
//!    bars, phase edges, rasters).
//! 3. [`engine`]: complex response map, intensity frames and a brute-force
//!    momentum-sum oracle.
//! 4. [`acquisition`]: phase-stepped frame stacks with optional shot noise,
//!    per-pixel sinusoid reconstruction.
//! 5. [`analysis`]: edge-spread fits, two-slit ratio and contrast,
//!    minimum resolvable line width, magnification measurement.
//! 6. [`io`] and [`scenario`]: configuration, grey maps, tables and the named
//!    figure scenarios behind the `qiup` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod analysis;
pub mod engine;
pub mod grid;
pub mod io;
pub mod optics;
pub mod pipeline;
pub mod scenario;
pub mod scene;

mod error;

pub use error::Error;
