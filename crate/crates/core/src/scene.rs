//! Object-plane transmission masks `T = |T| exp(i theta)`.
//!
//! Masks are sampled on a [`Grid`]; each sample stands for its whole cell.
//! A geometric boundary that falls on a cell boundary is therefore represented
//! exactly, and the scenario code picks pitches that make this happen.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{Grid, GridError};
use crate::io::pgm::{self, PgmError};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{what} lies outside the object grid (extent {lo:.3e}..{hi:.3e} m)")]
    OutsideGrid { what: String, lo: f64, hi: f64 },
    #[error("point separation {d:.3e} m is below two grid pitches ({pitch:.3e} m)")]
    PointsTooClose { d: f64, pitch: f64 },
    #[error("USAF element must be in 1..=6, got {0}")]
    BadElement(u8),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("raster: {0}")]
    Raster(#[from] PgmError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Complex transmission sampled on an object-plane grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMask {
    grid: Grid,
    amplitude: Vec<f64>,
    phase: Vec<f64>,
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

impl ObjectMask {
    pub fn new(grid: Grid, amplitude: Vec<f64>, phase: Vec<f64>) -> Result<Self, SceneError> {
        if amplitude.len() != grid.len() || phase.len() != grid.len() {
            return Err(SceneError::InvalidMask(format!(
                "expected {} samples, got {} amplitudes and {} phases",
                grid.len(),
                amplitude.len(),
                phase.len()
            )));
        }
        if let Some(a) = amplitude.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(SceneError::InvalidMask(format!("|T| = {a} outside [0, 1]")));
        }
        if phase.iter().any(|p| !p.is_finite()) {
            return Err(SceneError::InvalidMask("non-finite phase".into()));
        }
        let phase = phase.into_iter().map(wrap_phase).collect();
        Ok(Self { grid, amplitude, phase })
    }

    /// Build from complex samples. Moduli up to `1 + 1e-12` are clamped to 1.
    pub fn from_complex(grid: Grid, values: &[Complex64]) -> Result<Self, SceneError> {
        let mut amp = Vec::with_capacity(values.len());
        let mut ph = Vec::with_capacity(values.len());
        for v in values {
            let a = v.norm();
            if a > 1.0 + 1e-12 || !a.is_finite() {
                return Err(SceneError::InvalidMask(format!("|T| = {a} exceeds 1")));
            }
            amp.push(a.min(1.0));
            ph.push(if a > 0.0 { v.arg() } else { 0.0 });
        }
        Self::new(grid, amp, ph)
    }

    pub fn uniform(grid: Grid, amplitude: f64, phase: f64) -> Result<Self, SceneError> {
        Self::new(grid, vec![amplitude; grid.len()], vec![phase; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn complex_values(&self) -> Vec<Complex64> {
        self.amplitude
            .iter()
            .zip(&self.phase)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect()
    }

    /// Transmission of the cell containing `(x, y)`; zero outside the grid.
    pub fn sample(&self, x: f64, y: f64) -> Complex64 {
        match self.grid.cell_of(x, y) {
            Some((ix, iy)) => {
                let k = self.grid.index(ix, iy);
                Complex64::from_polar(self.amplitude[k], self.phase[k])
            }
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Sum of `|T|` times cell area.
    pub fn transmitted_area(&self) -> f64 {
        let p = self.grid.pitch();
        self.amplitude.iter().sum::<f64>() * p * p
    }

    /// Turn a binary amplitude mask into a pure phase object: cells with
    /// `|T| < 0.5` get phase `delta`, all cells get unit modulus.
    pub fn to_phase_object(&self, delta: f64) -> Result<Self, SceneError> {
        let phase = self.amplitude.iter().map(|&a| if a < 0.5 { delta } else { 0.0 }).collect();
        Self::new(self.grid, vec![1.0; self.grid.len()], phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BarOrientation {
    /// Bars run along y; the resolving cross-section is along x.
    Vertical,
    /// Bars run along x; the resolving cross-section is along y.
    Horizontal,
}

/// One element of a 1951 USAF chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UsafTriplet {
    pub group: i32,
    pub element: u8,
    pub orientation: BarOrientation,
}

impl UsafTriplet {
    pub fn new(group: i32, element: u8, orientation: BarOrientation) -> Result<Self, SceneError> {
        if !(1..=6).contains(&element) {
            return Err(SceneError::BadElement(element));
        }
        Ok(Self {
            group,
            element,
            orientation,
        })
    }

    /// Line width in metres: `500 um / 2^(group + (element - 1) / 6)`.
    pub fn line_width(&self) -> f64 {
        usaf_line_width(self.group, self.element)
    }
}

pub fn usaf_line_width(group: i32, element: u8) -> f64 {
    500e-6 / 2f64.powf(group as f64 + (element as f64 - 1.0) / 6.0)
}

fn check_inside(what: &str, lo: f64, hi: f64, extent: (f64, f64)) -> Result<(), SceneError> {
    // Half a nanometre of slack for boundaries that coincide with the grid edge.
    let eps = 5e-10;
    if lo < extent.0 - eps || hi > extent.1 + eps {
        return Err(SceneError::OutsideGrid {
            what: what.to_string(),
            lo: extent.0,
            hi: extent.1,
        });
    }
    Ok(())
}

/// Axis-aligned rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

fn binary_mask(grid: &Grid, rects: &[Rect]) -> Result<ObjectMask, SceneError> {
    let mut amp = vec![0.0; grid.len()];
    for iy in 0..grid.ny() {
        let y = grid.y(iy);
        for ix in 0..grid.nx() {
            let x = grid.x(ix);
            if rects.iter().any(|r| r.contains(x, y)) {
                amp[grid.index(ix, iy)] = 1.0;
            }
        }
    }
    ObjectMask::new(*grid, amp, vec![0.0; grid.len()])
}

/// Opaque for `x < x0`, fully transmitting for `x >= x0`.
pub fn make_knife_edge(x0: f64, grid: &Grid) -> Result<ObjectMask, SceneError> {
    let (lo, hi) = grid.x_extent();
    if !(x0 >= lo && x0 <= hi) {
        return Err(SceneError::OutsideGrid {
            what: format!("edge at x = {x0:.3e} m"),
            lo,
            hi,
        });
    }
    let r = Rect {
        x0,
        x1: f64::INFINITY,
        y0: f64::NEG_INFINITY,
        y1: f64::INFINITY,
    };
    binary_mask(grid, &[r])
}

/// Two unit impulses at `x = -d/2` and `x = +d/2` on the row nearest `y = 0`.
pub fn make_point_pair(d: f64, grid: &Grid) -> Result<ObjectMask, SceneError> {
    if !(d >= 2.0 * grid.pitch()) {
        return Err(SceneError::PointsTooClose { d, pitch: grid.pitch() });
    }
    let (lo, hi) = grid.x_extent();
    check_inside("point pair", -0.5 * d, 0.5 * d, (lo, hi))?;
    let (ylo, yhi) = grid.y_extent();
    check_inside("point pair row", 0.0, 0.0, (ylo, yhi))?;
    let iy = grid.nearest_iy(0.0);
    let mut amp = vec![0.0; grid.len()];
    for x in [-0.5 * d, 0.5 * d] {
        amp[grid.index(grid.nearest_ix(x), iy)] = 1.0;
    }
    ObjectMask::new(*grid, amp, vec![0.0; grid.len()])
}

/// Bars of width `w` and length `5 w` centered at the given offsets across
/// the bars, all centered on the optical axis along the bars.
fn make_bars(w: f64, centers: &[f64], orientation: BarOrientation, grid: &Grid, what: &str) -> Result<ObjectMask, SceneError> {
    let len = 5.0 * w;
    let across_lo = centers.iter().cloned().fold(f64::INFINITY, f64::min) - 0.5 * w;
    let across_hi = centers.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.5 * w;
    let (across_ext, along_ext) = match orientation {
        BarOrientation::Vertical => (grid.x_extent(), grid.y_extent()),
        BarOrientation::Horizontal => (grid.y_extent(), grid.x_extent()),
    };
    check_inside(what, across_lo, across_hi, across_ext)?;
    check_inside(what, -0.5 * len, 0.5 * len, along_ext)?;
    let rects: Vec<Rect> = centers
        .iter()
        .map(|&c| {
            let (a0, a1) = (c - 0.5 * w, c + 0.5 * w);
            let (l0, l1) = (-0.5 * len, 0.5 * len);
            match orientation {
                BarOrientation::Vertical => Rect {
                    x0: a0,
                    x1: a1,
                    y0: l0,
                    y1: l1,
                },
                BarOrientation::Horizontal => Rect {
                    x0: l0,
                    x1: l1,
                    y0: a0,
                    y1: a1,
                },
            }
        })
        .collect();
    binary_mask(grid, &rects)
}

/// Three transparent bars of width `w` at center spacing `2 w` on an opaque
/// background, the middle bar on the optical axis.
pub fn make_usaf_triplet(spec: UsafTriplet, grid: &Grid) -> Result<ObjectMask, SceneError> {
    let w = spec.line_width();
    make_bars(w, &[-2.0 * w, 0.0, 2.0 * w], spec.orientation, grid, "USAF triplet")
}

/// Two USAF-style bars (width `w`, gap `w`, length `5 w`) centered at `-w`
/// and `+w`, for continuous line-width sweeps.
pub fn make_bar_pair(w: f64, orientation: BarOrientation, grid: &Grid) -> Result<ObjectMask, SceneError> {
    make_bars(w, &[-w, w], orientation, grid, "bar pair")
}

/// Centered transparent rectangle on an opaque background.
pub fn make_rectangle(width: f64, height: f64, grid: &Grid) -> Result<ObjectMask, SceneError> {
    check_inside("rectangle", -0.5 * width, 0.5 * width, grid.x_extent())?;
    check_inside("rectangle", -0.5 * height, 0.5 * height, grid.y_extent())?;
    let r = Rect {
        x0: -0.5 * width,
        x1: 0.5 * width,
        y0: -0.5 * height,
        y1: 0.5 * height,
    };
    binary_mask(grid, &[r])
}

/// Unit-modulus mask with phase 0 for `x < x0` and `delta` for `x >= x0`.
pub fn make_phase_edge(x0: f64, delta: f64, grid: &Grid) -> Result<ObjectMask, SceneError> {
    let (lo, hi) = grid.x_extent();
    if !(x0 >= lo && x0 <= hi) {
        return Err(SceneError::OutsideGrid {
            what: format!("phase edge at x = {x0:.3e} m"),
            lo,
            hi,
        });
    }
    let mut phase = vec![0.0; grid.len()];
    for iy in 0..grid.ny() {
        for ix in 0..grid.nx() {
            if grid.x(ix) >= x0 {
                phase[grid.index(ix, iy)] = delta;
            }
        }
    }
    ObjectMask::new(*grid, vec![1.0; grid.len()], phase)
}

/// Load a binary grey map as an amplitude mask. Grey level maps linearly to
/// `|T|`, pitch is `physical_width / nx` and the grid is centered. Raster
/// row 0 becomes grid row 0.
pub fn load_raster(path: &Path, physical_width: f64) -> Result<ObjectMask, SceneError> {
    let img = pgm::read_greymap(path)?;
    let pitch = physical_width / img.width as f64;
    let grid = Grid::centered(pitch, img.width, img.height)?;
    let scale = 1.0 / img.maxval as f64;
    let amp = img.samples.iter().map(|&s| s as f64 * scale).collect();
    ObjectMask::new(grid, amp, vec![0.0; grid.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const UM: f64 = 1e-6;

    #[test]
    fn knife_edge_step() {
        let g = Grid::centered(5.0 * UM, 40, 3).unwrap();
        let x0 = 10.0 * UM;
        let m = make_knife_edge(x0, &g).unwrap();
        let at = |x: f64| m.sample(x, 0.0).norm();
        assert_eq!(at(x0 - 5.0 * UM), 0.0);
        assert_eq!(at(x0 + 5.0 * UM), 1.0);
        assert!(m.phase().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn knife_edge_mean_is_half_on_symmetric_grid() {
        let g = Grid::centered(3.0 * UM, 64, 4).unwrap();
        let m = make_knife_edge(0.0, &g).unwrap();
        let mean = m.amplitude().iter().sum::<f64>() / g.len() as f64;
        assert!((mean - 0.5).abs() <= 0.5 / 64.0);
    }

    #[test]
    fn knife_edge_outside_grid_is_error() {
        let g = Grid::centered(1.0 * UM, 10, 1).unwrap();
        assert!(matches!(make_knife_edge(20.0 * UM, &g), Err(SceneError::OutsideGrid { .. })));
    }

    #[test]
    fn point_pair_examples() {
        let g = Grid::centered(5.0 * UM, 81, 5).unwrap();
        let m = make_point_pair(180.0 * UM, &g).unwrap();
        let nonzero: Vec<_> = (0..g.len()).filter(|&k| m.amplitude()[k] > 0.0).collect();
        assert_eq!(nonzero.len(), 2);
        let xs: Vec<f64> = nonzero.iter().map(|&k| g.x(k % g.nx())).collect();
        assert_relative_eq!(xs[0], -90.0 * UM, epsilon = 1e-12);
        assert_relative_eq!(xs[1], 90.0 * UM, epsilon = 1e-12);
        assert_eq!(m.amplitude().iter().sum::<f64>(), 2.0);
        assert!(matches!(make_point_pair(9.0 * UM, &g), Err(SceneError::PointsTooClose { .. })));
    }

    #[test]
    fn usaf_widths() {
        let w = |g, e| UsafTriplet::new(g, e, BarOrientation::Vertical).unwrap().line_width() / UM;
        assert_relative_eq!(w(1, 1), 250.0, max_relative = 1e-12);
        assert_relative_eq!(w(0, 1), 500.0, max_relative = 1e-12);
        assert_relative_eq!(w(1, 2), 222.72, max_relative = 1e-4);
        assert!(UsafTriplet::new(1, 7, BarOrientation::Vertical).is_err());
        assert!(UsafTriplet::new(1, 0, BarOrientation::Vertical).is_err());
    }

    #[test]
    fn usaf_triplet_geometry() {
        let w = 250.0 * UM;
        let g = Grid::centered(w / 10.0, 120, 140).unwrap();
        let t = UsafTriplet::new(1, 1, BarOrientation::Vertical).unwrap();
        let m = make_usaf_triplet(t, &g).unwrap();
        // three bars of area w x 5w
        assert_relative_eq!(m.transmitted_area(), 3.0 * 5.0 * w * w, max_relative = 1e-9);
        let row: Vec<f64> = (0..g.nx()).map(|ix| m.sample(g.x(ix), 0.0).re).collect();
        let transitions = row.windows(2).filter(|p| p[0] != p[1]).count();
        assert_eq!(transitions, 6);
        assert_eq!(m.sample(0.0, 0.0).re, 1.0);
        assert_eq!(m.sample(w, 0.0).re, 0.0);
        assert_eq!(m.sample(2.0 * w, 0.0).re, 1.0);
        assert_eq!(m.sample(0.0, 2.6 * w).re, 0.0);

        let h = make_usaf_triplet(
            UsafTriplet {
                orientation: BarOrientation::Horizontal,
                ..t
            },
            &Grid::centered(w / 10.0, 140, 120).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(h.transmitted_area(), m.transmitted_area(), max_relative = 1e-12);
        let small = Grid::centered(w / 10.0, 40, 140).unwrap();
        assert!(make_usaf_triplet(t, &small).is_err());
    }

    #[test]
    fn phase_edge_examples() {
        let g = Grid::centered(2.0 * UM, 50, 2).unwrap();
        let m = make_phase_edge(0.0, PI, &g).unwrap();
        assert!((m.sample(-3.0 * UM, 0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((m.sample(3.0 * UM, 0.0) - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        let mean: Complex64 = m.complex_values().iter().sum::<Complex64>() / g.len() as f64;
        assert!(mean.norm() < 1e-12);
        let flat = make_phase_edge(0.0, 0.0, &g).unwrap();
        assert_eq!(flat, ObjectMask::uniform(g, 1.0, 0.0).unwrap());
        assert!(m.amplitude().iter().all(|&a| a == 1.0));
    }

    #[test]
    fn phase_is_wrapped_into_half_open_interval() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert_relative_eq!(wrap_phase(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_out_of_range_amplitude() {
        let g = Grid::centered(1.0, 2, 1).unwrap();
        assert!(ObjectMask::new(g, vec![0.5, 1.5], vec![0.0; 2]).is_err());
        assert!(ObjectMask::new(g, vec![0.5], vec![0.0; 2]).is_err());
    }

    proptest! {
        #[test]
        fn triplet_area_stable_under_refinement(group in 0i32..3, element in 1u8..=6, k in 2usize..12) {
            let t = UsafTriplet::new(group, element, BarOrientation::Vertical).unwrap();
            let w = t.line_width();
            let pitch = w / (2 * k) as f64;
            let n = 16 * k;
            let coarse = make_usaf_triplet(t, &Grid::centered(pitch, n, n).unwrap()).unwrap();
            let fine = make_usaf_triplet(t, &Grid::centered(pitch / 2.0, 2 * n, 2 * n).unwrap()).unwrap();
            let diff = (coarse.transmitted_area() - fine.transmitted_area()).abs();
            prop_assert!(diff < pitch * pitch);
            for &a in coarse.amplitude().iter().chain(fine.amplitude()) {
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }

        #[test]
        fn knife_edge_area_stable_under_refinement(x0_frac in -0.4..0.4f64) {
            let pitch = 4.0 * UM;
            let n = 50;
            let x0 = x0_frac * n as f64 * pitch;
            let a = make_knife_edge(x0, &Grid::centered(pitch, n, 1).unwrap()).unwrap().transmitted_area() / pitch;
            let b = make_knife_edge(x0, &Grid::centered(pitch / 2.0, 2 * n, 2).unwrap()).unwrap().transmitted_area() / pitch;
            prop_assert!((a - b).abs() < pitch);
        }
    }
}
