//! Regular sampling grids shared by the object plane and the camera plane.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid pitch must be finite and positive, got {0}")]
    BadPitch(f64),
    #[error("grid must have at least one sample per axis, got {nx}x{ny}")]
    Empty { nx: usize, ny: usize },
    #[error("grid origin must be finite")]
    BadOrigin,
}

/// Square-pitch sampling of a plane.
///
/// `origin` is the position of sample `(0, 0)`; sample `(ix, iy)` sits at
/// `origin + (ix, iy) * pitch`. Each sample owns the cell of side `pitch`
/// centered on it, so the grid covers `[origin - pitch/2, origin + (n - 1/2) pitch]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    origin: (f64, f64),
    pitch: f64,
    nx: usize,
    ny: usize,
}

/// Camera-plane sampling.
pub type CameraGrid = Grid;

impl Grid {
    pub fn new(origin: (f64, f64), pitch: f64, nx: usize, ny: usize) -> Result<Self, GridError> {
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(GridError::BadPitch(pitch));
        }
        if nx == 0 || ny == 0 {
            return Err(GridError::Empty { nx, ny });
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(GridError::BadOrigin);
        }
        Ok(Self { origin, pitch, nx, ny })
    }

    /// Grid symmetric about the optical axis. With an even sample count the
    /// axis falls on a cell boundary; with an odd count it falls on a sample.
    pub fn centered(pitch: f64, nx: usize, ny: usize) -> Result<Self, GridError> {
        let ox = -(nx.saturating_sub(1) as f64) * 0.5 * pitch;
        let oy = -(ny.saturating_sub(1) as f64) * 0.5 * pitch;
        Self::new((ox, oy), pitch, nx, ny)
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        self.origin.0 + ix as f64 * self.pitch
    }

    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        self.origin.1 + iy as f64 * self.pitch
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|i| self.y(i)).collect()
    }

    /// Outer cell boundaries `(x_min, x_max)`.
    pub fn x_extent(&self) -> (f64, f64) {
        (self.x(0) - 0.5 * self.pitch, self.x(self.nx - 1) + 0.5 * self.pitch)
    }

    pub fn y_extent(&self) -> (f64, f64) {
        (self.y(0) - 0.5 * self.pitch, self.y(self.ny - 1) + 0.5 * self.pitch)
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Index of the cell containing `(x, y)`, if any.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.origin.0) / self.pitch + 0.5).floor();
        let fy = ((y - self.origin.1) / self.pitch + 0.5).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    /// Sample nearest to `x` along the x axis, clamped to the grid.
    pub fn nearest_ix(&self, x: f64) -> usize {
        let f = ((x - self.origin.0) / self.pitch).round();
        f.clamp(0.0, (self.nx - 1) as f64) as usize
    }

    pub fn nearest_iy(&self, y: f64) -> usize {
        let f = ((y - self.origin.1) / self.pitch).round();
        f.clamp(0.0, (self.ny - 1) as f64) as usize
    }
}

/// Real-valued image on a grid, row-major with `y` as the slow axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl ScalarMap {
    pub fn new(grid: Grid, data: Vec<f64>) -> Self {
        assert_eq!(grid.len(), data.len(), "data length must match grid");
        Self { grid, data }
    }

    pub fn filled(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.data[self.grid.index(ix, iy)]
    }

    pub fn row(&self, iy: usize) -> &[f64] {
        let nx = self.grid.nx();
        &self.data[iy * nx..(iy + 1) * nx]
    }

    pub fn column(&self, ix: usize) -> Vec<f64> {
        (0..self.grid.ny()).map(|iy| self.get(ix, iy)).collect()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Point reflection through the grid center (both axes reversed).
    pub fn rotated_half_turn(&self) -> Self {
        let mut data = self.data.clone();
        data.reverse();
        Self { grid: self.grid, data }
    }
}
