use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest window the solver accepts.
pub const MIN_NODES: usize = 64;

/// A window of an absolute uniform lattice `x_k = origin + k·h`.
///
/// Windows only ever move by whole nodes, so positions measured on
/// different snapshots share one coordinate system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub origin: f64,
    pub h: f64,
    /// Lattice index of the leftmost node.
    pub first_index: i64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(origin: f64, h: f64, first_index: i64, n: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::config(format!("grid spacing must be positive, got {h}")));
        }
        if !origin.is_finite() {
            return Err(Error::config("grid origin must be finite"));
        }
        if n < MIN_NODES {
            return Err(Error::config(format!("grid needs at least {MIN_NODES} nodes, got {n}")));
        }
        Ok(Self {
            origin,
            h,
            first_index,
            n,
        })
    }

    /// The lattice nodes anchored at `anchor` lying in `[x_left, x_right]`.
    pub fn covering(x_left: f64, x_right: f64, h: f64, anchor: f64) -> Result<Self> {
        if !(x_left < x_right) {
            return Err(Error::config(format!("empty window [{x_left}, {x_right}]")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::config(format!("grid spacing must be positive, got {h}")));
        }
        let lo = ((x_left - anchor) / h - 1e-9).ceil() as i64;
        let hi = ((x_right - anchor) / h + 1e-9).floor() as i64;
        if hi < lo {
            return Err(Error::config("window contains no lattice node"));
        }
        Self::new(anchor, h, lo, (hi - lo + 1) as usize)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.origin + self.h * (self.first_index + i as i64) as f64
    }

    pub fn x_left(&self) -> f64 {
        self.x(0)
    }

    pub fn x_right(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn last_index(&self) -> i64 {
        self.first_index + self.n as i64 - 1
    }

    /// Position of lattice index `k` in this window, if inside.
    pub fn local(&self, k: i64) -> Option<usize> {
        (k >= self.first_index && k <= self.last_index()).then(|| (k - self.first_index) as usize)
    }

    /// Same origin and spacing, so indices are comparable.
    pub fn same_lattice(&self, other: &Grid1D) -> bool {
        self.origin == other.origin && self.h == other.h
    }
}

/// Solution values on a grid at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProfile {
    pub grid: Grid1D,
    pub t: f64,
    pub values: Vec<f64>,
}

impl GridProfile {
    pub fn new(grid: Grid1D, t: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Consistency(format!(
                "profile has {} values for {} nodes",
                values.len(),
                grid.n
            )));
        }
        Ok(Self { grid, t, values })
    }

    pub fn constant(grid: Grid1D, t: f64, c: f64) -> Self {
        Self {
            grid,
            t,
            values: vec![c; grid.n],
        }
    }

    /// Value at absolute lattice index `k`, extended by the edge values
    /// outside the window.
    pub fn at_index_extended(&self, k: i64) -> f64 {
        if k < self.grid.first_index {
            self.values[0]
        } else if k > self.grid.last_index() {
            self.values[self.grid.n - 1]
        } else {
            self.values[(k - self.grid.first_index) as usize]
        }
    }

    /// Largest increase `u[i+1] − u[i]`, zero for a nonincreasing profile.
    pub fn monotonicity_violation(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `α·H(a − x)` with `H(0) = 1`.
pub fn heaviside_ic(grid: Grid1D, a: f64, alpha: f64) -> Result<GridProfile> {
    if !(grid.x_left() < a && a < grid.x_right()) {
        return Err(Error::config(format!(
            "step position {a} outside the window ({}, {})",
            grid.x_left(),
            grid.x_right()
        )));
    }
    // a node within rounding of a counts as x = a
    let tol = 1e-9 * grid.h;
    let values = (0..grid.n)
        .map(|i| if grid.x(i) <= a + tol { alpha } else { 0.0 })
        .collect();
    GridProfile::new(grid, 0.0, values)
}
