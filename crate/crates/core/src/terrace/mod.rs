//! Reconstruction of the propagating terrace from a simulated timeline.

pub mod detect;
pub mod drift;
pub mod front;
pub mod level;
pub mod plateau;
pub mod sandwich;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use detect::{detect_terrace, FloorRecord, LevelSummary, TerraceDecomposition};
pub use drift::{drift, DriftSeries};
pub use front::{extract_front, recentre, sample, smooth_level_position, FrontKind, FrontRecord, PhaseProfile};
pub use level::{default_fit_window, level_position, linear_fit, trace_level, LevelSetTrace, SpeedFit};
pub use plateau::{front_width_margin, plateau_check, PlateauEntry, PlateauReport};
pub use sandwich::{speed_sandwich, SandwichReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerraceSettings {
    /// λ grid is `α·i/lambda_grid`, `i = 1..lambda_grid`.
    pub lambda_grid: usize,
    /// Inclusive period range for speed fits; default is the last half.
    pub fit_window: Option<(u64, u64)>,
    pub speed_gap_factor: f64,
    pub speed_gap_rel: f64,
    /// Smaller clusters are reported as unexplained bands.
    pub min_cluster: usize,
    pub fp_match_tol: f64,
    pub floor_tol: f64,
    pub mono_tol: f64,
    pub flat_tol: f64,
    /// Half-width of the recentring grid, in space units.
    pub recentre_halfwidth: f64,
    pub speed_floor: f64,
    pub sandwich_slack: f64,
    pub plateau_eps: f64,
    pub plateau_late: usize,
}

impl Default for TerraceSettings {
    fn default() -> Self {
        Self {
            lambda_grid: 64,
            fit_window: None,
            speed_gap_factor: 3.0,
            speed_gap_rel: 1e-3,
            min_cluster: 3,
            fp_match_tol: 1e-3,
            floor_tol: 1e-2,
            mono_tol: 1e-9,
            flat_tol: 1e-6,
            recentre_halfwidth: 60.0,
            speed_floor: 1e-6,
            sandwich_slack: 0.05,
            plateau_eps: 1e-2,
            plateau_late: 10,
        }
    }
}

impl TerraceSettings {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid < 4 {
            return Err(Error::config("lambda_grid must be at least 4"));
        }
        if let Some((a, b)) = self.fit_window {
            if a >= b {
                return Err(Error::config("fit window must span at least two periods"));
            }
        }
        let positive = [
            ("speed_gap_rel", self.speed_gap_rel),
            ("fp_match_tol", self.fp_match_tol),
            ("floor_tol", self.floor_tol),
            ("flat_tol", self.flat_tol),
            ("recentre_halfwidth", self.recentre_halfwidth),
            ("speed_floor", self.speed_floor),
            ("plateau_eps", self.plateau_eps),
        ];
        for (k, v) in positive {
            if !(v > 0.0) {
                return Err(Error::config(format!("{k} must be positive")));
            }
        }
        if self.min_cluster == 0 {
            return Err(Error::config("min_cluster must be positive"));
        }
        Ok(())
    }
}
