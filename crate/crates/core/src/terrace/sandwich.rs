//! Fitted level speeds against the bound `2√K̂`.

use serde::{Deserialize, Serialize};

use super::level::LevelSetTrace;
use crate::error::Result;
use crate::nonlinearity::{lipschitz_bound, PeriodicNonlinearity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub lipschitz: f64,
    pub c_upper_bound: f64,
    pub slack: f64,
    /// Slowest fitted speed; `None` when no level was fitted.
    pub c_lower_obs: Option<f64>,
    pub c_max_obs: Option<f64>,
    /// `(λ, speed)` above the bound plus slack.
    pub violations: Vec<(f64, f64)>,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `K̂` is sampled on `[0, u_cap]`.
pub fn speed_sandwich(
    traces: &[LevelSetTrace],
    f: &PeriodicNonlinearity,
    u_cap: f64,
    slack: f64,
) -> Result<SandwichReport> {
    let k = lipschitz_bound(f, u_cap, 129, 2049)?;
    let bound = 2.0 * k.sqrt();
    let speeds: Vec<(f64, f64)> = traces
        .iter()
        .filter_map(|t| t.speed().map(|s| (t.lambda, s)))
        .collect();
    Ok(SandwichReport {
        lipschitz: k,
        c_upper_bound: bound,
        slack,
        c_lower_obs: speeds.iter().map(|s| s.1).reduce(f64::min),
        c_max_obs: speeds.iter().map(|s| s.1).reduce(f64::max),
        violations: speeds.into_iter().filter(|(_, s)| *s > bound + slack).collect(),
    })
}
