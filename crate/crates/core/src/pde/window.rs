//! Following window: the truncated domain moves with the leading front in
//! whole-node steps.

use serde::{Deserialize, Serialize};

use super::grid::{GridProfile, MIN_NODES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowPolicy {
    pub enabled: bool,
    /// Level (as a fraction of α) whose rightmost crossing marks the leading edge.
    pub lead_level: f64,
    /// Distance kept between the leading edge and the right boundary.
    pub margin: f64,
    /// Shift once the distance drops below `shift_trigger · margin`.
    pub shift_trigger: f64,
    /// Converged plateau kept behind the left edge of non-plateau territory.
    pub left_buffer: f64,
    /// Left nodes are dropped only where `|u − ω(α, t)|` is below this.
    pub plateau_tol: f64,
    /// Steps between window checks.
    pub check_every: u64,
    pub n_max: usize,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            lead_level: 1e-3,
            margin: 40.0,
            shift_trigger: 0.5,
            left_buffer: 10.0,
            plateau_tol: 1e-6,
            check_every: 16,
            n_max: 4_000_000,
        }
    }
}

impl WindowPolicy {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("lead_level", self.lead_level > 0.0 && self.lead_level < 1.0),
            ("margin", self.margin > 0.0),
            ("shift_trigger", self.shift_trigger > 0.0 && self.shift_trigger < 1.0),
            ("left_buffer", self.left_buffer >= 0.0),
            ("plateau_tol", self.plateau_tol > 0.0),
            ("check_every", self.check_every > 0),
            ("n_max", self.n_max >= MIN_NODES),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::config(format!("window policy: invalid {name}")));
            }
        }
        Ok(())
    }
}

/// One window move, in the order applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowEvent {
    pub period: u64,
    pub step: u64,
    pub t: f64,
    /// Nodes removed at the left / added at the right or left.
    pub dropped_left: usize,
    pub added_right: usize,
    pub added_left: usize,
    pub x_left: f64,
    pub x_right: f64,
    pub n: usize,
}

/// Applies the policy to `state`, returning the move if one was made.
///
/// `plateau` is `ω(α, t)` at the current instant; `clamped_left` says
/// whether the left boundary is pinned to it (only then may plateau nodes
/// be dropped or added).
pub fn apply_policy(
    state: &mut GridProfile,
    policy: &WindowPolicy,
    alpha: f64,
    plateau: f64,
    clamped_left: bool,
    period: u64,
    step: u64,
) -> Result<Option<WindowEvent>> {
    if !policy.enabled {
        return Ok(None);
    }
    let h = state.grid.h;
    let n = state.grid.n;
    let lead = policy.lead_level * alpha;
    let Some(i_lead) = state.values.iter().rposition(|v| *v > lead) else {
        return Ok(None);
    };
    let gap = state.grid.x_right() - state.grid.x(i_lead);
    let mut added_right = 0;
    if gap < policy.shift_trigger * policy.margin {
        added_right = ((policy.margin - gap) / h).ceil().max(1.0) as usize;
    }

    let mut dropped_left = 0;
    let mut added_left = 0;
    if clamped_left {
        let settled = state
            .values
            .iter()
            .position(|v| (v - plateau).abs() > policy.plateau_tol)
            .unwrap_or(n);
        let buffer = (policy.left_buffer / h).ceil() as usize;
        if settled < buffer / 2 {
            // unsettled territory reached the boundary: grow to the left
            added_left = buffer - settled;
        } else if added_right > 0 {
            dropped_left = settled.saturating_sub(buffer);
        }
    }
    if added_right == 0 && added_left == 0 {
        return Ok(None);
    }
    let new_n = n + added_right + added_left - dropped_left;
    let new_n = new_n.max(MIN_NODES);
    if new_n > policy.n_max {
        return Err(Error::MemoryBudget {
            needed: new_n,
            budget: policy.n_max,
        });
    }
    let dropped_left = (n + added_right + added_left).saturating_sub(new_n).min(dropped_left);
    if dropped_left > 0 {
        state.values.drain(..dropped_left);
    }
    if added_left > 0 {
        state
            .values
            .splice(0..0, std::iter::repeat_n(plateau, added_left));
    }
    state.values.extend(std::iter::repeat_n(0.0, added_right));
    state.grid.first_index += dropped_left as i64 - added_left as i64;
    state.grid.n = state.values.len();
    Ok(Some(WindowEvent {
        period,
        step,
        t: state.t,
        dropped_left,
        added_right,
        added_left,
        x_left: state.grid.x_left(),
        x_right: state.grid.x_right(),
        n: state.grid.n,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::grid::Grid1D;

    fn front(first: i64, n: usize, edge: i64) -> GridProfile {
        let g = Grid1D::new(0.0, 0.5, first, n).unwrap();
        let values = (0..n)
            .map(|i| if first + (i as i64) <= edge { 1.0 } else { 0.0 })
            .collect();
        GridProfile::new(g, 0.0, values).unwrap()
    }

    #[test]
    fn no_trigger_is_identity() {
        let mut p = front(0, 400, 100);
        let before = p.clone();
        let ev = apply_policy(&mut p, &WindowPolicy::default(), 1.0, 1.0, true, 0, 0).unwrap();
        assert!(ev.is_none());
        assert_eq!(p, before);
    }

    #[test]
    fn shift_preserves_absolute_positions() {
        let mut p = front(0, 200, 180);
        let before = p.clone();
        let ev = apply_policy(&mut p, &WindowPolicy::default(), 1.0, 1.0, true, 3, 7)
            .unwrap()
            .expect("shift expected");
        assert!(ev.added_right > 0 && ev.dropped_left > 0);
        for k in p.grid.first_index..=before.grid.last_index() {
            assert_eq!(p.at_index_extended(k), before.at_index_extended(k));
        }
        let gap = p.grid.x_right() - 180.0 * 0.5;
        assert!(gap >= WindowPolicy::default().margin - 1e-9);
    }

    #[test]
    fn unsettled_plateau_grows_instead_of_dropping() {
        let mut p = front(0, 200, 180);
        p.values[0] = 0.5;
        let ev = apply_policy(&mut p, &WindowPolicy::default(), 1.0, 1.0, true, 0, 0)
            .unwrap()
            .unwrap();
        assert_eq!(ev.dropped_left, 0);
        assert!(ev.added_left > 0);
        assert_eq!(p.values[0], 1.0);
    }

    #[test]
    fn memory_budget_is_enforced() {
        let mut p = front(0, 200, 180);
        let policy = WindowPolicy {
            n_max: 220,
            ..Default::default()
        };
        p.values[30] = 0.5;
        match apply_policy(&mut p, &policy, 1.0, 1.0, true, 0, 0) {
            Err(Error::MemoryBudget { needed, budget }) => {
                assert!(needed > budget);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
