//! Closeness to the floors on the intervals between fronts.

use serde::{Deserialize, Serialize};

use super::detect::TerraceDecomposition;
use super::level::level_position;
use crate::error::Result;
use crate::pde::SolutionTimeline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauEntry {
    pub j: u64,
    /// Floor index: 0 behind the first front, N ahead of the last.
    pub k: usize,
    pub floor: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub nodes: usize,
    /// `None` when the interval holds no node.
    pub sup_deviation: Option<f64>,
    pub within: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauReport {
    pub eps: f64,
    pub margin_c: f64,
    pub entries: Vec<PlateauEntry>,
}

impl PlateauReport {
    /// Every nonempty interval is within `eps`; vacuous when all are empty.
    pub fn all_within(&self) -> bool {
        self.entries.iter().all(|e| e.within != Some(false))
    }

    pub fn all_empty(&self) -> bool {
        self.entries.iter().all(|e| e.within.is_none())
    }

    pub fn worst(&self, k: usize) -> Option<f64> {
        self.entries
            .iter()
            .filter(|e| e.k == k)
            .filter_map(|e| e.sup_deviation)
            .reduce(f64::max)
    }
}

/// Smallest `C` such that each front's phase-0 profile is within `eps/2`
/// of its floors outside `[−C, C]`.
pub fn front_width_margin(terrace: &TerraceDecomposition, eps: f64) -> f64 {
    let mut c = 0.0f64;
    for f in &terrace.fronts {
        let (Some(up), Some(low)) = (f.upper_floor, f.lower_floor) else {
            continue;
        };
        let p = f.profile();
        for (i, v) in p.iter().enumerate() {
            let xi = f.xi(i);
            let bad = if xi <= 0.0 { (v - up).abs() > eps / 2.0 } else { (v - low).abs() > eps / 2.0 };
            if bad {
                c = c.max(xi.abs() + f.h);
            }
        }
    }
    c
}

/// Sup-deviation from `ω_k` on `I_{k,C}(jT) = [ℓ_k(j) + C, ℓ_{k+1}(j) − C]`
/// for the last `n_late` snapshots, with `ℓ_0 = −∞` and `ℓ_{N+1} = +∞`
/// clipped to the window.
pub fn plateau_check(
    tl: &SolutionTimeline,
    terrace: &TerraceDecomposition,
    eps: f64,
    margin_c: Option<f64>,
    n_late: usize,
) -> Result<PlateauReport> {
    let c = margin_c.unwrap_or_else(|| front_width_margin(terrace, eps));
    let n_snap = tl.period_snapshots.len();
    let mut entries = Vec::new();
    for p in &tl.period_snapshots[n_snap.saturating_sub(n_late)..] {
        let j = tl.period_index(p);
        let ells: Vec<Option<f64>> = terrace
            .fronts
            .iter()
            .map(|f| level_position(p, f.lambda_k).ok())
            .collect();
        for (k, floor) in terrace.floors.iter().enumerate() {
            let lo = if k == 0 { Some(p.grid.x_left()) } else { ells[k - 1].map(|x| x + c) };
            let hi = if k == ells.len() { Some(p.grid.x_right()) } else { ells[k].map(|x| x - c) };
            let (Some(lo), Some(hi)) = (lo, hi) else {
                continue;
            };
            let mut sup: Option<f64> = None;
            let mut nodes = 0;
            for (i, v) in p.values.iter().enumerate() {
                let x = p.grid.x(i);
                if x >= lo && x <= hi {
                    nodes += 1;
                    let d = (v - floor.beta).abs();
                    sup = Some(sup.map_or(d, |s| s.max(d)));
                }
            }
            entries.push(PlateauEntry {
                j,
                k,
                floor: floor.beta,
                x_lo: lo,
                x_hi: hi,
                nodes,
                sup_deviation: sup,
                within: sup.map(|s| s <= eps),
            });
        }
    }
    Ok(PlateauReport {
        eps,
        margin_c: c,
        entries,
    })
}
