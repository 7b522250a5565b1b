//! Front profiles seen from their own level position.

use serde::{Deserialize, Serialize};

use super::level::{level_position, LevelSetTrace};
use super::TerraceSettings;
use crate::error::{Error, Result};
use crate::pde::{GridProfile, SolutionTimeline};

/// Value at an arbitrary `x` by monotone piecewise-cubic interpolation
/// (harmonic-mean slopes), with edge extension outside the window.
pub fn sample(profile: &GridProfile, x: f64) -> f64 {
    let g = &profile.grid;
    let s = (x - g.x_left()) / g.h;
    if s <= 0.0 {
        return profile.values[0];
    }
    if s >= (g.n - 1) as f64 {
        return profile.values[g.n - 1];
    }
    let i = s.floor() as i64;
    let frac = s - i as f64;
    let k = g.first_index + i;
    let at = |d: i64| profile.at_index_extended(k + d);
    let (um, u0, u1, u2) = (at(-1), at(0), at(1), at(2));
    let (dm, d0, d1) = (u0 - um, u1 - u0, u2 - u1);
    let slope = |a: f64, b: f64| if a * b > 0.0 { 2.0 * a * b / (a + b) } else { 0.0 };
    let (m0, m1) = (slope(dm, d0), slope(d0, d1));
    let (t2, t3) = (frac * frac, frac * frac * frac);
    (2.0 * t3 - 3.0 * t2 + 1.0) * u0 + (t3 - 2.0 * t2 + frac) * m0 + (-2.0 * t3 + 3.0 * t2) * u1 + (t3 - t2) * m1
}

/// Crossing of level `λ` on the interpolant used by [`sample`]: the linear
/// crossing's cell, refined by bisection.
pub fn smooth_level_position(profile: &GridProfile, lambda: f64) -> Result<f64> {
    let x = level_position(profile, lambda)?;
    let h = profile.grid.h;
    let i = ((x - profile.grid.x_left()) / h).floor();
    let mut lo = profile.grid.x_left() + i * h;
    let mut hi = lo + h;
    if !(sample(profile, lo) >= lambda && sample(profile, hi) <= lambda) {
        return Ok(x);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if sample(profile, mid) >= lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `u(ℓ + ξ_i)` on `ξ_i = (i − m)·h`, `i = 0..=2m`.
pub fn recentre(profile: &GridProfile, centre: f64, m: usize) -> Vec<f64> {
    let h = profile.grid.h;
    (0..=2 * m)
        .map(|i| sample(profile, centre + (i as f64 - m as f64) * h))
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontKind {
    /// Nontrivial x-variation: a pulsating front.
    Front,
    /// Flat recentred profile: a periodic solution.
    Degenerate,
}

/// A recentred profile at time `period·T + phase/phases·T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    pub phase: usize,
    pub phases: usize,
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRecord {
    /// 1 for the uppermost front.
    pub index: usize,
    pub kind: FrontKind,
    pub lambda_k: f64,
    pub lambda_window: (f64, f64),
    pub speed: f64,
    /// Last measured period shift `ℓ(J) − ℓ(J−1)`.
    pub period_shift: f64,
    /// Floors at phase 0, filled in by the detector.
    pub upper_floor: Option<f64>,
    pub lower_floor: Option<f64>,
    /// Recentring grid `ξ_i = xi_start + i·h`.
    pub xi_start: f64,
    pub h: f64,
    /// Profiles over the last full period, phase 0 to phase `phases`.
    pub period_profiles: Vec<PhaseProfile>,
    /// `(j, max |R_j − R_{j−1}|)` over the fit window.
    pub defect_history: Vec<(u64, f64)>,
    /// Largest successive difference over the last quarter of the window.
    pub convergence_defect: f64,
    pub converging: bool,
    /// Advance-one-period against translate-by-`period_shift`, over all
    /// recorded phases of the last two periods.
    pub pulsating_defect: f64,
    /// Same at phase 0 with the translation `speed·T`.
    pub pulsating_defect_speed: f64,
    /// Largest increase along the recentred phase-0 profile.
    pub monotonicity_violation: f64,
    pub annotations: Vec<String>,
}

impl FrontRecord {
    pub fn xi(&self, i: usize) -> f64 {
        self.xi_start + i as f64 * self.h
    }

    /// Phase-0 profile of the last full period.
    pub fn profile(&self) -> &[f64] {
        &self.period_profiles[0].values
    }

    /// Profile values at the left and right ends of the recentring grid.
    pub fn tails(&self) -> (f64, f64) {
        let p = self.profile();
        (p[0], p[p.len() - 1])
    }
}

fn subperiod_profiles<'a>(tl: &'a SolutionTimeline, j: u64) -> Vec<&'a crate::pde::PhaseSnapshot> {
    let mut v: Vec<_> = tl.subperiod_snapshots.iter().filter(|s| s.period == j).collect();
    v.sort_by_key(|s| s.phase);
    v
}

/// Recentres every period snapshot on its own `ℓ(j, λ_k)` and measures how
/// the recentred family settles.
pub fn extract_front(
    tl: &SolutionTimeline,
    trace: &LevelSetTrace,
    lambda_window: (f64, f64),
    settings: &TerraceSettings,
) -> Result<FrontRecord> {
    let last = tl
        .last()
        .ok_or_else(|| Error::config("cannot extract a front from an empty timeline"))?;
    let h = last.grid.h;
    let m = (settings.recentre_halfwidth / h).ceil() as usize;
    let lambda = trace.lambda;
    let period = tl.period;

    let variation = last.values.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v))
        - last.values.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if variation <= settings.flat_tol || trace.fit.is_none() {
        let flat = variation <= settings.flat_tol;
        return Ok(FrontRecord {
            index: 0,
            kind: FrontKind::Degenerate,
            lambda_k: lambda,
            lambda_window,
            speed: 0.0,
            period_shift: 0.0,
            upper_floor: None,
            lower_floor: None,
            xi_start: -(m as f64) * h,
            h,
            period_profiles: vec![PhaseProfile {
                phase: 0,
                phases: 1,
                t: last.t,
                values: vec![last.values[0]; 2 * m + 1],
            }],
            defect_history: Vec::new(),
            convergence_defect: 0.0,
            converging: flat,
            pulsating_defect: 0.0,
            pulsating_defect_speed: 0.0,
            monotonicity_violation: 0.0,
            annotations: vec![if flat {
                "no x-variation: periodic solution".to_string()
            } else {
                "no speed fit for this level".to_string()
            }],
        });
    }
    let fit = trace.fit.expect("checked above");
    let speed = fit.slope;
    let mut annotations = Vec::new();

    // successive recentred differences over the fit window
    let mut prev: Option<Vec<f64>> = None;
    let mut history = Vec::new();
    for j in fit.j_lo..=fit.j_hi {
        let Some(p) = tl.snapshot(j) else {
            prev = None;
            continue;
        };
        let Ok(x) = smooth_level_position(p, lambda) else {
            prev = None;
            continue;
        };
        let r = recentre(p, x, m);
        if let Some(q) = &prev {
            history.push((j, max_diff(&r, q)));
        }
        prev = Some(r);
    }
    let quarter_start = fit.j_hi - (fit.j_hi - fit.j_lo) / 4;
    let late: Vec<f64> = history.iter().filter(|(j, _)| *j >= quarter_start).map(|(_, d)| *d).collect();
    let earlier: Vec<f64> = history
        .iter()
        .filter(|(j, _)| *j < quarter_start && *j >= quarter_start.saturating_sub(quarter_start - fit.j_lo))
        .map(|(_, d)| *d)
        .collect();
    let convergence_defect = late.iter().copied().fold(0.0, f64::max);
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let converging = convergence_defect <= settings.flat_tol
        || earlier.is_empty()
        || mean(&late) <= 1.05 * mean(&earlier);
    if !converging {
        annotations.push("convergence defect is not decreasing; run longer".into());
    }

    let j_end = fit.j_hi;
    let j_start = j_end - 1;
    let snap = |j: u64| tl.snapshot(j).ok_or_else(|| Error::Consistency(format!("no snapshot for period {j}")));
    let (x0, x1) = (
        smooth_level_position(snap(j_start)?, lambda)?,
        smooth_level_position(snap(j_end)?, lambda)?,
    );
    let period_shift = x1 - x0;

    // one full period of recentred profiles, all in the frame of ℓ(J−1)
    let subs = subperiod_profiles(tl, j_start);
    let mut period_profiles = vec![PhaseProfile {
        phase: 0,
        phases: subs.first().map(|s| s.phases).unwrap_or(1),
        t: snap(j_start)?.t,
        values: recentre(snap(j_start)?, x0, m),
    }];
    for s in &subs {
        period_profiles.push(PhaseProfile {
            phase: s.phase,
            phases: s.phases,
            t: s.profile.t,
            values: recentre(&s.profile, x0, m),
        });
    }
    let end = recentre(snap(j_end)?, x0, m);
    let phases = period_profiles[0].phases;
    period_profiles.push(PhaseProfile {
        phase: phases,
        phases,
        t: snap(j_end)?.t,
        values: end,
    });

    // pulsating relation u(x + L, t + T) = u(x, t) at every stored phase
    let mut pulsating = max_diff(&recentre(snap(j_end)?, x1, m), &period_profiles[0].values);
    if j_start > 0 {
        if let Some(xp) = tl.snapshot(j_start - 1).and_then(|p| smooth_level_position(p, lambda).ok()) {
            let shift = x0 - xp;
            let before = subperiod_profiles(tl, j_start - 1);
            for s in &subs {
                if let Some(b) = before.iter().find(|b| b.phase == s.phase) {
                    let a = recentre(&s.profile, xp + shift, m);
                    let c = recentre(&b.profile, xp, m);
                    pulsating = pulsating.max(max_diff(&a, &c));
                }
            }
        }
    }
    if subs.is_empty() {
        annotations.push("no subperiod snapshots: pulsating check at phase 0 only".into());
    }
    let pulsating_speed = max_diff(
        &recentre(snap(j_end)?, x0 + speed * period, m),
        &period_profiles[0].values,
    );

    let p0 = &period_profiles[0].values;
    let monotonicity_violation = p0.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if monotonicity_violation > settings.mono_tol {
        annotations.push(format!("recentred profile increases by {monotonicity_violation:.2e}"));
    }

    Ok(FrontRecord {
        index: 0,
        kind: FrontKind::Front,
        lambda_k: lambda,
        lambda_window,
        speed,
        period_shift,
        upper_floor: None,
        lower_floor: None,
        xi_start: -(m as f64) * h,
        h,
        period_profiles,
        defect_history: history,
        convergence_defect,
        converging,
        pulsating_defect: pulsating,
        pulsating_defect_speed: pulsating_speed,
        monotonicity_violation,
        annotations,
    })
}
