//! Level-set positions `ℓ(j, λ)` and their speed fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{GridProfile, SolutionTimeline};

/// Rightmost crossing of level `λ` in a nonincreasing profile.
///
/// Bisection over nodes brackets the cell with `u_i ≥ λ > u_{i+1}`;
/// the crossing inside it is linear.
pub fn level_position(profile: &GridProfile, lambda: f64) -> Result<f64> {
    let u = &profile.values;
    let n = u.len();
    if n == 0 || !(u[0] >= lambda) || !(u[n - 1] < lambda) {
        let (low, high) = u
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        return Err(Error::LevelOutOfRange { lambda, low, high });
    }
    let (mut lo, mut hi) = (0usize, n - 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if u[mid] >= lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let frac = (u[lo] - lambda) / (u[lo] - u[hi]);
    Ok(profile.grid.x(lo) + profile.grid.h * frac)
}

/// Least-squares line `ℓ ≈ slope·t + intercept` over a range of periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the position residuals.
    pub residual_rms: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
    pub j_lo: u64,
    pub j_hi: u64,
}

/// Fits `y ≈ a·x + b`, returning `(a, b, rms, se(a))`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - slope * a - intercept;
            r * r
        })
        .sum();
    let rms = (ss / nf).sqrt();
    let se = if n > 2 { (ss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Some((slope, intercept, rms, se))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetTrace {
    pub lambda: f64,
    pub period: f64,
    pub periods: Vec<u64>,
    /// `None` where the level is out of the profile's range.
    pub positions: Vec<Option<f64>>,
    pub fit: Option<SpeedFit>,
    pub annotation: Option<String>,
}

impl LevelSetTrace {
    pub fn position(&self, j: u64) -> Option<f64> {
        let i = self.periods.iter().position(|p| *p == j)?;
        self.positions[i]
    }

    /// `ℓ(j) − ℓ(j − 1)` wherever both exist.
    pub fn increments(&self) -> Vec<(u64, f64)> {
        self.periods
            .windows(2)
            .zip(self.positions.windows(2))
            .filter_map(|(j, p)| match (p[0], p[1]) {
                (Some(a), Some(b)) if j[1] == j[0] + 1 => Some((j[1], b - a)),
                _ => None,
            })
            .collect()
    }

    pub fn speed(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

/// Default fit window: the last half of the recorded periods.
pub fn default_fit_window(tl: &SolutionTimeline) -> Option<(u64, u64)> {
    let first = tl.first_period()?;
    let last = first + tl.period_snapshots.len() as u64 - 1;
    Some((first + (last - first) / 2, last))
}

/// Positions of level `λ` at every period snapshot and a speed fit over
/// `fit_window` (inclusive period indices).
///
/// Gaps inside the window shrink the fit to the longest gap-free run that
/// ends latest, with an annotation.
pub fn trace_level(tl: &SolutionTimeline, lambda: f64, fit_window: Option<(u64, u64)>) -> Result<LevelSetTrace> {
    let mut periods = Vec::with_capacity(tl.period_snapshots.len());
    let mut positions = Vec::with_capacity(tl.period_snapshots.len());
    for p in &tl.period_snapshots {
        periods.push(tl.period_index(p));
        positions.push(level_position(p, lambda).ok());
    }
    let mut trace = LevelSetTrace {
        lambda,
        period: tl.period,
        periods,
        positions,
        fit: None,
        annotation: None,
    };
    let Some((lo, hi)) = fit_window.or_else(|| default_fit_window(tl)) else {
        trace.annotation = Some("empty timeline".into());
        return Ok(trace);
    };
    if lo > hi || trace.periods.first().is_none_or(|f| lo < *f) || trace.periods.last().is_none_or(|l| hi > *l) {
        return Err(Error::config(format!("fit window ({lo}, {hi}) outside the recorded periods")));
    }
    let in_window: Vec<(u64, Option<f64>)> = trace
        .periods
        .iter()
        .zip(&trace.positions)
        .filter(|(j, _)| **j >= lo && **j <= hi)
        .map(|(j, p)| (*j, *p))
        .collect();
    let mut run: Vec<(u64, f64)> = Vec::new();
    let mut best: Vec<(u64, f64)> = Vec::new();
    let mut missing = Vec::new();
    for (j, p) in in_window {
        match p {
            Some(x) => run.push((j, x)),
            None => {
                missing.push(j);
                if run.len() >= best.len() {
                    best = std::mem::take(&mut run);
                } else {
                    run.clear();
                }
            }
        }
    }
    if run.len() >= best.len() {
        best = run;
    }
    if !missing.is_empty() {
        trace.annotation = Some(format!(
            "level out of range at {} of the fitted periods (first j = {})",
            missing.len(),
            missing[0]
        ));
    }
    if best.len() >= 3 {
        let t: Vec<f64> = best.iter().map(|(j, _)| *j as f64 * tl.period).collect();
        let x: Vec<f64> = best.iter().map(|(_, x)| *x).collect();
        if let Some((slope, intercept, rms, se)) = linear_fit(&t, &x) {
            trace.fit = Some(SpeedFit {
                slope,
                intercept,
                residual_rms: rms,
                slope_se: se,
                j_lo: best[0].0,
                j_hi: best[best.len() - 1].0,
            });
        }
    } else if trace.annotation.is_none() {
        trace.annotation = Some("fewer than 3 positions in the fit window".into());
    }
    Ok(trace)
}
