//! Terrace reconstruction: speed clusters over λ, floors snapped to the
//! ladder, one front per cluster.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::drift::{drift, DriftSeries};
use super::front::{extract_front, sample, FrontKind, FrontRecord};
use super::level::{level_position, trace_level, LevelSetTrace};
use super::TerraceSettings;
use crate::error::{Error, Result};
use crate::ode::PhaseLadder;
use crate::pde::SolutionTimeline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorRecord {
    pub index: usize,
    /// Value at phase 0 (the ladder entry when matched).
    pub beta: f64,
    /// Plateau value read off the last snapshot, for interior floors.
    pub measured: Option<f64>,
    pub ladder_distance: Option<f64>,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub lambda: f64,
    pub speed: Option<f64>,
    pub slope_se: Option<f64>,
    pub residual_rms: Option<f64>,
    /// Front index (1-based) of the cluster, `None` if unexplained.
    pub front: Option<usize>,
    pub annotation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerraceDecomposition {
    pub alpha: f64,
    pub floors: Vec<FloorRecord>,
    pub fronts: Vec<FrontRecord>,
    pub speeds: Vec<f64>,
    pub drifts: Vec<DriftSeries>,
    pub levels: Vec<LevelSummary>,
    pub speed_gap: f64,
    pub fit_window: (u64, u64),
    pub diagnostics: Vec<String>,
    #[serde(skip)]
    pub traces: Vec<LevelSetTrace>,
}

impl TerraceDecomposition {
    pub fn n_fronts(&self) -> usize {
        self.fronts.len()
    }

    pub fn floor_values(&self) -> Vec<f64> {
        self.floors.iter().map(|f| f.beta).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Cluster {
    members: Vec<usize>,
}

/// Splits points sorted by speed wherever neighbours differ by more than `gap`.
fn cluster_by_speed(speeds: &[(usize, f64)], gap: f64) -> Vec<Cluster> {
    let mut sorted: Vec<(usize, f64)> = speeds.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out: Vec<Cluster> = Vec::new();
    let mut prev: Option<f64> = None;
    for (i, s) in sorted {
        match prev {
            Some(p) if s - p <= gap => out.last_mut().expect("open cluster").members.push(i),
            _ => out.push(Cluster { members: vec![i] }),
        }
        prev = Some(s);
    }
    out
}

/// Builds the decomposition from a timeline and the phase ladder of the
/// same nonlinearity.
pub fn detect_terrace(
    tl: &SolutionTimeline,
    ladder: &PhaseLadder,
    settings: &TerraceSettings,
) -> Result<TerraceDecomposition> {
    settings.validate()?;
    let alpha = tl.alpha;
    if !(alpha > 0.0) {
        return Err(Error::config("terrace detection needs alpha > 0"));
    }
    let last = tl
        .last()
        .ok_or_else(|| Error::config("terrace detection needs a nonempty timeline"))?;
    let first = tl.first_period().expect("nonempty");
    let j_last = tl.period_index(last);
    let fit_window = settings
        .fit_window
        .unwrap_or((first + (j_last - first) / 2, j_last));

    let n = settings.lambda_grid;
    let lambdas: Vec<f64> = (1..n).map(|i| alpha * i as f64 / n as f64).collect();
    let traces: Vec<LevelSetTrace> = lambdas
        .par_iter()
        .map(|l| trace_level(tl, *l, Some(fit_window)))
        .collect::<Result<_>>()?;

    let fitted: Vec<(usize, f64)> = traces
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.speed().map(|s| (i, s)))
        .collect();
    if fitted.is_empty() {
        return Err(Error::Structural(
            "no level crosses the profiles over the fit window (spatially flat solution?)".into(),
        ));
    }
    let pooled_se = (traces
        .iter()
        .filter_map(|t| t.fit.map(|f| f.slope_se * f.slope_se))
        .sum::<f64>()
        / fitted.len() as f64)
        .sqrt();
    let c_max = fitted.iter().map(|f| f.1.abs()).fold(0.0, f64::max);
    let gap = (settings.speed_gap_factor * pooled_se).max(settings.speed_gap_rel * c_max);

    let mut diagnostics = Vec::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for c in cluster_by_speed(&fitted, gap) {
        if c.members.len() < settings.min_cluster {
            let ls: Vec<String> = c.members.iter().map(|i| format!("{:.4}", lambdas[*i])).collect();
            diagnostics.push(format!("unexplained lambda band [{}]", ls.join(", ")));
            continue;
        }
        let mut m = c.members;
        m.sort_unstable();
        clusters.push(m);
    }
    if clusters.is_empty() {
        return Err(Error::Structural("no speed cluster has enough levels".into()));
    }
    // uppermost front first
    clusters.sort_by_key(|m| std::cmp::Reverse(m[m.len() - 1]));
    for w in clusters.windows(2) {
        let (upper, lower) = (&w[0], &w[1]);
        if upper[0] <= lower[lower.len() - 1] {
            return Err(Error::Structural(format!(
                "speed clusters interleave in lambda: [{:.4}, {:.4}] and [{:.4}, {:.4}]",
                lambdas[upper[0]],
                lambdas[upper[upper.len() - 1]],
                lambdas[lower[0]],
                lambdas[lower[lower.len() - 1]]
            )));
        }
    }
    let mean_speed = |m: &[usize]| m.iter().map(|i| traces[*i].speed().expect("fitted")).sum::<f64>() / m.len() as f64;
    let speeds: Vec<f64> = clusters.iter().map(|m| mean_speed(m)).collect();
    for (k, w) in speeds.windows(2).enumerate() {
        if w[1] < w[0] - gap {
            return Err(Error::Structural(format!(
                "front {} (higher lambda) is faster than front {}: {:.5} > {:.5}; run longer",
                k + 1,
                k + 2,
                w[0],
                w[1]
            )));
        }
    }

    // floors
    let mut floors = vec![FloorRecord {
        index: 0,
        beta: alpha,
        measured: None,
        ladder_distance: ladder.record_at(alpha, settings.fp_match_tol).map(|r| (r.beta - alpha).abs()),
        matched: ladder.record_at(alpha, settings.fp_match_tol).is_some(),
    }];
    for (k, w) in clusters.windows(2).enumerate() {
        let (upper, lower) = (&w[0], &w[1]);
        let x_left = level_position(last, lambdas[upper[0]])?;
        let x_right = level_position(last, lambdas[lower[lower.len() - 1]])?;
        let measured = sample(last, 0.5 * (x_left + x_right));
        let candidate = ladder
            .records
            .iter()
            .filter(|r| r.stable_below && !r.continuum_member && r.beta > 0.0 && r.beta < alpha)
            .min_by(|a, b| (a.beta - measured).abs().total_cmp(&(b.beta - measured).abs()));
        let (beta, distance, matched) = match candidate {
            Some(r) => {
                let d = (r.beta - measured).abs();
                (if d <= settings.fp_match_tol { r.beta } else { measured }, Some(d), d <= settings.fp_match_tol)
            }
            None => (measured, None, false),
        };
        if !matched {
            diagnostics.push(format!(
                "floor {} measured at {measured:.6} matches no stable-from-below ladder entry within {}",
                k + 1,
                settings.fp_match_tol
            ));
        }
        floors.push(FloorRecord {
            index: k + 1,
            beta,
            measured: Some(measured),
            ladder_distance: distance,
            matched,
        });
    }
    floors.push(FloorRecord {
        index: clusters.len(),
        beta: 0.0,
        measured: None,
        ladder_distance: ladder.record_at(0.0, settings.fp_match_tol).map(|r| r.beta.abs()),
        matched: ladder.record_at(0.0, settings.fp_match_tol).is_some(),
    });
    for w in floors.windows(2) {
        if !(w[0].beta > w[1].beta) {
            return Err(Error::Structural(format!(
                "floors not strictly ordered: {} then {}",
                w[0].beta, w[1].beta
            )));
        }
    }

    // fronts
    let mut fronts = Vec::new();
    let mut drifts = Vec::new();
    for (k, m) in clusters.iter().enumerate() {
        let window = (lambdas[m[0]], lambdas[m[m.len() - 1]]);
        let lambda_k = 0.5 * (window.0 + window.1);
        let trace = trace_level(tl, lambda_k, Some(fit_window))?;
        let mut front = extract_front(tl, &trace, window, settings)?;
        front.index = k + 1;
        front.upper_floor = Some(floors[k].beta);
        front.lower_floor = Some(floors[k + 1].beta);
        if front.kind == FrontKind::Front {
            let (l, r) = front.tails();
            if (l - floors[k].beta).abs() > settings.floor_tol || (r - floors[k + 1].beta).abs() > settings.floor_tol {
                front.annotations.push(format!(
                    "tails ({l:.4e}, {r:.4e}) not within {} of floors ({}, {})",
                    settings.floor_tol,
                    floors[k].beta,
                    floors[k + 1].beta
                ));
            }
        }
        match drift(&trace, front.speed, settings.speed_floor) {
            Ok(d) => drifts.push(d),
            Err(e) => {
                diagnostics.push(format!("front {}: {e}", k + 1));
                drifts.push(DriftSeries {
                    speed: front.speed,
                    samples: Vec::new(),
                    sublinearity: f64::NAN,
                    final_ratio: f64::NAN,
                    ratio_slope: f64::NAN,
                    trending_down: false,
                });
            }
        }
        fronts.push(front);
    }
    let front_speeds: Vec<f64> = fronts.iter().map(|f| f.speed).collect();

    let levels = traces
        .iter()
        .enumerate()
        .map(|(i, t)| LevelSummary {
            lambda: t.lambda,
            speed: t.speed(),
            slope_se: t.fit.map(|f| f.slope_se),
            residual_rms: t.fit.map(|f| f.residual_rms),
            front: clusters.iter().position(|m| m.contains(&i)).map(|k| k + 1),
            annotation: t.annotation.clone(),
        })
        .collect();

    Ok(TerraceDecomposition {
        alpha,
        floors,
        fronts,
        speeds: front_speeds,
        drifts,
        levels,
        speed_gap: gap,
        fit_window,
        diagnostics,
        traces,
    })
}
