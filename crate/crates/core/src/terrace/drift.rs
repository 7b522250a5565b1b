//! Drift `g_k(t) = jT − ℓ(j, λ_k)/c_k` of a front relative to its moving frame.

use serde::{Deserialize, Serialize};

use super::level::{linear_fit, LevelSetTrace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSeries {
    pub speed: f64,
    /// `(t_j, g(t_j))` at period marks; affine in between.
    pub samples: Vec<(f64, f64)>,
    /// `max |g|/t` over the last half of the samples.
    pub sublinearity: f64,
    /// `|g|/t` at the final sample.
    pub final_ratio: f64,
    /// Slope of `|g|/t` against `t` over the last half.
    pub ratio_slope: f64,
    pub trending_down: bool,
}

impl DriftSeries {
    /// Piecewise-affine value between samples, clamped to the ends.
    pub fn at(&self, t: f64) -> Option<f64> {
        let s = &self.samples;
        let first = s.first()?;
        if t <= first.0 {
            return Some(first.1);
        }
        for w in s.windows(2) {
            if t <= w[1].0 {
                let f = (t - w[0].0) / (w[1].0 - w[0].0);
                return Some(w[0].1 + f * (w[1].1 - w[0].1));
            }
        }
        s.last().map(|l| l.1)
    }
}

/// Evaluates the drift along `trace` using speed `c`.
pub fn drift(trace: &LevelSetTrace, c: f64, speed_floor: f64) -> Result<DriftSeries> {
    if !(c > speed_floor) {
        return Err(Error::DriftUndefined { speed: c, floor: speed_floor });
    }
    let samples: Vec<(f64, f64)> = trace
        .periods
        .iter()
        .zip(&trace.positions)
        .filter_map(|(j, p)| {
            let t = *j as f64 * trace.period;
            p.map(|x| (t, t - x / c))
        })
        .collect();
    let late: Vec<(f64, f64)> = samples
        .iter()
        .skip(samples.len() / 2)
        .filter(|(t, _)| *t > 0.0)
        .map(|(t, g)| (*t, g.abs() / t))
        .collect();
    let sublinearity = late.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    let final_ratio = late.last().map(|(_, r)| *r).unwrap_or(f64::NAN);
    let (ts, rs): (Vec<f64>, Vec<f64>) = late.iter().copied().unzip();
    let ratio_slope = linear_fit(&ts, &rs).map(|f| f.0).unwrap_or(0.0);
    Ok(DriftSeries {
        speed: c,
        samples,
        sublinearity,
        final_ratio,
        ratio_slope,
        trending_down: ratio_slope <= 0.0 || sublinearity <= 1e-3,
    })
}
