use serde::{Deserialize, Serialize};

use super::{displacement, multiplier, OdeSettings};
use crate::error::{Error, Result};
use crate::nonlinearity::PeriodicNonlinearity;

/// How a one-sided stability verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideAnnotation {
    /// Decided by a multiplier distinctly different from 1.
    Multiplier,
    /// Iterates approached monotonically and ended within `10·tol_fp`.
    Converged,
    /// Iterates approached monotonically without reaching `10·tol_fp`, at
    /// least halving the distance (algebraic decay at a degenerate point).
    SlowConvergence,
    /// First displacement pointed away from β.
    Repelled,
    /// An iterate jumped past β.
    Overshoot,
    /// `P` left the probe unchanged: a continuum of fixed points.
    Stationary,
    /// Iterates stopped approaching before getting close.
    Stalled,
    /// Iterates left the admissible state range or blew up.
    Escape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideVerdict {
    pub stable: bool,
    pub annotation: SideAnnotation,
    /// Distance to β after the last iterate (the initial δ when not iterated).
    pub final_distance: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable_below: bool,
    pub stable_above: bool,
    pub below: SideVerdict,
    pub above: SideVerdict,
}

/// Classifies β from each side.
///
/// A multiplier farther than `mult_tol` from 1 decides both sides at once.
/// Otherwise `P` is iterated from `β ∓ δ`: a side is stable when every
/// iterate moves toward β without passing it and the sequence either ends
/// within `10·tol_fp` or keeps approaching after halving the distance.
/// A constant sequence is unstable by convention (continuum annotation).
pub fn classify_stability(
    f: &PeriodicNonlinearity,
    beta: f64,
    delta: f64,
    n_iter: usize,
    settings: &OdeSettings,
) -> Result<StabilityVerdict> {
    let m = multiplier(f, beta, settings.fd_step, &settings.integrator)?;
    classify_with_multiplier(f, beta, delta, n_iter, settings, Some(m))
}

pub(crate) fn classify_with_multiplier(
    f: &PeriodicNonlinearity,
    beta: f64,
    delta: f64,
    n_iter: usize,
    settings: &OdeSettings,
    multiplier: Option<f64>,
) -> Result<StabilityVerdict> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::config(format!("stability probe must be positive, got {delta}")));
    }
    if n_iter < 10 {
        return Err(Error::config(format!("stability iteration count must be at least 10, got {n_iter}")));
    }
    if let Some(m) = multiplier {
        if m.is_finite() && (m - 1.0).abs() > settings.mult_tol {
            let side = SideVerdict {
                stable: m < 1.0,
                annotation: SideAnnotation::Multiplier,
                final_distance: delta,
                iterations: 0,
            };
            return Ok(StabilityVerdict {
                stable_below: side.stable,
                stable_above: side.stable,
                below: side,
                above: side,
            });
        }
    }
    let below = iterate_side(f, beta, delta, -1.0, n_iter, settings)?;
    let above = iterate_side(f, beta, delta, 1.0, n_iter, settings)?;
    Ok(StabilityVerdict {
        stable_below: below.stable,
        stable_above: above.stable,
        below,
        above,
    })
}

fn iterate_side(
    f: &PeriodicNonlinearity,
    beta: f64,
    delta: f64,
    side: f64,
    n_iter: usize,
    settings: &OdeSettings,
) -> Result<SideVerdict> {
    let close = 10.0 * settings.tol_fp;
    let (lo, hi) = (-f.u_max(), 2.0 * f.u_max());
    let verdict = |stable, annotation, dist, n| SideVerdict {
        stable,
        annotation,
        final_distance: dist,
        iterations: n,
    };
    let mut x = beta + side * delta;
    let mut dist = delta;
    let mut last_step = 0.0;
    for n in 1..=n_iter {
        let g = match displacement(f, x, &settings.integrator) {
            Ok(g) => g,
            Err(Error::Divergence { .. }) => return Ok(verdict(false, SideAnnotation::Escape, dist, n)),
            Err(e) => return Err(e),
        };
        if g == 0.0 {
            let ann = if n == 1 {
                SideAnnotation::Stationary
            } else {
                SideAnnotation::Stalled
            };
            return Ok(verdict(false, ann, dist, n));
        }
        if g * side > 0.0 {
            let ann = if n == 1 {
                SideAnnotation::Repelled
            } else {
                SideAnnotation::Stalled
            };
            return Ok(verdict(false, ann, dist, n));
        }
        let next = x + g;
        if !(lo..=hi).contains(&next) {
            return Ok(verdict(false, SideAnnotation::Escape, dist, n));
        }
        let next_dist = side * (next - beta);
        if next_dist < -close {
            return Ok(verdict(false, SideAnnotation::Overshoot, next_dist.abs(), n));
        }
        if next_dist <= close {
            return Ok(verdict(true, SideAnnotation::Converged, next_dist.abs(), n));
        }
        last_step = dist - next_dist;
        x = next;
        dist = next_dist;
    }
    if dist <= 0.5 * delta && last_step > 0.0 {
        Ok(verdict(true, SideAnnotation::SlowConvergence, dist, n_iter))
    } else {
        Ok(verdict(false, SideAnnotation::Stalled, dist, n_iter))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::build_preset;
    use std::collections::BTreeMap;

    #[test]
    fn threestable_pattern() {
        let f = build_preset("threestable_paper", &BTreeMap::new()).unwrap();
        let s = OdeSettings::default();
        let v4 = classify_stability(&f, 4.0, 1e-3, 20, &s).unwrap();
        assert!(v4.stable_below && v4.stable_above);
        let v1 = classify_stability(&f, 1.0, 1e-3, 20, &s).unwrap();
        assert!(!v1.stable_below && !v1.stable_above);
        assert_eq!(v1.below.annotation, SideAnnotation::Repelled);
        let v0 = classify_stability(&f, 0.0, 1e-3, 20, &s).unwrap();
        assert!(v0.stable_above && !v0.stable_below);
    }

    #[test]
    fn identity_map_is_stationary() {
        let f = PeriodicNonlinearity::from_expression("0", 1.0, 1.0).unwrap();
        let s = OdeSettings::default();
        let v = classify_stability(&f, 0.5, 1e-3, 10, &s).unwrap();
        assert!(!v.stable_below && !v.stable_above);
        assert_eq!(v.below.annotation, SideAnnotation::Stationary);
    }

    #[test]
    fn multiplier_short_circuit() {
        let f = PeriodicNonlinearity::from_expression("u*(1-u)", 1.0, 1.0).unwrap();
        let s = OdeSettings::default();
        let v = classify_stability(&f, 1.0, 1e-3, 10, &s).unwrap();
        assert!(v.stable_below && v.stable_above);
        assert_eq!(v.above.annotation, SideAnnotation::Multiplier);
        let v = classify_stability(&f, 0.0, 1e-3, 10, &s).unwrap();
        assert!(!v.stable_below && !v.stable_above);
    }

    #[test]
    fn escape_is_unstable() {
        let f = PeriodicNonlinearity::from_expression("u^3", 1.0, 1.0).unwrap();
        let s = OdeSettings::default();
        // degenerate at 0: the multiplier is 1 so iteration decides
        let v = classify_with_multiplier(&f, 0.0, 0.9, 10, &s, None).unwrap();
        assert!(!v.stable_above);
        assert_eq!(v.above.annotation, SideAnnotation::Escape);
    }

    #[test]
    fn rejects_bad_arguments() {
        let f = PeriodicNonlinearity::from_expression("u", 1.0, 1.0).unwrap();
        let s = OdeSettings::default();
        assert!(classify_with_multiplier(&f, 0.0, 0.0, 10, &s, None).is_err());
        assert!(classify_with_multiplier(&f, 0.0, 0.1, 3, &s, None).is_err());
    }
}
