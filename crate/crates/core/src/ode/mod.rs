//! Kinetics ODE `ω' = f(t, ω)`: flow, Poincaré map, periodic orbits and
//! their Floquet data.
//!
//! Everything near a fixed point is computed through the displacement
//! `d(t) = ω(t) − β`, which integrates `d' = f(t, β + d)` from `d(0) = 0`.
//! `P(β) − β = d(T)` then carries no cancellation error, so its sign stays
//! meaningful at high-order contacts such as `(u − 1)^5`.

mod ladder;
pub mod rk;
mod stability;

use serde::{Deserialize, Serialize};

pub use ladder::{scan_fixed_points, FixedPointRecord, GridSample, PhaseLadder};
pub use rk::IntegratorSettings;
pub use stability::{classify_stability, SideAnnotation, SideVerdict, StabilityVerdict};

use crate::error::{Error, Result};
use crate::nonlinearity::PeriodicNonlinearity;

/// Tolerances and sizes shared by the ODE tools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeSettings {
    pub integrator: IntegratorSettings,
    /// Residual bound `|P(β) − β|` for accepted fixed points.
    pub tol_fp: f64,
    /// `|P(β) − β|` below this at three consecutive nodes marks a candidate continuum.
    pub continuum_tol: f64,
    /// Multipliers within this distance of 1 are degenerate.
    pub mult_tol: f64,
    /// Step of the central difference for `P'(β)`.
    pub fd_step: f64,
    /// Uniform orbit samples over one period, endpoints included.
    pub n_samples: usize,
    /// Simpson intervals for the Floquet exponent; must divide `n_samples − 1`.
    pub n_quad: usize,
    /// Perturbation used by the iteration-based stability test.
    pub stability_delta: f64,
    pub stability_iter: usize,
    /// Bound on the interpolated ODE defect of stored orbits.
    pub defect_tol: f64,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            integrator: IntegratorSettings::default(),
            tol_fp: 1e-8,
            continuum_tol: 1e-7,
            mult_tol: 1e-3,
            fd_step: 1e-6,
            n_samples: 1025,
            n_quad: 1024,
            stability_delta: 1e-3,
            stability_iter: 60,
            defect_tol: 1e-4,
        }
    }
}

impl OdeSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_fp", self.tol_fp),
            ("continuum_tol", self.continuum_tol),
            ("mult_tol", self.mult_tol),
            ("fd_step", self.fd_step),
            ("stability_delta", self.stability_delta),
            ("defect_tol", self.defect_tol),
            ("atol", self.integrator.atol),
            ("rtol", self.integrator.rtol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_samples < 3 {
            return Err(Error::config("n_samples must be at least 3"));
        }
        if self.stability_iter < 10 {
            return Err(Error::config("stability_iter must be at least 10"));
        }
        Ok(())
    }
}

/// A solution of the kinetics ODE over `[t0, t1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t0: f64,
    pub t1: f64,
    pub endpoint: f64,
    /// `(t, ω(t))` pairs at uniform times, empty unless requested.
    pub samples: Vec<(f64, f64)>,
}

fn shift_divergence(e: Error, beta: f64) -> Error {
    match e {
        Error::Divergence { t, last_state } => Error::Divergence {
            t,
            last_state: beta + last_state,
        },
        other => other,
    }
}

fn displacement_rhs(f: &PeriodicNonlinearity, beta: f64) -> impl Fn(f64, &[f64; 1]) -> [f64; 1] + '_ {
    move |t, d| [f.eval(t, beta + d[0])]
}

/// Solves `ω' = f(t, ω)`, `ω(t0) = beta` up to `t1`, with `n_samples`
/// uniform samples when `n_samples ≥ 2`.
pub fn flow(
    f: &PeriodicNonlinearity,
    beta: f64,
    t0: f64,
    t1: f64,
    ctrl: &IntegratorSettings,
    n_samples: usize,
) -> Result<Trajectory> {
    if !beta.is_finite() {
        return Err(Error::config(format!("initial value must be finite, got {beta}")));
    }
    if !(t1 >= t0) {
        return Err(Error::config(format!("flow end {t1} precedes start {t0}")));
    }
    let rhs = displacement_rhs(f, beta);
    if n_samples >= 2 {
        let times: Vec<f64> = (0..n_samples)
            .map(|i| {
                if i + 1 == n_samples {
                    t1
                } else {
                    t0 + (t1 - t0) * i as f64 / (n_samples - 1) as f64
                }
            })
            .collect();
        let ds = rk::integrate_sampled(&rhs, [0.0], &times, ctrl).map_err(|e| shift_divergence(e, beta))?;
        let samples: Vec<(f64, f64)> = times.iter().zip(&ds).map(|(t, d)| (*t, beta + d[0])).collect();
        Ok(Trajectory {
            t0,
            t1,
            endpoint: samples.last().map(|s| s.1).unwrap_or(beta),
            samples,
        })
    } else {
        let r = rk::integrate(&rhs, [0.0], t0, t1, ctrl, false).map_err(|e| shift_divergence(e, beta))?;
        Ok(Trajectory {
            t0,
            t1,
            endpoint: beta + r.state[0],
            samples: Vec::new(),
        })
    }
}

/// `P(β) − β`, integrated directly as a displacement.
pub fn displacement(f: &PeriodicNonlinearity, beta: f64, ctrl: &IntegratorSettings) -> Result<f64> {
    let r = rk::integrate_scalar(
        |t, d| f.eval(t, beta + d),
        |t, d| f.deriv(t, beta + d),
        0.0,
        0.0,
        f.period(),
        ctrl,
    )
    .map_err(|e| shift_divergence(e, beta))?;
    Ok(r.state[0])
}

/// The period map `P(β) = ω(β, T)`.
pub fn poincare(f: &PeriodicNonlinearity, beta: f64, ctrl: &IntegratorSettings) -> Result<f64> {
    Ok(beta + displacement(f, beta, ctrl)?)
}

/// `P'(β)` by central differences on a frozen step mesh.
///
/// The mesh merges the adaptive meshes of the two perturbed runs, taken
/// with tolerances tightened a hundredfold; both perturbed solves then
/// reuse it so the difference quotient is not polluted by step-selection
/// noise. Returns 0 when the true value underflows the rounding floor.
pub fn multiplier(f: &PeriodicNonlinearity, beta: f64, fd_step: f64, ctrl: &IntegratorSettings) -> Result<f64> {
    let tight = ctrl.tightened(1e-2);
    let mut mesh = Vec::new();
    for b in [beta - fd_step, beta + fd_step] {
        let r = rk::integrate(displacement_rhs(f, b), [0.0], 0.0, f.period(), &tight, true)
            .map_err(|e| shift_divergence(e, b))?;
        mesh.extend(r.mesh.unwrap_or_default());
    }
    mesh.sort_by(f64::total_cmp);
    mesh.dedup();
    let run = |b: f64| -> Result<f64> {
        // displacement relative to β so that both runs share the same origin
        let shift = b - beta;
        let d = rk::integrate_on_mesh(
            move |t, d: &[f64; 1]| [f.eval(t, beta + d[0])],
            [shift],
            &mesh,
            ctrl.escape_bound,
        )
        .map_err(|e| shift_divergence(e, beta))?;
        Ok(d[0] - shift)
    };
    let up = run(beta + fd_step)?;
    let down = run(beta - fd_step)?;
    let p = 1.0 + (up - down) / (2.0 * fd_step);
    Ok(if p.is_finite() { p.max(0.0) } else { p })
}

/// A `T`-periodic solution `ω(β, ·)` sampled uniformly over one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub beta: f64,
    pub period: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `|P(β) − β|`.
    pub residual: f64,
    /// Largest central-difference defect `|ω' − f(t, ω)|` over interior samples.
    pub defect: f64,
}

impl PeriodicOrbit {
    /// Constant orbit at a root of `f(t, ·)` valid for all `t`, e.g. `ω ≡ 0`.
    pub fn constant(beta: f64, period: f64, n_samples: usize) -> Self {
        let times = uniform_times(period, n_samples);
        let values = vec![beta; times.len()];
        Self {
            beta,
            period,
            times,
            values,
            residual: 0.0,
            defect: 0.0,
        }
    }

    /// Value at time `t` (taken modulo the period) by cubic Hermite
    /// interpolation, with slopes from the ODE.
    pub fn value_at(&self, f: &PeriodicNonlinearity, t: f64) -> f64 {
        let n = self.times.len();
        if n < 2 {
            return self.beta;
        }
        let tau = t.rem_euclid(self.period);
        let dt = self.period / (n - 1) as f64;
        let i = ((tau / dt).floor() as usize).min(n - 2);
        let (t0, y0, y1) = (self.times[i], self.values[i], self.values[i + 1]);
        let s = ((tau - t0) / dt).clamp(0.0, 1.0);
        let m0 = f.eval(t0, y0) * dt;
        let m1 = f.eval(self.times[i + 1], y1) * dt;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn uniform_times(period: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { period } else { period * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Samples the orbit through β over one period and measures its residual
/// and ODE defect.
pub fn periodic_orbit(f: &PeriodicNonlinearity, beta: f64, settings: &OdeSettings) -> Result<PeriodicOrbit> {
    let period = f.period();
    let traj = flow(f, beta, 0.0, period, &settings.integrator, settings.n_samples)?;
    let (times, values): (Vec<f64>, Vec<f64>) = traj.samples.into_iter().unzip();
    let residual = displacement(f, beta, &settings.integrator)?.abs();
    let dt = period / (times.len() - 1) as f64;
    let mut defect = 0.0f64;
    for i in 1..times.len() - 1 {
        let slope = (values[i + 1] - values[i - 1]) / (2.0 * dt);
        defect = defect.max((slope - f.eval(times[i], values[i])).abs());
    }
    Ok(PeriodicOrbit {
        beta,
        period,
        times,
        values,
        residual,
        defect,
    })
}

/// `μ = −(1/T) ∫₀ᵀ f_u(t, ω(t)) dt` by composite Simpson over `n_quad`
/// intervals of the orbit samples.
pub fn floquet_exponent(f: &PeriodicNonlinearity, orbit: &PeriodicOrbit, n_quad: usize) -> Result<f64> {
    let n_s = orbit.times.len();
    if n_quad < 2 || n_quad % 2 != 0 {
        return Err(Error::config(format!("n_quad must be even and at least 2, got {n_quad}")));
    }
    if n_s < n_quad + 1 {
        return Err(Error::config(format!(
            "orbit has {n_s} samples, fewer than the {} needed for {n_quad} quadrature intervals",
            n_quad + 1
        )));
    }
    if (n_s - 1) % n_quad != 0 {
        return Err(Error::config(format!(
            "n_quad = {n_quad} does not divide the {} sample intervals",
            n_s - 1
        )));
    }
    let stride = (n_s - 1) / n_quad;
    let h = orbit.period / n_quad as f64;
    let mut sum = 0.0;
    for q in 0..=n_quad {
        let i = q * stride;
        let w = if q == 0 || q == n_quad {
            1.0
        } else if q % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * f.deriv(orbit.times[i], orbit.values[i]);
    }
    let integral = sum * h / 3.0;
    Ok(-integral / orbit.period)
}

/// `φ(t) = exp(∫₀ᵗ f_u − (t/T) ∫₀ᵀ f_u)` along the orbit, for `0 ≤ t ≤ T`.
///
/// Both integrals come from one augmented solve `(d, I)` with
/// `I' = f_u(t, β + d)`, so `φ(0) = φ(T) = 1` up to rounding.
pub fn eigenfunction(f: &PeriodicNonlinearity, orbit: &PeriodicOrbit, t: f64, ctrl: &IntegratorSettings) -> Result<f64> {
    let period = orbit.period;
    if !(0.0..=period).contains(&t) {
        return Err(Error::config(format!("eigenfunction time {t} outside [0, {period}]")));
    }
    let beta = orbit.beta;
    let rhs = |s: f64, y: &[f64; 2]| [f.eval(s, beta + y[0]), f.deriv(s, beta + y[0])];
    let times = [0.0, t, period];
    let ys = if t == period {
        rk::integrate_sampled(rhs, [0.0, 0.0], &[0.0, period], ctrl)?
    } else {
        rk::integrate_sampled(rhs, [0.0, 0.0], &times, ctrl)?
    };
    let (it, itot) = if t == period {
        (ys[1][1], ys[1][1])
    } else {
        (ys[1][1], ys[2][1])
    };
    Ok((it - t / period * itot).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::build_preset;
    use std::collections::BTreeMap;
    use std::f64::consts::{PI, TAU};

    fn u_sin_t() -> PeriodicNonlinearity {
        PeriodicNonlinearity::from_expression("u*sin(t)", TAU, 2.0).unwrap()
    }

    fn logistic() -> PeriodicNonlinearity {
        PeriodicNonlinearity::from_expression("u*(1-u)", 1.0, 1.0).unwrap()
    }

    #[test]
    fn linear_flow_matches_closed_form() {
        let f = u_sin_t();
        let ctrl = IntegratorSettings::default();
        let tr = flow(&f, 0.7, 0.0, TAU, &ctrl, 9).unwrap();
        assert!((tr.endpoint - 0.7).abs() < 1e-7, "{}", tr.endpoint);
        for &(t, w) in &tr.samples {
            let exact = 0.7 * (1.0 - t.cos()).exp();
            assert!((w - exact).abs() < 1e-7 * exact.max(1.0), "t={t} w={w} exact={exact}");
        }
        for &b in &[0.1, 1.0, 1.9] {
            assert!((poincare(&f, b, &ctrl).unwrap() - b).abs() < 1e-7 * b.max(1.0));
        }
    }

    #[test]
    fn zero_nonlinearity_is_identity() {
        let f = PeriodicNonlinearity::from_expression("0", 1.0, 1.0).unwrap();
        let ctrl = IntegratorSettings::default();
        assert_eq!(flow(&f, 0.3, 0.0, 5.0, &ctrl, 0).unwrap().endpoint, 0.3);
        assert_eq!(poincare(&f, 0.3, &ctrl).unwrap(), 0.3);
    }

    #[test]
    fn equilibrium_stays_put() {
        let mut p = BTreeMap::new();
        p.insert("theta".to_string(), 0.25);
        let f = build_preset("bistable_cubic", &p).unwrap();
        let tr = flow(&f, 1.0, 0.0, 37.0, &IntegratorSettings::default(), 0).unwrap();
        assert_eq!(tr.endpoint, 1.0);
    }

    #[test]
    fn threestable_four_is_fixed() {
        let f = build_preset("threestable_paper", &BTreeMap::new()).unwrap();
        let p = poincare(&f, 4.0, &IntegratorSettings::default()).unwrap();
        assert_eq!(p, 4.0);
    }

    #[test]
    fn divergence_reports_absolute_state() {
        let f = PeriodicNonlinearity::from_expression("u^2", 1.0, 1.0).unwrap();
        let ctrl = IntegratorSettings {
            escape_bound: 1e4,
            ..Default::default()
        };
        match flow(&f, 2.0, 0.0, 1.0, &ctrl, 0) {
            Err(Error::Divergence { last_state, .. }) => assert!(last_state > 2.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn floquet_examples() {
        let s = OdeSettings::default();
        let f = logistic();
        let one = PeriodicOrbit::constant(1.0, 1.0, s.n_samples);
        let zero = PeriodicOrbit::constant(0.0, 1.0, s.n_samples);
        assert!((floquet_exponent(&f, &one, s.n_quad).unwrap() - 1.0).abs() < 1e-8);
        assert!((floquet_exponent(&f, &zero, s.n_quad).unwrap() + 1.0).abs() < 1e-8);
        let g = u_sin_t();
        let zero = PeriodicOrbit::constant(0.0, TAU, s.n_samples);
        assert!(floquet_exponent(&g, &zero, s.n_quad).unwrap().abs() < 1e-12);
    }

    #[test]
    fn floquet_rejects_bad_quadrature_sizes() {
        let f = logistic();
        let orbit = PeriodicOrbit::constant(1.0, 1.0, 33);
        assert!(floquet_exponent(&f, &orbit, 64).is_err());
        assert!(floquet_exponent(&f, &orbit, 7).is_err());
        assert!(floquet_exponent(&f, &orbit, 12).is_err());
        assert!(floquet_exponent(&f, &orbit, 16).is_ok());
    }

    #[test]
    fn eigenfunction_examples() {
        let ctrl = IntegratorSettings::default();
        let g = u_sin_t();
        let zero = PeriodicOrbit::constant(0.0, TAU, 9);
        assert!((eigenfunction(&g, &zero, 0.0, &ctrl).unwrap() - 1.0).abs() < 1e-14);
        let v = eigenfunction(&g, &zero, PI, &ctrl).unwrap();
        assert!((v - 2f64.exp()).abs() < 1e-7, "{v}");
        let f = logistic();
        let one = PeriodicOrbit::constant(1.0, 1.0, 9);
        for &t in &[0.1, 0.5, 0.9, 1.0] {
            assert!((eigenfunction(&f, &one, t, &ctrl).unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(eigenfunction(&f, &one, 1.5, &ctrl).is_err());
    }

    #[test]
    fn multiplier_matches_exponent_for_logistic() {
        let f = logistic();
        let ctrl = IntegratorSettings::default();
        let m1 = multiplier(&f, 1.0, 1e-6, &ctrl).unwrap();
        assert!((m1.ln() + 1.0).abs() < 1e-6, "{m1}");
        let m0 = multiplier(&f, 0.0, 1e-6, &ctrl).unwrap();
        assert!((m0.ln() - 1.0).abs() < 1e-5, "{m0}");
    }

    #[test]
    fn nonconstant_kpp_orbit() {
        let mut p = BTreeMap::new();
        p.insert("amplitude".to_string(), 0.5);
        let f = build_preset("kpp_logistic", &p).unwrap();
        let s = OdeSettings::default();
        // ω* = 1/(∫ e^{-R}) form is awkward; locate by iterating P instead
        let mut b = 0.9;
        for _ in 0..60 {
            b = poincare(&f, b, &s.integrator).unwrap();
        }
        let orbit = periodic_orbit(&f, b, &s).unwrap();
        assert!(orbit.residual < 1e-9);
        assert!(orbit.defect < s.defect_tol);
        assert!(orbit.max_value() - orbit.min_value() > 0.05);
        // ∫ f_u = ∫ (1 + a sin − 2ω) = T − 2∫ω and ∫ω = ∫(1 + a sin) = T along the orbit
        let mu = floquet_exponent(&f, &orbit, s.n_quad).unwrap();
        assert!((mu - 1.0).abs() < 1e-6, "{mu}");
        let mid = orbit.value_at(&f, 0.37);
        let direct = flow(&f, b, 0.0, 0.37, &s.integrator, 0).unwrap().endpoint;
        assert!((mid - direct).abs() < 1e-8);
    }
}
