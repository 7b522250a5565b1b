//! Time-periodic reaction terms `f(t, u)` with `f(t + T, u) = f(t, u)` and
//! `f(t, 0) = 0`.
//!
//! Presets are closed-form families with analytic `f_u`; expressions parsed
//! from configuration fall back to central differences for the derivative.

mod expr;
mod presets;

use std::collections::BTreeMap;
use std::f64::consts::TAU;

pub use expr::Expr;
pub use presets::{build_preset, FamilyPreset, PRESETS};

use crate::error::{Error, Result};

/// Tolerance for the exact-formula invariants of the presets.
pub const TOL_F: f64 = 1e-10;
/// Allowed jump of `f_u` across the branch point of a piecewise preset.
pub const JUNCTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    Analytic,
    /// Central difference with step `1e-6 * max(1, |u|)`.
    CentralDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Kind {
    ThreeStable,
    Mixed { eps: f64, rho: f64 },
    BistableCubic { theta: f64, amplitude: f64 },
    KppLogistic { amplitude: f64 },
    IgnitionFlat { theta: f64, amplitude: f64 },
    LinearPeriodic { rate: f64, amplitude: f64 },
    Expression(Expr),
}

/// A reaction term `f(t, u)`, periodic in `t`.
///
/// Immutable after construction; evaluation is reentrant so a single value
/// can be shared between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicNonlinearity {
    name: String,
    period: f64,
    u_max: f64,
    kind: Kind,
    params: BTreeMap<String, f64>,
}

impl PeriodicNonlinearity {
    pub(crate) fn new(
        name: impl Into<String>,
        period: f64,
        u_max: f64,
        kind: Kind,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::config(format!("period must be positive, got {period}")));
        }
        if !(u_max.is_finite() && u_max > 0.0) {
            return Err(Error::config(format!("u_max must be positive, got {u_max}")));
        }
        Ok(Self {
            name: name.into(),
            period,
            u_max,
            kind,
            params,
        })
    }

    /// Builds a nonlinearity from an arithmetic expression in `t` and `u`.
    pub fn from_expression(src: &str, period: f64, u_max: f64) -> Result<Self> {
        let e = Expr::parse(src)?;
        Self::new(
            format!("expr:{src}"),
            period,
            u_max,
            Kind::Expression(e),
            BTreeMap::new(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Upper end of the state interval `[0, u_max]` of interest.
    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        match self.kind {
            Kind::Expression(_) => DerivativeMode::CentralDifference,
            _ => DerivativeMode::Analytic,
        }
    }

    /// Branch points of piecewise formulas, where smoothness is checked.
    pub fn junctions(&self) -> Vec<f64> {
        match self.kind {
            Kind::ThreeStable => vec![1.0],
            Kind::Mixed { .. } => vec![3.0],
            Kind::IgnitionFlat { theta, .. } => vec![theta],
            _ => Vec::new(),
        }
    }

    /// The time-dependent factor shared by every evaluation at time `t`.
    #[inline]
    fn phase_sine(&self, t: f64) -> f64 {
        match self.kind {
            Kind::ThreeStable | Kind::Mixed { .. } => t.sin(),
            Kind::Expression(_) => 0.0,
            _ => (TAU * t / self.period).sin(),
        }
    }

    #[inline]
    pub fn eval(&self, t: f64, u: f64) -> f64 {
        self.eval_sn(t, self.phase_sine(t), u)
    }

    /// `∂f/∂u`, analytic for presets.
    #[inline]
    pub fn deriv(&self, t: f64, u: f64) -> f64 {
        self.deriv_sn(t, self.phase_sine(t), u)
    }

    /// `f(t, ·)` at a fixed time, with the time factor evaluated once.
    pub fn at_time(&self, t: f64) -> Frozen<'_> {
        Frozen {
            f: self,
            t,
            sn: self.phase_sine(t),
        }
    }

    #[inline]
    fn eval_sn(&self, t: f64, sn: f64, u: f64) -> f64 {
        match &self.kind {
            Kind::ThreeStable => {
                let s = if u < 1.0 { 2.0 } else { 4.0 } + sn;
                let d = u - 1.0;
                let d2 = d * d;
                s * u * u * d2 * d2 * d * (4.0 - u)
            }
            Kind::Mixed { eps, rho } => {
                if u < 3.0 {
                    let d = u - 3.0;
                    eps * rho * u * (-rho * u).exp() * (u - 1.0) * d * d * d
                } else {
                    let d = u - 3.0;
                    (4.0 + sn) * d * d * d * (8.0 - u)
                }
            }
            Kind::BistableCubic { theta, amplitude } => {
                let m = 1.0 + amplitude * sn;
                m * u * (u - theta) * (1.0 - u)
            }
            Kind::KppLogistic { amplitude } => {
                u * (1.0 + amplitude * sn - u)
            }
            Kind::IgnitionFlat { theta, amplitude } => {
                if u <= *theta {
                    0.0
                } else {
                    let m = 1.0 + amplitude * sn;
                    let d = u - theta;
                    m * d * d * (1.0 - u)
                }
            }
            Kind::LinearPeriodic { rate, amplitude } => {
                u * (rate + amplitude * sn)
            }
            Kind::Expression(e) => e.eval(t, u),
        }
    }

    #[inline]
    fn deriv_sn(&self, t: f64, sn: f64, u: f64) -> f64 {
        match &self.kind {
            Kind::ThreeStable => {
                let s = if u < 1.0 { 2.0 } else { 4.0 } + sn;
                let d = u - 1.0;
                let d4 = d * d * d * d;
                let w = 4.0 - u;
                s * (2.0 * u * d4 * d * w + 5.0 * u * u * d4 * w - u * u * d4 * d)
            }
            Kind::Mixed { eps, rho } => {
                if u < 3.0 {
                    let d = u - 3.0;
                    let e = (-rho * u).exp();
                    eps * rho
                        * e
                        * ((1.0 - rho * u) * (u - 1.0) * d * d * d
                            + u * d * d * d
                            + 3.0 * u * (u - 1.0) * d * d)
                } else {
                    let d = u - 3.0;
                    (4.0 + sn) * (3.0 * d * d * (8.0 - u) - d * d * d)
                }
            }
            Kind::BistableCubic { theta, amplitude } => {
                let m = 1.0 + amplitude * sn;
                // u(u-θ)(1-u) = -u^3 + (1+θ)u^2 - θu
                m * (-3.0 * u * u + 2.0 * (1.0 + theta) * u - theta)
            }
            Kind::KppLogistic { amplitude } => {
                1.0 + amplitude * sn - 2.0 * u
            }
            Kind::IgnitionFlat { theta, amplitude } => {
                if u <= *theta {
                    0.0
                } else {
                    let m = 1.0 + amplitude * sn;
                    let d = u - theta;
                    m * (2.0 * d * (1.0 - u) - d * d)
                }
            }
            Kind::LinearPeriodic { rate, amplitude } => {
                rate + amplitude * sn
            }
            Kind::Expression(_) => central_difference(self, t, u),
        }
    }

    /// Checks periodicity, `f(t, 0) = 0`, derivative consistency and
    /// smoothness across branch points on a deterministic sample grid.
    pub fn verify(&self) -> Result<VerificationReport> {
        let n_t = 17;
        let n_u = 33;
        let t_period = self.period;
        let mut report = VerificationReport::default();
        for i in 0..n_t {
            let t = t_period * i as f64 / (n_t - 1) as f64;
            report.zero_defect = report.zero_defect.max(self.eval(t, 0.0).abs());
            for j in 0..n_u {
                let u = self.u_max * j as f64 / (n_u - 1) as f64;
                let v = self.eval(t, u);
                if !v.is_finite() {
                    return Err(Error::NumericalDomain { t, u, value: v });
                }
                let shifted = self.eval(t + t_period, u);
                let scale = v.abs().max(1.0);
                report.periodicity_defect = report.periodicity_defect.max((shifted - v).abs() / scale);
                if self.derivative_mode() == DerivativeMode::Analytic {
                    let a = self.deriv(t, u);
                    let cd = richardson_derivative(self, t, u);
                    let rel = (a - cd).abs() / a.abs().max(1.0);
                    report.derivative_defect = report.derivative_defect.max(rel);
                }
            }
            for &x in &self.junctions() {
                let eps = 1e-9 * x.abs().max(1.0);
                let jump = (self.deriv(t, x + eps) - self.deriv(t, x - eps)).abs();
                report.junction_jump = report.junction_jump.max(jump);
            }
        }
        report.passed = report.zero_defect <= TOL_F
            && report.periodicity_defect <= TOL_F
            && report.derivative_defect <= 1e-6
            && report.junction_jump <= JUNCTION_TOL;
        Ok(report)
    }
}

/// Outcome of [`PeriodicNonlinearity::verify`]; all defects are maxima over
/// the sample grid.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct VerificationReport {
    pub zero_defect: f64,
    pub periodicity_defect: f64,
    pub derivative_defect: f64,
    pub junction_jump: f64,
    pub passed: bool,
}

/// A nonlinearity restricted to one time instant; see
/// [`PeriodicNonlinearity::at_time`].
#[derive(Debug, Clone, Copy)]
pub struct Frozen<'a> {
    f: &'a PeriodicNonlinearity,
    t: f64,
    sn: f64,
}

impl Frozen<'_> {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.f.eval_sn(self.t, self.sn, u)
    }

    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        self.f.deriv_sn(self.t, self.sn, u)
    }
}

fn central_difference(f: &PeriodicNonlinearity, t: f64, u: f64) -> f64 {
    let h = 1e-6 * u.abs().max(1.0);
    (f.eval(t, u + h) - f.eval(t, u - h)) / (2.0 * h)
}

fn richardson_derivative(f: &PeriodicNonlinearity, t: f64, u: f64) -> f64 {
    let h = 1e-4 * u.abs().max(1.0);
    let d1 = (f.eval(t, u + h) - f.eval(t, u - h)) / (2.0 * h);
    let d2 = (f.eval(t, u + 0.5 * h) - f.eval(t, u - 0.5 * h)) / h;
    (4.0 * d2 - d1) / 3.0
}

/// `max |f_u|` over an `n_t × n_u` grid on `[0, T] × [0, u_cap]`.
///
/// Grids with `n' = 2n - 1` nodes contain the coarser grid, so the estimate
/// is nondecreasing under that refinement.
pub fn lipschitz_bound(f: &PeriodicNonlinearity, u_cap: f64, n_t: usize, n_u: usize) -> Result<f64> {
    if !(u_cap > 0.0) {
        return Err(Error::config(format!("u_cap must be positive, got {u_cap}")));
    }
    if n_t < 2 || n_u < 2 {
        return Err(Error::config("lipschitz grid needs at least 2 nodes per axis"));
    }
    let mut k = 0.0f64;
    for i in 0..n_t {
        let t = f.period() * i as f64 / (n_t - 1) as f64;
        for j in 0..n_u {
            let u = u_cap * j as f64 / (n_u - 1) as f64;
            let d = f.deriv(t, u);
            if !d.is_finite() {
                return Err(Error::NumericalDomain { t, u, value: d });
            }
            k = k.max(d.abs());
        }
    }
    Ok(k)
}
