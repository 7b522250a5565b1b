//! Dormand–Prince 5(4) embedded Runge–Kutta pair for small state vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size control for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    pub atol: f64,
    pub rtol: f64,
    /// Largest step as a fraction of the integration span.
    pub max_step_fraction: f64,
    pub max_steps: usize,
    /// States with magnitude above this are treated as blow-up.
    pub escape_bound: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-8,
            max_step_fraction: 0.125,
            max_steps: 10_000_000,
            escape_bound: 1e8,
        }
    }
}

impl IntegratorSettings {
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            atol: self.atol * factor,
            rtol: self.rtol * factor,
            ..*self
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] += h * s;
    }
    out
}

/// One Dormand–Prince step; returns the 5th-order solution, the embedded
/// error vector and the derivative at the new point (FSAL).
#[inline]
fn dp_step<const N: usize, F>(rhs: &F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> ([f64; N], [f64; N], [f64; N])
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k2 = rhs(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = rhs(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = rhs(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(
        t + C5 * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = rhs(
        t + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y_new = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = rhs(t + h, &y_new);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y_new, err, k7)
}

fn check_state<const N: usize>(y: &[f64; N], prev: &[f64; N], t: f64, bound: f64) -> Result<()> {
    if y.iter().any(|v| !v.is_finite() || v.abs() > bound) {
        return Err(Error::Divergence {
            t,
            last_state: prev[0],
        });
    }
    Ok(())
}

/// Starting step from the scale of the state and its derivative.
fn initial_step<const N: usize>(y: &[f64; N], dy: &[f64; N], ctrl: &IntegratorSettings) -> f64 {
    let (mut d0, mut d1) = (0.0f64, 0.0f64);
    for i in 0..N {
        let sc = ctrl.atol + ctrl.rtol * y[i].abs();
        d0 = d0.max(y[i].abs() / sc);
        d1 = d1.max(dy[i].abs() / sc);
    }
    if !d1.is_finite() {
        return 1e-12;
    }
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Integration<const N: usize> {
    pub state: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    /// Accepted step end times, when requested.
    pub mesh: Option<Vec<f64>>,
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1 >= t0` with local error per
/// step at most `atol + rtol * |y|` (componentwise, max norm).
pub fn integrate<const N: usize, F>(
    rhs: F,
    y0: [f64; N],
    t0: f64,
    t1: f64,
    ctrl: &IntegratorSettings,
    record_mesh: bool,
) -> Result<Integration<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    if !(t1 >= t0) {
        return Err(Error::config(format!("integration end {t1} precedes start {t0}")));
    }
    check_state(&y0, &y0, t0, ctrl.escape_bound)?;
    let span = t1 - t0;
    let mut mesh = record_mesh.then(|| vec![t0]);
    if span == 0.0 {
        return Ok(Integration {
            state: y0,
            accepted: 0,
            rejected: 0,
            mesh,
        });
    }
    let h_max = span * ctrl.max_step_fraction;
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    let mut h = initial_step(&y, &k1, ctrl).min(h_max);
    let (mut accepted, mut rejected) = (0usize, 0usize);
    while t < t1 {
        if accepted + rejected >= ctrl.max_steps {
            return Err(Error::StepLimit {
                max_steps: ctrl.max_steps,
                target: t1,
            });
        }
        let last = t + h >= t1 - 1e-14 * span;
        let step = if last { t1 - t } else { h };
        let (y_new, err, k7) = dp_step(&rhs, t, &y, &k1, step);
        let finite = y_new.iter().chain(err.iter()).all(|v| v.is_finite());
        if !finite {
            // stage values overflowed; shrink hard and retry
            rejected += 1;
            h = step * 0.1;
            if h < 1e-15 * span.max(1.0) {
                return Err(Error::Divergence { t, last_state: y[0] });
            }
            continue;
        }
        let mut norm = 0.0f64;
        for i in 0..N {
            let sc = ctrl.atol + ctrl.rtol * y[i].abs().max(y_new[i].abs());
            norm = norm.max(err[i].abs() / sc);
        }
        if norm <= 1.0 {
            check_state(&y_new, &y, t + step, ctrl.escape_bound)?;
            t = if last { t1 } else { t + step };
            y = y_new;
            k1 = k7;
            accepted += 1;
            if let Some(m) = mesh.as_mut() {
                m.push(t);
            }
            let fac = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
            h = (step * fac).min(h_max);
        } else {
            rejected += 1;
            h = step * (0.9 * norm.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-15 * span.max(1.0) {
                // steps collapse only at a singularity of the solution
                return Err(Error::Divergence { t, last_state: y[0] });
            }
        }
    }
    Ok(Integration {
        state: y,
        accepted,
        rejected,
        mesh,
    })
}

/// Accepted explicit steps in a row with `h·|f_u|` near the stability
/// boundary before switching to the implicit pair, and vice versa.
const STIFF_SWITCH_STEPS: usize = 12;

/// Scalar integration that starts with Dormand–Prince and switches to a
/// linearly implicit Rosenbrock 2(3) pair while the explicit steps are
/// limited by stability (`h·|∂f/∂y|` above 3 with `∂f/∂y < 0`).
///
/// Near strongly attracting states the explicit method would crawl at
/// `h ≈ 3/|f_u|`; the implicit pair follows the slow solution with steps
/// set by accuracy alone.
pub fn integrate_scalar<F, J>(rhs: F, jac: J, y0: f64, t0: f64, t1: f64, ctrl: &IntegratorSettings) -> Result<Integration<1>>
where
    F: Fn(f64, f64) -> f64,
    J: Fn(f64, f64) -> f64,
{
    if !(t1 >= t0) {
        return Err(Error::config(format!("integration end {t1} precedes start {t0}")));
    }
    check_state(&[y0], &[y0], t0, ctrl.escape_bound)?;
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(Integration {
            state: [y0],
            accepted: 0,
            rejected: 0,
            mesh: None,
        });
    }
    let vrhs = |t: f64, y: &[f64; 1]| [rhs(t, y[0])];
    let h_max = span * ctrl.max_step_fraction;
    let mut t = t0;
    let mut y = y0;
    let mut k1 = [rhs(t, y)];
    let mut h = initial_step(&[y], &k1, ctrl).min(h_max);
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let mut stiff = false;
    let mut streak = 0usize;
    // Rosenbrock constants (Shampine–Reichelt)
    let d = 1.0 / (2.0 + 2f64.sqrt());
    let e32 = 6.0 + 2f64.sqrt();
    while t < t1 {
        if accepted + rejected >= ctrl.max_steps {
            return Err(Error::StepLimit {
                max_steps: ctrl.max_steps,
                target: t1,
            });
        }
        let last = t + h >= t1 - 1e-14 * span;
        let step = if last { t1 - t } else { h };
        let (y_new, err, order) = if stiff {
            let f0 = rhs(t, y);
            let jy = jac(t, y);
            let dt = 1e-7 * t.abs().max(1.0);
            let ft = (rhs(t + dt, y) - f0) / dt;
            let w = 1.0 - step * d * jy;
            let tt = step * d * ft;
            let r1 = (f0 + tt) / w;
            let f1 = rhs(t + 0.5 * step, y + 0.5 * step * r1);
            let r2 = (f1 - r1) / w + r1;
            let y_new = y + step * r2;
            let f2 = rhs(t + step, y_new);
            let r3 = (f2 - e32 * (r2 - f1) - 2.0 * (r1 - f0) + tt) / w;
            (y_new, step / 6.0 * (r1 - 2.0 * r2 + r3), 3.0)
        } else {
            let (yn, e, k7) = dp_step(&vrhs, t, &[y], &k1, step);
            k1 = k7;
            (yn[0], e[0], 5.0)
        };
        if !(y_new.is_finite() && err.is_finite()) {
            rejected += 1;
            h = step * 0.1;
            if !stiff {
                k1 = [rhs(t, y)];
            }
            if h < 1e-15 * span.max(1.0) {
                return Err(Error::Divergence { t, last_state: y });
            }
            continue;
        }
        let norm = err.abs() / (ctrl.atol + ctrl.rtol * y.abs().max(y_new.abs()));
        if norm <= 1.0 {
            check_state(&[y_new], &[y], t + step, ctrl.escape_bound)?;
            t = if last { t1 } else { t + step };
            y = y_new;
            accepted += 1;
            let fac = if norm == 0.0 {
                5.0
            } else {
                (0.9 * norm.powf(-1.0 / order)).clamp(0.2, 5.0)
            };
            h = (step * fac).min(h_max);
            let jy = jac(t, y);
            let limited = jy < 0.0 && step * jy.abs() > 3.0;
            if stiff != limited && !last {
                streak += 1;
            } else {
                streak = 0;
            }
            if streak >= STIFF_SWITCH_STEPS {
                stiff = !stiff;
                streak = 0;
                if !stiff {
                    h = h.min(2.0 / jy.abs().max(1e-300));
                }
            }
            if !stiff {
                k1 = [rhs(t, y)];
            }
        } else {
            rejected += 1;
            h = step * (0.9 * norm.powf(-1.0 / order)).clamp(0.1, 0.9);
            if !stiff {
                k1 = [rhs(t, y)];
            }
            if h < 1e-15 * span.max(1.0) {
                return Err(Error::Divergence { t, last_state: y });
            }
        }
    }
    Ok(Integration {
        state: [y],
        accepted,
        rejected,
        mesh: None,
    })
}

/// Fixed-mesh Dormand–Prince (5th-order weights) over the given times.
///
/// Reusing the mesh of an adaptive run makes the result a smooth function of
/// the initial data, which finite-difference derivatives rely on.
pub fn integrate_on_mesh<const N: usize, F>(rhs: F, y0: [f64; N], mesh: &[f64], escape_bound: f64) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut y = y0;
    if mesh.len() < 2 {
        return Ok(y);
    }
    let mut k1 = rhs(mesh[0], &y);
    for w in mesh.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        let (y_new, _, k7) = dp_step(&rhs, t, &y, &k1, h);
        check_state(&y_new, &y, w[1], escape_bound)?;
        y = y_new;
        k1 = k7;
    }
    Ok(y)
}

/// Integrates through the increasing sample times, returning the state at
/// each of them. The first sample time is the start time.
pub fn integrate_sampled<const N: usize, F>(
    rhs: F,
    y0: [f64; N],
    times: &[f64],
    ctrl: &IntegratorSettings,
) -> Result<Vec<[f64; N]>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut out = Vec::with_capacity(times.len());
    let Some(&first) = times.first() else {
        return Ok(out);
    };
    let mut y = y0;
    let mut t = first;
    out.push(y);
    for &next in &times[1..] {
        y = integrate(&rhs, y, t, next, ctrl, false)?.state;
        t = next;
        out.push(y);
    }
    Ok(out)
}
