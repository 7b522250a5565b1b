//! Strang-split IMEX stepping: half a reaction step, one Crank–Nicolson
//! diffusion step, half a reaction step.

use serde::{Deserialize, Serialize};

use super::grid::GridProfile;
use super::timeline::{PhaseSnapshot, SolutionTimeline};
use super::tridiag::Tridiagonal;
use super::window::{apply_policy, WindowEvent, WindowPolicy};
use crate::error::{Error, Result};
use crate::nonlinearity::{lipschitz_bound, PeriodicNonlinearity};
use crate::ode::rk::IntegratorSettings;
use crate::ode::{self, OdeSettings, PeriodicOrbit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Crank–Nicolson diffusion, explicit midpoint reaction.
    ImexCn,
    /// Forward Euler diffusion; only for cross-checks.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftBoundary {
    /// `u = ω(α, t)` at the left node.
    OrbitClamp,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RightBoundary {
    Zero,
    Neumann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub h: f64,
    /// Fixed step count per period; `None` picks one automatically.
    pub steps_per_period: Option<u64>,
    /// Starting point of the automatic choice, doubled until admissible.
    pub min_steps_per_period: u64,
    pub scheme: Scheme,
    pub left_bc: LeftBoundary,
    pub right_bc: RightBoundary,
    /// Reaction substeps keep `τ·K̂` below this.
    pub reaction_cfl: f64,
    /// Explicit scheme needs `dt ≤ stability_guard·h²/2`.
    pub stability_guard: f64,
    pub window: WindowPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            h: 0.05,
            steps_per_period: None,
            min_steps_per_period: 2048,
            scheme: Scheme::ImexCn,
            left_bc: LeftBoundary::OrbitClamp,
            right_bc: RightBoundary::Zero,
            reaction_cfl: 1.0,
            stability_guard: 0.9,
            window: WindowPolicy::default(),
        }
    }
}

/// Step sizes derived from a [`SolverConfig`] and a nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub steps_per_period: u64,
    pub dt: f64,
    pub reaction_substeps: usize,
    /// `max |f_u|` over the sampled range.
    pub lipschitz: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::config(format!("h must be positive, got {}", self.h)));
        }
        if self.steps_per_period == Some(0) || self.min_steps_per_period == 0 {
            return Err(Error::config("steps per period must be positive"));
        }
        if !(self.reaction_cfl > 0.0 && self.reaction_cfl <= 2.0) {
            return Err(Error::config("reaction_cfl must lie in (0, 2]"));
        }
        if !(self.stability_guard > 0.0 && self.stability_guard <= 1.0) {
            return Err(Error::config("stability_guard must lie in (0, 1]"));
        }
        self.window.validate()
    }

    /// Chooses `dt = T / steps_per_period` and the reaction substep count.
    ///
    /// The automatic choice doubles from `min_steps_per_period` until
    /// `dt ≤ h²` (nonnegative Crank–Nicolson weights) and, for the explicit
    /// scheme, `dt ≤ stability_guard·h²/2`.
    pub fn plan(&self, f: &PeriodicNonlinearity, u_cap: f64) -> Result<StepPlan> {
        self.validate()?;
        let period = f.period();
        let h2 = self.h * self.h;
        let limit = match self.scheme {
            Scheme::ImexCn => h2,
            Scheme::Explicit => self.stability_guard * h2 / 2.0,
        };
        let steps = match self.steps_per_period {
            Some(n) => {
                if self.scheme == Scheme::Explicit && period / n as f64 > limit {
                    return Err(Error::config(format!(
                        "explicit scheme unstable: dt = {} exceeds {limit}",
                        period / n as f64
                    )));
                }
                n
            }
            None => {
                let mut n = self.min_steps_per_period;
                while period / n as f64 > limit {
                    n = n
                        .checked_mul(2)
                        .ok_or_else(|| Error::config("step count overflow"))?;
                }
                n
            }
        };
        let dt = period / steps as f64;
        let lipschitz = lipschitz_bound(f, u_cap.max(1e-12), 65, 1025)?;
        let substeps = ((dt * lipschitz / self.reaction_cfl).ceil() as usize).max(1);
        Ok(StepPlan {
            steps_per_period: steps,
            dt,
            reaction_substeps: substeps,
            lipschitz,
        })
    }
}

/// Samples the α-orbit at `n_intervals + 1` uniform phases.
pub fn alpha_orbit(
    f: &PeriodicNonlinearity,
    alpha: f64,
    n_intervals: u64,
    ctrl: &IntegratorSettings,
) -> Result<PeriodicOrbit> {
    let settings = OdeSettings {
        integrator: *ctrl,
        n_samples: n_intervals as usize + 1,
        ..OdeSettings::default()
    };
    let orbit = ode::periodic_orbit(f, alpha, &settings)?;
    if orbit.residual > 1e-6 * alpha.abs().max(1.0) {
        return Err(Error::config(format!(
            "alpha = {alpha} is not a fixed point of the period map (|P(alpha) - alpha| = {:.3e})",
            orbit.residual
        )));
    }
    Ok(orbit)
}

/// A running simulation.
pub struct Solver<'f> {
    f: &'f PeriodicNonlinearity,
    cfg: SolverConfig,
    plan: StepPlan,
    alpha: f64,
    orbit: Option<PeriodicOrbit>,
    state: GridProfile,
    period: u64,
    step: u64,
    factor: Option<Tridiagonal>,
    scratch: Vec<f64>,
    events: Vec<WindowEvent>,
    since_check: u64,
}

impl<'f> Solver<'f> {
    /// Starts from `initial` at a whole period `t = jT`.
    ///
    /// With an orbit-clamped left boundary, `alpha` must be a fixed point
    /// of the period map; otherwise it only scales the window's lead level.
    pub fn new(
        f: &'f PeriodicNonlinearity,
        cfg: SolverConfig,
        initial: GridProfile,
        alpha: f64,
        ctrl: &IntegratorSettings,
    ) -> Result<Self> {
        if !initial.all_finite() {
            return Err(Error::config("initial profile has non-finite values"));
        }
        let period = f.period();
        let j = (initial.t / period).round();
        if !(j >= 0.0) || (initial.t - j * period).abs() > 1e-9 * period.max(1.0) * j.max(1.0) {
            return Err(Error::config(format!(
                "initial time {} is not a nonnegative multiple of the period",
                initial.t
            )));
        }
        let data_max = initial.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut u_cap = data_max.max(alpha.abs());
        let mut plan = cfg.plan(f, u_cap.max(1e-12))?;
        let orbit = match cfg.left_bc {
            LeftBoundary::OrbitClamp => {
                let o = alpha_orbit(f, alpha, 2 * plan.steps_per_period, ctrl)?;
                if o.max_value() > u_cap {
                    u_cap = o.max_value();
                    plan = cfg.plan(f, u_cap)?;
                }
                Some(o)
            }
            LeftBoundary::Neumann => None,
        };
        let mut state = initial;
        state.t = j * period;
        let mut s = Self {
            f,
            cfg,
            plan,
            alpha,
            orbit,
            state,
            period: j as u64,
            step: 0,
            factor: None,
            scratch: Vec::new(),
            events: Vec::new(),
            since_check: 0,
        };
        s.apply_boundaries();
        Ok(s)
    }

    pub fn state(&self) -> &GridProfile {
        &self.state
    }

    pub fn into_state(self) -> GridProfile {
        self.state
    }

    pub fn plan(&self) -> &StepPlan {
        &self.plan
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_orbit(&self) -> Option<&PeriodicOrbit> {
        self.orbit.as_ref()
    }

    /// Completed periods.
    pub fn period_index(&self) -> u64 {
        self.period
    }

    pub fn take_window_events(&mut self) -> Vec<WindowEvent> {
        std::mem::take(&mut self.events)
    }

    /// `ω(α, ·)` at step phase `s`.
    fn plateau(&self, s: u64) -> f64 {
        match &self.orbit {
            Some(o) => o.values[2 * s as usize],
            None => self.alpha,
        }
    }

    fn apply_boundaries(&mut self) {
        let n = self.state.values.len();
        if self.cfg.left_bc == LeftBoundary::OrbitClamp {
            self.state.values[0] = self.plateau(self.step);
        }
        if self.cfg.right_bc == RightBoundary::Zero {
            self.state.values[n - 1] = 0.0;
        }
    }

    fn react(&mut self, t_start: f64, span: f64) {
        let m = self.plan.reaction_substeps;
        let tau = span / m as f64;
        for k in 0..m {
            let ta = t_start + k as f64 * tau;
            let fa = self.f.at_time(ta);
            let fm = self.f.at_time(ta + 0.5 * tau);
            for v in self.state.values.iter_mut() {
                let k1 = fa.eval(*v);
                *v += tau * fm.eval(*v + 0.5 * tau * k1);
            }
        }
    }

    fn unknown_range(&self) -> (usize, usize) {
        let n = self.state.values.len();
        let lo = if self.cfg.left_bc == LeftBoundary::Neumann { 0 } else { 1 };
        let hi = if self.cfg.right_bc == RightBoundary::Neumann { n - 1 } else { n - 2 };
        (lo, hi)
    }

    fn factorise(&mut self, r: f64) -> Result<()> {
        let (lo, hi) = self.unknown_range();
        let n = self.state.values.len();
        let m = hi - lo + 1;
        if self.factor.as_ref().is_some_and(|t| t.len() == m) {
            return Ok(());
        }
        let mut lower = vec![-0.5 * r; m];
        let diag = vec![1.0 + r; m];
        let mut upper = vec![-0.5 * r; m];
        if lo == 0 {
            upper[0] = -r;
        }
        if hi == n - 1 {
            lower[m - 1] = -r;
        }
        self.factor = Some(Tridiagonal::factor(&lower, &diag, &upper)?);
        Ok(())
    }

    fn diffuse(&mut self) -> Result<()> {
        let h = self.cfg.h;
        let r = self.plan.dt / (h * h);
        let (lo, hi) = self.unknown_range();
        let u = &self.state.values;
        let n = u.len();
        let lap = |i: usize| {
            let um = if i == 0 { u[1] } else { u[i - 1] };
            let up = if i == n - 1 { u[n - 2] } else { u[i + 1] };
            um - 2.0 * u[i] + up
        };
        match self.cfg.scheme {
            Scheme::ImexCn => {
                self.scratch.clear();
                self.scratch.extend((lo..=hi).map(|i| u[i] + 0.5 * r * lap(i)));
                // fixed boundary values appear at both time levels
                if lo == 1 {
                    self.scratch[0] += 0.5 * r * u[0];
                }
                if hi == n - 2 {
                    let m = self.scratch.len();
                    self.scratch[m - 1] += 0.5 * r * u[n - 1];
                }
                self.factorise(r)?;
                let factor = self.factor.as_ref().expect("factor cached above");
                factor.solve_in_place(&mut self.scratch);
            }
            Scheme::Explicit => {
                self.scratch.clear();
                self.scratch.extend((lo..=hi).map(|i| u[i] + r * lap(i)));
            }
        }
        self.state.values[lo..=hi].copy_from_slice(&self.scratch);
        Ok(())
    }

    /// One time step of size `dt`.
    pub fn step(&mut self) -> Result<()> {
        self.run_block(1)
    }

    /// `k` steps inside the current period. Adjacent reaction half-steps
    /// are fused, so only the block ends carry half-steps.
    fn run_block(&mut self, k: u64) -> Result<()> {
        let dt = self.plan.dt;
        let s0 = self.step;
        let phase0 = s0 as f64 * dt;
        self.react(phase0, 0.5 * dt);
        for i in 0..k {
            self.set_half_boundaries(s0 + i);
            self.diffuse()?;
            let span = if i + 1 == k { 0.5 * dt } else { dt };
            self.react(phase0 + (i as f64 + 0.5) * dt, span);
        }
        self.step += k;
        if self.step == self.plan.steps_per_period {
            self.step = 0;
            self.period += 1;
        }
        self.state.t = self.period as f64 * self.f.period() + self.step as f64 * dt;
        self.apply_boundaries();
        if let Some(node) = self.state.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::BlowUp { node, t: self.state.t });
        }
        self.since_check += k;
        if self.since_check >= self.cfg.window.check_every {
            self.since_check = 0;
            self.shift_window()?;
        }
        Ok(())
    }

    /// Boundary values during the diffusion of step `s`, at phase `(s + ½)·dt`.
    fn set_half_boundaries(&mut self, s: u64) {
        let n = self.state.values.len();
        if let Some(o) = &self.orbit {
            self.state.values[0] = o.values[2 * s as usize + 1];
        }
        if self.cfg.right_bc == RightBoundary::Zero {
            self.state.values[n - 1] = 0.0;
        }
    }

    /// Applies the window policy now.
    pub fn shift_window(&mut self) -> Result<Option<WindowEvent>> {
        let plateau = self.plateau(self.step);
        let ev = apply_policy(
            &mut self.state,
            &self.cfg.window,
            self.alpha,
            plateau,
            self.cfg.left_bc == LeftBoundary::OrbitClamp,
            self.period,
            self.step,
        )?;
        if let Some(e) = ev {
            log::debug!("window moved at t = {:.4}: [{:.3}, {:.3}] n = {}", e.t, e.x_left, e.x_right, e.n);
            self.events.push(e);
        }
        Ok(ev)
    }

    /// Advances to the next period mark, capturing `phases` equally spaced
    /// profiles inside the period (phase 0 excluded) when `phases > 0`.
    pub fn advance_period(&mut self, phases: usize) -> Result<Vec<PhaseSnapshot>> {
        let spp = self.plan.steps_per_period;
        if phases > 0 && spp % phases as u64 != 0 {
            return Err(Error::config(format!(
                "{phases} subperiod phases do not divide {spp} steps"
            )));
        }
        let every = if phases > 0 { spp / phases as u64 } else { spp };
        let mut out = Vec::new();
        let start = self.period;
        while self.period == start {
            let to_mark = every - self.step % every;
            let to_check = self.cfg.window.check_every - self.since_check.min(self.cfg.window.check_every - 1);
            self.run_block(to_mark.min(to_check))?;
            if phases > 0 && self.step != 0 && self.step % every == 0 {
                out.push(PhaseSnapshot {
                    period: self.period,
                    phase: (self.step / every) as usize,
                    phases,
                    profile: self.state.clone(),
                });
            }
        }
        Ok(out)
    }

    /// Runs `k` periods, appending period snapshots (and subperiod ones for
    /// periods the timeline asks for) to `timeline`.
    pub fn advance_periods(&mut self, k: u64, timeline: &mut SolutionTimeline) -> Result<()> {
        if self.step != 0 {
            return Err(Error::Consistency("advance_periods called mid-period".into()));
        }
        timeline.push_period(self.state.clone())?;
        for _ in 0..k {
            let phases = timeline.phases_for(self.period);
            let subs = self.advance_period(phases)?;
            timeline.window_log.extend(self.take_window_events());
            timeline.subperiod_snapshots.extend(subs);
            timeline.push_period(self.state.clone())?;
        }
        Ok(())
    }

    /// A timeline header matching this solver.
    pub fn new_timeline(&self, subperiod_phases: usize, subperiod_from: u64) -> SolutionTimeline {
        SolutionTimeline {
            period: self.f.period(),
            steps_per_period: self.plan.steps_per_period,
            h: self.cfg.h,
            alpha: self.alpha,
            subperiod_phases,
            subperiod_from,
            period_snapshots: Vec::new(),
            subperiod_snapshots: Vec::new(),
            window_log: Vec::new(),
            alpha_orbit: self.orbit.clone(),
        }
    }
}
