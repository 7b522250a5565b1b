use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stability::{classify_with_multiplier, SideAnnotation};
use super::{displacement, floquet_exponent, multiplier, periodic_orbit, OdeSettings, PeriodicOrbit};
use crate::error::{Error, Result};
use crate::nonlinearity::PeriodicNonlinearity;

/// JSON has no infinities: non-finite values travel as `"inf"`, `"-inf"`
/// or `"nan"`.
mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}

/// One fixed point of the period map with its orbit and stability data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointRecord {
    pub beta: f64,
    pub orbit: PeriodicOrbit,
    /// `+inf` when a probe orbit escapes within one period.
    #[serde(with = "extended_f64")]
    pub multiplier: f64,
    /// False when `P'` lies outside `[1e-3, 1e3]`, where a step-`1e-6`
    /// difference quotient cannot resolve its logarithm.
    pub multiplier_resolved: bool,
    /// `|P' − 1| ≤ mult_tol`.
    pub degenerate: bool,
    #[serde(with = "extended_f64")]
    pub floquet_exponent: f64,
    pub stable_below: bool,
    pub stable_above: bool,
    pub below_annotation: SideAnnotation,
    pub above_annotation: SideAnnotation,
    /// No other fixed point within one scan cell below (resolution-limited).
    pub isolated_below: bool,
    pub continuum_member: bool,
    /// Estimated order of contact of `P(β) − β` with zero.
    pub contact_order: Option<f64>,
    /// Sign of `P − id` one scan cell below and above β.
    pub sign_below: i8,
    pub sign_above: i8,
}

impl FixedPointRecord {
    /// Entries where the multiplier/exponent relation is testable.
    pub fn nondegenerate(&self) -> bool {
        self.multiplier_resolved && !self.degenerate && !self.continuum_member
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    pub beta: f64,
    pub g: f64,
}

/// Fixed points of `P` on `[0, u_max]` in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLadder {
    pub nonlinearity: String,
    pub period: f64,
    pub records: Vec<FixedPointRecord>,
    /// Largest fixed point stable from below outside continua.
    pub alpha: Option<f64>,
    pub scan_resolution: f64,
    /// Closed intervals where `P` is numerically the identity.
    pub continua: Vec<(f64, f64)>,
    #[serde(skip)]
    pub grid: Vec<GridSample>,
}

impl PhaseLadder {
    pub fn record_at(&self, beta: f64, tol: f64) -> Option<&FixedPointRecord> {
        self.records.iter().find(|r| (r.beta - beta).abs() <= tol)
    }

    /// Nearest record flagged stable from below.
    pub fn nearest_stable_below(&self, value: f64) -> Option<&FixedPointRecord> {
        self.records
            .iter()
            .filter(|r| r.stable_below)
            .min_by(|a, b| (a.beta - value).abs().total_cmp(&(b.beta - value).abs()))
    }

    pub fn alpha_record(&self) -> Option<&FixedPointRecord> {
        self.alpha.and_then(|a| self.record_at(a, 0.0))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// `(beta, g)` rows of the scan, `g = P(β) − β`.
    pub fn write_grid_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Serde(e.to_string()))?;
        w.write_record(["beta", "g"])?;
        for s in &self.grid {
            w.write_record([s.beta.to_string(), s.g.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Shortest β-bracket width for bisection, relative to `max(1, |β|)`.
const BISECT_WIDTH: f64 = 1e-12;
const RESOLVED_RANGE: (f64, f64) = (1e-3, 1e3);

enum Candidate {
    Root(f64),
    /// Sign change between two nodes.
    Bracket(f64, f64, f64, f64),
    /// Local minimum of `|g|` without a sign change.
    Touch(f64, f64),
}

/// Scans `g(β) = P(β) − β` on `n_grid` uniform cells of `[0, u_max]`,
/// refines sign changes by bisection and builds a record per fixed point.
///
/// Runs of at least three nodes with `|g| < continuum_tol` are treated as
/// continua unless they look like the neighbourhood of a single
/// high-order root: nonzero values of consistent sign on each side, `|g|`
/// dipping to one minimum, and a contact order of at least 1.5.
pub fn scan_fixed_points(f: &PeriodicNonlinearity, n_grid: usize, settings: &OdeSettings) -> Result<PhaseLadder> {
    settings.validate()?;
    if n_grid < 16 {
        return Err(Error::config(format!("n_grid must be at least 16, got {n_grid}")));
    }
    let u_max = f.u_max();
    let res = u_max / n_grid as f64;
    let ctrl = &settings.integrator;
    let betas: Vec<f64> = (0..=n_grid)
        .map(|i| if i == n_grid { u_max } else { u_max * i as f64 / n_grid as f64 })
        .collect();
    let gs: Vec<f64> = betas
        .par_iter()
        .map(|&b| displacement(f, b, ctrl))
        .collect::<Result<Vec<_>>>()?;
    let g_at = |b: f64| displacement(f, b, ctrl);

    // classify small-|g| runs
    let mut in_continuum = vec![false; gs.len()];
    let mut continua = Vec::new();
    let mut candidates = Vec::new();
    let mut i = 0;
    while i < gs.len() {
        if gs[i].abs() >= settings.continuum_tol {
            i += 1;
            continue;
        }
        let start = i;
        while i < gs.len() && gs[i].abs() < settings.continuum_tol {
            i += 1;
        }
        let end = i - 1;
        if end - start + 1 >= 3 && !structured_run(&betas[start..=end], &gs[start..=end]) {
            for flag in &mut in_continuum[start..=end] {
                *flag = true;
            }
            continua.push((betas[start], betas[end]));
        } else if let Some(c) = touch_candidate(&betas, &gs, start, end) {
            candidates.push(c);
        }
    }
    let mut flagged = Vec::new();
    for (k, (&b, &g)) in betas.iter().zip(&gs).enumerate() {
        if g == 0.0 {
            let crossing = k > 0 && k + 1 < gs.len() && gs[k - 1] * gs[k + 1] < 0.0;
            if in_continuum[k] && crossing {
                flagged.push(candidates.len());
            }
            if !in_continuum[k] || crossing {
                candidates.push(Candidate::Root(b));
            }
        } else if k + 1 < gs.len() && g * gs[k + 1] < 0.0 {
            // strict sign changes survive inside continua, flagged as members
            if in_continuum[k] || in_continuum[k + 1] {
                flagged.push(candidates.len());
            }
            candidates.push(Candidate::Bracket(b, betas[k + 1], g, gs[k + 1]));
        }
    }

    let mut roots: Vec<(f64, bool)> = Vec::new();
    for (ci, c) in candidates.into_iter().enumerate() {
        let member = flagged.contains(&ci);
        let root = match c {
            Candidate::Root(b) => Some(b),
            Candidate::Bracket(a, b, ga, gb) => Some(bisect(&g_at, a, b, ga, gb)?),
            Candidate::Touch(a, b) => golden_touch(&g_at, a, b, settings.tol_fp)?,
        };
        if let Some(r) = root {
            let g = g_at(r)?;
            if g.abs() <= settings.tol_fp {
                roots.push((r, member));
            } else {
                log::warn!("discarding sign change near {r}: residual {g:e} above tolerance");
            }
        }
    }
    for &(lo, hi) in &continua {
        roots.push((lo, true));
        if hi > lo {
            roots.push((hi, true));
        }
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    roots.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-12 * a.0.abs().max(1.0));

    if !roots.iter().any(|r| r.0 == 0.0) {
        return Err(Error::Consistency(format!(
            "no fixed point at 0 for {} (f(t, 0) must vanish)",
            f.name()
        )));
    }

    let marks: Vec<f64> = roots.iter().map(|r| r.0).collect();
    let records = roots
        .iter()
        .map(|&(beta, cont)| build_record(f, beta, cont, &marks, &continua, res, settings))
        .collect::<Result<Vec<_>>>()?;
    let alpha = records
        .iter()
        .filter(|r| r.stable_below && !r.continuum_member && r.beta > 0.0)
        .map(|r| r.beta)
        .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.max(b))));
    Ok(PhaseLadder {
        nonlinearity: f.name().to_string(),
        period: f.period(),
        records,
        alpha,
        scan_resolution: res,
        continua,
        grid: betas.iter().zip(&gs).map(|(&beta, &g)| GridSample { beta, g }).collect(),
    })
}

/// A small-|g| run looks like one high-order root rather than a continuum.
fn structured_run(betas: &[f64], gs: &[f64]) -> bool {
    let zeros = gs.iter().filter(|g| **g == 0.0).count();
    if zeros > 1 {
        return false;
    }
    let signs: Vec<f64> = gs.iter().filter(|g| **g != 0.0).map(|g| g.signum()).collect();
    let switches = signs.windows(2).filter(|w| w[0] != w[1]).count();
    if switches > 1 {
        return false;
    }
    let (m, _) = gs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("nonempty run");
    let dips = gs[..=m].windows(2).all(|w| w[1].abs() <= w[0].abs())
        && gs[m..].windows(2).all(|w| w[1].abs() >= w[0].abs());
    if !dips {
        return false;
    }
    // contact order from the outermost nodes against the minimum
    let centre = betas[m];
    let mut orders = Vec::new();
    for side in [&betas[..m], &betas[m + 1..]] {
        if side.len() >= 2 {
            let (near, far) = if side[0] < centre {
                (side.len() - 1, 0)
            } else {
                (0, side.len() - 1)
            };
            let idx = |b: f64| betas.iter().position(|x| *x == b).expect("node of run");
            let (gn, gf) = (gs[idx(side[near])].abs(), gs[idx(side[far])].abs());
            let (dn, df) = ((side[near] - centre).abs(), (side[far] - centre).abs());
            if gn > 0.0 && gf > 0.0 && df > dn {
                orders.push((gf / gn).ln() / (df / dn).ln());
            }
        }
    }
    !orders.is_empty() && orders.iter().all(|o| *o >= 1.5)
}

/// A run without sign change or exact zero may hide a tangential root.
fn touch_candidate(betas: &[f64], gs: &[f64], start: usize, end: usize) -> Option<Candidate> {
    let run = &gs[start..=end];
    if run.iter().any(|g| *g == 0.0) {
        return None;
    }
    let same_sign = run.iter().all(|g| g.signum() == run[0].signum());
    if !same_sign {
        return None;
    }
    let (m, _) = run
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
    let k = start + m;
    if k == 0 || k + 1 >= gs.len() {
        return None;
    }
    // neighbours of opposite sign are handled as brackets
    if gs[k - 1].signum() != gs[k].signum() || gs[k + 1].signum() != gs[k].signum() {
        return None;
    }
    Some(Candidate::Touch(betas[k - 1], betas[k + 1]))
}

fn bisect(g: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, mut ga: f64, gb: f64) -> Result<f64> {
    debug_assert!(ga * gb < 0.0);
    for _ in 0..200 {
        if (b - a) <= BISECT_WIDTH * a.abs().max(1.0) {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(m);
        }
        if gm * ga < 0.0 {
            b = m;
        } else {
            a = m;
            ga = gm;
        }
    }
    Ok(0.5 * (a + b))
}

/// Golden-section minimisation of `|g|` on `[a, b]`; a root if the minimum
/// falls under `tol`.
fn golden_touch(g: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<Option<f64>> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (g(c)?.abs(), g(d)?.abs());
    while (b - a) > BISECT_WIDTH * a.abs().max(1.0) {
        if fc == 0.0 {
            return Ok(Some(c));
        }
        if fd == 0.0 {
            return Ok(Some(d));
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c)?.abs();
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d)?.abs();
        }
    }
    let m = 0.5 * (a + b);
    Ok((g(m)?.abs() <= tol).then_some(m))
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn build_record(
    f: &PeriodicNonlinearity,
    beta: f64,
    continuum_member: bool,
    marks: &[f64],
    continua: &[(f64, f64)],
    res: f64,
    settings: &OdeSettings,
) -> Result<FixedPointRecord> {
    let ctrl = &settings.integrator;
    let orbit = periodic_orbit(f, beta, settings)?;
    // a probe that blows up within one period means P' is astronomically large
    let m = match multiplier(f, beta, settings.fd_step, ctrl) {
        Err(Error::Divergence { .. }) => f64::INFINITY,
        other => other?,
    };
    let n_quad = settings.n_quad.min(settings.n_samples - 1);
    let mu = floquet_exponent(f, &orbit, n_quad)?;
    let resolved = m.is_finite() && m >= RESOLVED_RANGE.0 && m <= RESOLVED_RANGE.1;
    let degenerate = (m - 1.0).abs() <= settings.mult_tol;

    // keep the probe well inside the gap to the neighbouring fixed points
    let gap = marks
        .iter()
        .filter(|b| **b != beta)
        .map(|b| (b - beta).abs())
        .fold(f64::INFINITY, f64::min);
    let delta = settings.stability_delta.min(0.25 * gap);
    let verdict = classify_with_multiplier(f, beta, delta, settings.stability_iter, settings, Some(m))?;

    let probe = |b: f64| match displacement(f, b, ctrl) {
        Err(Error::Divergence { last_state, .. }) => Ok(last_state - b),
        other => other,
    };
    let g_lo1 = probe(beta - res)?;
    let g_hi1 = probe(beta + res)?;
    let g_lo2 = probe(beta - 2.0 * res)?;
    let g_hi2 = probe(beta + 2.0 * res)?;
    let mut orders = Vec::new();
    for (g1, g2) in [(g_lo1, g_lo2), (g_hi1, g_hi2)] {
        if g1 != 0.0 && g2 != 0.0 && g1.is_finite() && g2.is_finite() && g1.signum() == g2.signum() {
            orders.push((g2 / g1).abs().log2());
        }
    }
    let contact_order = (!orders.is_empty()).then(|| orders.iter().sum::<f64>() / orders.len() as f64);
    let below_free = !marks.iter().any(|b| *b < beta && *b >= beta - res)
        && !continua.iter().any(|(lo, hi)| *lo < beta && *hi >= beta - res);
    Ok(FixedPointRecord {
        beta,
        orbit,
        multiplier: m,
        multiplier_resolved: resolved,
        degenerate,
        floquet_exponent: mu,
        stable_below: verdict.stable_below,
        stable_above: verdict.stable_above,
        below_annotation: verdict.below.annotation,
        above_annotation: verdict.above.annotation,
        isolated_below: !continuum_member && below_free && g_lo1 != 0.0,
        continuum_member,
        contact_order,
        sign_below: sign_of(g_lo1),
        sign_above: sign_of(g_hi1),
    })
}
