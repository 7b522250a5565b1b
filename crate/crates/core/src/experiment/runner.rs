//! Subcommand implementations. Every command writes into a directory of its
//! own and finishes by writing a manifest there.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::manifest::{fresh_run_dir, write_atomic, RunManifest, RunStatus};
use super::store::{load_timeline, TimelineIndex};
use crate::error::{Error, Result};
use crate::ode::{scan_fixed_points, PhaseLadder};
use crate::pde::{heaviside_ic, write_pack, write_profile_csv, Grid1D, GridProfile, SolutionTimeline, Solver};
use crate::signs::{steepness_violations, SteepnessReport};
use crate::terrace::{
    detect_terrace, level_position, plateau_check, speed_sandwich, PlateauReport, SandwichReport,
    TerraceDecomposition, TerraceSettings,
};

pub const LADDER_FILE: &str = "ladder.json";
pub const LADDER_GRID_FILE: &str = "ladder_grid.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const TERRACE_FILE: &str = "terrace.json";

/// A command's output directory and final manifest.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    /// Human-readable remarks (skipped outputs and the like).
    pub notices: Vec<String>,
}

fn output_parent(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone())
}

/// `<parent>/<base>`, or `<base>-2`, `<base>-3`, ... if taken.
fn fresh_subdir(parent: &Path, base: &str) -> Result<PathBuf> {
    for i in 1..10_000 {
        let dir = if i == 1 {
            parent.join(base)
        } else {
            parent.join(format!("{base}-{i}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    Err(Error::config(format!("no free {base} directory under {}", parent.display())))
}

/// The most recent `<parent>/<base>[-i]` holding `marker`.
fn latest_subdir(parent: &Path, base: &str, marker: &str) -> Option<PathBuf> {
    let mut best: Option<(u32, PathBuf)> = None;
    for entry in fs::read_dir(parent).ok()?.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        let i = if name == base {
            1
        } else if let Some(rest) = name.strip_prefix(&format!("{base}-")) {
            match rest.parse::<u32>() {
                Ok(i) => i,
                Err(_) => continue,
            }
        } else {
            continue;
        };
        if entry.path().join(marker).is_file() && best.as_ref().map_or(true, |b| i > b.0) {
            best = Some((i, entry.path()));
        }
    }
    best.map(|b| b.1)
}

fn write_text(dir: &Path, rel: &str, text: &str, m: &mut RunManifest) -> Result<()> {
    write_atomic(&dir.join(rel), text.as_bytes())?;
    m.track(dir, rel)
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(";")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn finish_csv(mut w: csv::Writer<fs::File>, dir: &Path, rel: &str, m: &mut RunManifest) -> Result<()> {
    w.flush().map_err(|e| Error::io(dir.join(rel), e))?;
    m.track(dir, rel)
}

/// Seconds since `start`, rounded to milliseconds.
fn elapsed(start: Instant) -> f64 {
    (start.elapsed().as_secs_f64() * 1e3).round() / 1e3
}

// ---------------------------------------------------------------- ode-scan

fn scan(cfg: &RunConfig) -> Result<PhaseLadder> {
    let f = cfg.nonlinearity.build()?;
    scan_fixed_points(&f, cfg.ladder.grid, &cfg.ladder.ode)
}

fn write_ladder(dir: &Path, ladder: &PhaseLadder, m: &mut RunManifest) -> Result<()> {
    ladder.write_json(&dir.join(LADDER_FILE))?;
    m.track(dir, LADDER_FILE)?;
    ladder.write_grid_csv(&dir.join(LADDER_GRID_FILE))?;
    m.track(dir, LADDER_GRID_FILE)?;
    m.headline.fixed_points = ladder.records.iter().map(|r| r.beta).collect();
    m.headline.alpha = ladder.alpha;
    if !ladder.continua.is_empty() {
        m.headline
            .notes
            .push(format!("{} fixed-point continua flagged", ladder.continua.len()));
    }
    Ok(())
}

/// Scans the phase ladder into a fresh run directory.
pub fn cmd_ode_scan(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = fresh_run_dir(&output_parent(cfg, out), &format!("{}-ladder", cfg.name))?;
    let mut m = RunManifest::new("ode-scan", cfg);
    write_text(&dir, CONFIG_FILE, &cfg.to_toml()?, &mut m)?;
    let res = scan(cfg).and_then(|ladder| write_ladder(&dir, &ladder, &mut m));
    close(dir, m, start, res, Vec::new())
}

fn close(dir: PathBuf, mut m: RunManifest, start: Instant, res: Result<()>, notices: Vec<String>) -> Result<Outcome> {
    match res {
        Ok(()) => {
            m.finish(RunStatus::Complete, elapsed(start), None);
            m.write(&dir)?;
            Ok(Outcome {
                dir,
                manifest: m,
                notices,
            })
        }
        Err(e) => {
            m.untrack_missing(&dir);
            m.finish(RunStatus::Failed, elapsed(start), Some(e.to_string()));
            m.write(&dir)?;
            Err(e)
        }
    }
}

// ---------------------------------------------------------------- simulate

/// Runs the configured simulation into a fresh run directory.
pub fn cmd_simulate(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    cfg.validate()?;
    let dir = fresh_run_dir(&output_parent(cfg, out), &cfg.name)?;
    simulate_into(cfg, &dir)
}

/// Continues an interrupted or failed run from its last period snapshot.
pub fn cmd_resume(run: &Path) -> Result<Outcome> {
    let m = RunManifest::read(run)?;
    if m.command != "simulate" {
        return Err(Error::config(format!("{} is not a simulate run", run.display())));
    }
    if m.status == RunStatus::Complete {
        return Err(Error::config(format!("{} is already complete", run.display())));
    }
    m.config.validate()?;
    run_simulation(&m.config.clone(), run, m)
}

/// Runs a simulation into an existing empty directory.
pub fn simulate_into(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut m = RunManifest::new("simulate", cfg);
    write_text(dir, CONFIG_FILE, &cfg.to_toml()?, &mut m)?;
    m.write(dir)?;
    run_simulation(cfg, dir, m)
}

fn run_simulation(cfg: &RunConfig, dir: &Path, mut m: RunManifest) -> Result<Outcome> {
    let start = Instant::now();
    m.status = RunStatus::Running;
    m.error = None;
    m.finished = None;
    let prior_wall = m.wall_seconds;
    let mut failure_state: Option<GridProfile> = None;
    let res = simulate_body(cfg, dir, &mut m, &mut failure_state);
    if let (Err(_), Some(state)) = (&res, failure_state) {
        let rel = "failure_state.csv";
        if write_profile_csv(&dir.join(rel), &state).is_ok() {
            let _ = m.track(dir, rel);
            m.headline.notes.push(format!("state at failure (t = {}) in {rel}", state.t));
        }
    }
    let wall = prior_wall + elapsed(start);
    match res {
        Ok(()) => {
            m.finish(RunStatus::Complete, wall, None);
            m.write(dir)?;
            Ok(Outcome {
                dir: dir.to_path_buf(),
                manifest: m,
                notices: Vec::new(),
            })
        }
        Err(e) => {
            m.untrack_missing(dir);
            m.finish(RunStatus::Failed, wall, Some(e.to_string()));
            m.write(dir)?;
            Err(e)
        }
    }
}

fn simulate_body(
    cfg: &RunConfig,
    dir: &Path,
    m: &mut RunManifest,
    failure_state: &mut Option<GridProfile>,
) -> Result<()> {
    let f = cfg.nonlinearity.build()?;
    let ladder = if dir.join(LADDER_FILE).is_file() {
        PhaseLadder::read_json(&dir.join(LADDER_FILE))?
    } else {
        let l = scan_fixed_points(&f, cfg.ladder.grid, &cfg.ladder.ode)?;
        write_ladder(dir, &l, m)?;
        l
    };
    let alpha = match cfg.initial.alpha.or(ladder.alpha) {
        Some(a) => a,
        None => {
            return Err(Error::config(
                "no initial.alpha given and the ladder has no positive stable-from-below fixed point",
            ))
        }
    };
    m.headline.alpha = Some(alpha);
    let ctrl = &cfg.ladder.ode.integrator;

    let resumed = dir.join(super::store::TIMELINE_FILE).is_file();
    let (mut solver, mut tl, mut index) = if resumed {
        let mut index = TimelineIndex::read(dir)?;
        let tl = index.load(dir)?;
        let last = tl.last().cloned().ok_or_else(|| Error::config("timeline index is empty"))?;
        let solver = Solver::new(&f, cfg.solver.clone(), last, alpha, ctrl)?;
        if solver.plan().steps_per_period != tl.steps_per_period {
            return Err(Error::Consistency(format!(
                "resumed plan has {} steps per period, the run used {}",
                solver.plan().steps_per_period,
                tl.steps_per_period
            )));
        }
        index.truncate_after(solver.period_index());
        (solver, tl, index)
    } else {
        let init = &cfg.initial;
        let grid = Grid1D::covering(init.x_left, init.x_right, cfg.solver.h, init.a)?;
        let ic = heaviside_ic(grid, init.a, alpha)?;
        let solver = Solver::new(&f, cfg.solver.clone(), ic, alpha, ctrl)?;
        let from = cfg.horizon.saturating_sub(cfg.measure.subperiod_periods);
        let mut tl = solver.new_timeline(cfg.measure.subperiod_phases, from);
        tl.push_period(solver.state().clone())?;
        let index = TimelineIndex::new(&tl, init.a);
        (solver, tl, index)
    };

    let persist = |tl: &SolutionTimeline, index: &mut TimelineIndex, m: &mut RunManifest| -> Result<()> {
        for rel in index.sync(dir, tl)? {
            m.track(dir, &rel)?;
        }
        index.write(dir)?;
        m.track(dir, super::store::TIMELINE_FILE)?;
        m.headline.periods_done = index.last_period();
        m.write(dir)
    };
    persist(&tl, &mut index, m)?;
    while solver.period_index() < cfg.horizon {
        if let Err(e) = solver.advance_periods(1, &mut tl) {
            *failure_state = Some(solver.state().clone());
            return Err(e);
        }
        persist(&tl, &mut index, m)?;
        log::info!(
            "{}: period {}/{} ({} nodes)",
            cfg.name,
            solver.period_index(),
            cfg.horizon,
            solver.state().grid.n
        );
    }
    tl.check_consistency()?;
    if cfg.output.pack {
        write_pack(&dir.join("timeline.pack"), &tl)?;
        m.track(dir, "timeline.pack")?;
    }
    Ok(())
}

// ---------------------------------------------------------------- terrace

/// Everything `terrace` writes to its JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TerraceArtifacts {
    pub settings: TerraceSettings,
    pub decomposition: TerraceDecomposition,
    pub plateau: Option<PlateauReport>,
    pub sandwich: Option<SandwichReport>,
}

impl TerraceArtifacts {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(TERRACE_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Detects the terrace of a finished run. `settings` overrides the run's
/// own measurement settings; `ladder` overrides the run's ladder.
pub fn cmd_terrace(
    run: &Path,
    ladder: Option<&Path>,
    settings: Option<&TerraceSettings>,
    out: Option<&Path>,
) -> Result<Outcome> {
    let start = Instant::now();
    let run_manifest = RunManifest::read(run)?;
    let cfg = run_manifest.config.clone();
    let settings = settings.cloned().unwrap_or_else(|| cfg.measure.terrace.clone());
    settings.validate()?;
    let ladder_path = ladder.map(Path::to_path_buf).unwrap_or_else(|| run.join(LADDER_FILE));
    if !ladder_path.is_file() {
        return Err(Error::config(format!("ladder file {} does not exist", ladder_path.display())));
    }
    let ladder = PhaseLadder::read_json(&ladder_path)?;
    let tl = load_timeline(run)?;
    let dir = match out {
        Some(d) => {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            if fs::read_dir(d).map_err(|e| Error::io(d, e))?.next().is_some() {
                return Err(Error::config(format!("output directory {} is not empty", d.display())));
            }
            d.to_path_buf()
        }
        None => fresh_subdir(run, "terrace")?,
    };
    let mut cfg_echo = cfg.clone();
    cfg_echo.measure.terrace = settings.clone();
    let mut m = RunManifest::new("terrace", &cfg_echo);
    let res = terrace_body(&tl, &ladder, &cfg, &settings, &dir, &mut m);
    close(dir, m, start, res, Vec::new())
}

fn terrace_body(
    tl: &SolutionTimeline,
    ladder: &PhaseLadder,
    cfg: &RunConfig,
    settings: &TerraceSettings,
    dir: &Path,
    m: &mut RunManifest,
) -> Result<()> {
    let dec = match detect_terrace(tl, ladder, settings) {
        Ok(d) => d,
        Err(e) => {
            m.headline.notes.push(e.to_string());
            return Err(e);
        }
    };
    let f = cfg.nonlinearity.build()?;
    let plateau = plateau_check(tl, &dec, settings.plateau_eps, None, settings.plateau_late)?;
    let u_cap = tl
        .alpha_orbit
        .as_ref()
        .map(|o| o.max_value())
        .unwrap_or(tl.alpha)
        .max(tl.alpha);
    let sandwich = speed_sandwich(&dec.traces, &f, u_cap, settings.sandwich_slack)?;

    // per-level traces
    let mut w = csv_writer(&dir.join("traces.csv"))?;
    w.write_record(["lambda", "j", "ell", "increment", "residual"])?;
    for t in &dec.traces {
        let mut prev: Option<f64> = None;
        for (j, pos) in t.periods.iter().zip(&t.positions) {
            let inc = match (prev, pos) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            };
            let resid = match (t.fit, pos) {
                (Some(fit), Some(p)) if (fit.j_lo..=fit.j_hi).contains(j) => {
                    Some(p - (fit.intercept + fit.slope * *j as f64))
                }
                _ => None,
            };
            w.write_record([fmt(t.lambda), j.to_string(), fmt_opt(*pos), fmt_opt(inc), fmt_opt(resid)])?;
            prev = *pos;
        }
    }
    finish_csv(w, dir, "traces.csv", m)?;

    // front profiles at each stored phase
    for fr in &dec.fronts {
        let rel = format!("front_{}.csv", fr.index);
        let mut w = csv_writer(&dir.join(&rel))?;
        w.write_record(["phase", "phases", "t", "xi", "u"])?;
        for p in &fr.period_profiles {
            for (i, v) in p.values.iter().enumerate() {
                w.write_record([
                    p.phase.to_string(),
                    p.phases.to_string(),
                    fmt(p.t),
                    fmt(fr.xi(i)),
                    fmt(*v),
                ])?;
            }
        }
        finish_csv(w, dir, &rel, m)?;
    }

    let mut w = csv_writer(&dir.join("plateau.csv"))?;
    w.write_record(["j", "k", "floor", "x_lo", "x_hi", "nodes", "sup_deviation", "within"])?;
    for e in &plateau.entries {
        w.write_record([
            e.j.to_string(),
            e.k.to_string(),
            fmt(e.floor),
            fmt(e.x_lo),
            fmt(e.x_hi),
            e.nodes.to_string(),
            fmt_opt(e.sup_deviation),
            e.within.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    finish_csv(w, dir, "plateau.csv", m)?;

    m.headline.n_fronts = Some(dec.n_fronts());
    m.headline.speeds = dec.speeds.clone();
    m.headline.floors = dec.floor_values();
    m.headline.alpha = Some(dec.alpha);
    m.headline.notes.extend(dec.diagnostics.iter().cloned());
    if !sandwich.holds() {
        m.headline
            .notes
            .push(format!("{} level speeds exceed the 2*sqrt(K) bound", sandwich.violations.len()));
    }
    let artifacts = TerraceArtifacts {
        settings: settings.clone(),
        decomposition: dec,
        plateau: Some(plateau),
        sandwich: Some(sandwich),
    };
    write_text(dir, TERRACE_FILE, &serde_json::to_string_pretty(&artifacts)?, m)
}

// ---------------------------------------------------------------- signs

/// What a run is compared with in `signs`.
#[derive(Debug, Clone, PartialEq)]
pub enum Against {
    /// Another run on the same lattice.
    Run(PathBuf),
    /// The run itself, shifted in periods.
    Itself,
    /// A spatially constant state.
    Flat(f64),
}

impl Against {
    /// A directory, `self`, or `flat:<value>`.
    pub fn parse(s: &str) -> Result<Self> {
        let p = Path::new(s);
        if p.is_dir() {
            return Ok(Against::Run(p.to_path_buf()));
        }
        if s == "self" {
            return Ok(Against::Itself);
        }
        if let Some(v) = s.strip_prefix("flat:") {
            let v: f64 = v
                .parse()
                .map_err(|_| Error::config(format!("flat reference needs a number, got {v:?}")))?;
            return Ok(Against::Flat(v));
        }
        Err(Error::config(format!(
            "--against {s:?} is neither a run directory, \"self\" nor \"flat:<value>\""
        )))
    }
}

pub fn cmd_signs(
    run: &Path,
    against: &Against,
    shifts: std::ops::RangeInclusive<i64>,
    tol: f64,
    out: Option<&Path>,
) -> Result<Outcome> {
    let start = Instant::now();
    if !(tol >= 0.0) {
        return Err(Error::config("sign tolerance must be nonnegative"));
    }
    let cfg = RunManifest::read(run)?.config;
    let tl = load_timeline(run)?;
    let u1 = &tl.period_snapshots;
    let report: SteepnessReport = match against {
        Against::Run(other) => {
            let tl2 = load_timeline(other)?;
            if tl2.first_period() != tl.first_period() || tl2.period != tl.period {
                return Err(Error::config("the two runs do not share period alignment"));
            }
            steepness_violations(u1, &tl2.period_snapshots, shifts, tol)?
        }
        Against::Itself => steepness_violations(u1, u1, shifts, tol)?,
        Against::Flat(v) => {
            let u2: Vec<GridProfile> = u1.iter().map(|p| GridProfile::constant(p.grid, p.t, *v)).collect();
            steepness_violations(u1, &u2, shifts, tol)?
        }
    };
    let dir = match out {
        Some(d) => {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            d.to_path_buf()
        }
        None => fresh_subdir(run, "signs")?,
    };
    let mut m = RunManifest::new("signs", &cfg);
    let mut w = csv_writer(&dir.join("signs.csv"))?;
    w.write_record(["snapshot_index", "k_shift", "zero_number", "word", "violation_flag"])?;
    for e in &report.entries {
        w.write_record([
            e.snapshot_index.to_string(),
            e.k_shift.to_string(),
            e.zero_number.to_string(),
            e.word.clone(),
            e.violation.to_string(),
        ])?;
    }
    finish_csv(w, &dir, "signs.csv", &mut m)?;
    let n_viol = report.violations().count();
    m.headline.notes.push(if n_viol == 0 {
        format!("{} comparisons, consistent with steeper-than at lattice resolution", report.entries.len())
    } else {
        format!("{n_viol} of {} comparisons violate [+ -]", report.entries.len())
    });
    close(dir, m, start, Ok(()), Vec::new())
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub params: BTreeMap<String, f64>,
    pub run: String,
    pub status: String,
    pub n_fronts: Option<usize>,
    pub speeds: Vec<f64>,
    pub floors: Vec<f64>,
    pub error: Option<String>,
}

fn sweep_point(cfg: &RunConfig, index: usize, params: &BTreeMap<String, f64>, runs: &Path) -> SweepRow {
    let sub = cfg.with_params(params, &format!("{index:03}"));
    let dir = runs.join(format!("run_{index:03}"));
    let mut row = SweepRow {
        index,
        params: params.clone(),
        run: format!("runs/run_{index:03}"),
        status: "failed".into(),
        n_fronts: None,
        speeds: Vec::new(),
        floors: Vec::new(),
        error: None,
    };
    let res = sub
        .validate()
        .and_then(|()| fs::create_dir(&dir).map_err(|e| Error::io(&dir, e)))
        .and_then(|()| simulate_into(&sub, &dir))
        .and_then(|_| cmd_terrace(&dir, None, None, None));
    match res {
        Ok(o) => {
            row.status = "complete".into();
            row.n_fronts = o.manifest.headline.n_fronts;
            row.speeds = o.manifest.headline.speeds;
            row.floors = o.manifest.headline.floors;
        }
        Err(e) => {
            log::warn!("sweep point {index} failed: {e}");
            row.error = Some(e.to_string());
        }
    }
    row
}

/// Runs every sweep point (simulate + terrace) with at most `workers`
/// concurrent runs. Individual failures are recorded, not fatal.
pub fn cmd_sweep(cfg: &RunConfig, out: Option<&Path>, workers: usize) -> Result<Outcome> {
    cfg.validate()?;
    let start = Instant::now();
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep needs a [sweep] section"))?;
    let points = sweep.points()?;
    let dir = fresh_run_dir(&output_parent(cfg, out), &format!("{}-sweep", cfg.name))?;
    let runs = dir.join("runs");
    fs::create_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
    let mut m = RunManifest::new("sweep", cfg);
    write_text(&dir, CONFIG_FILE, &cfg.to_toml()?, &mut m)?;
    m.write(&dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| sweep_point(cfg, i, p, &runs))
            .collect()
    });

    let names: Vec<String> = sweep.parameters.keys().cloned().collect();
    let mut w = csv_writer(&dir.join("summary.csv"))?;
    let mut header = vec!["index".to_string()];
    header.extend(names.iter().cloned());
    header.extend(["run", "status", "n_fronts", "speeds", "floors", "error"].map(String::from));
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![r.index.to_string()];
        rec.extend(names.iter().map(|k| fmt(r.params[k])));
        rec.extend([
            r.run.clone(),
            r.status.clone(),
            r.n_fronts.map(|n| n.to_string()).unwrap_or_default(),
            join(&r.speeds),
            join(&r.floors),
            r.error.clone().unwrap_or_default(),
        ]);
        w.write_record(&rec)?;
    }
    finish_csv(w, &dir, "summary.csv", &mut m)?;

    let mut notices = Vec::new();
    if names.iter().any(|n| n == "eps") && names.iter().any(|n| n == "rho") {
        write_regime_table(&dir, &rows, &mut m)?;
    } else if !rows.is_empty() {
        notices.push("no eps/rho parameters: regime table skipped".to_string());
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    m.headline.notes.push(format!("{} points, {failed} failed", rows.len()));
    m.headline.notes.extend(notices.iter().cloned());
    close(dir, m, start, Ok(()), notices)
}

fn write_regime_table(dir: &Path, rows: &[SweepRow], m: &mut RunManifest) -> Result<()> {
    let mut ok: Vec<(f64, &SweepRow)> = rows
        .iter()
        .filter(|r| r.n_fronts.is_some())
        .map(|r| (r.params["eps"] * r.params["rho"], r))
        .collect();
    ok.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.index.cmp(&b.1.index)));
    let mut w = csv_writer(&dir.join("regime.csv"))?;
    w.write_record(["eps_rho", "eps", "rho", "n_fronts", "speeds", "regime", "transition_from_previous"])?;
    let mut prev: Option<(f64, usize)> = None;
    for (er, r) in &ok {
        let n = r.n_fronts.expect("filtered");
        let regime = match n {
            1 => "single front".to_string(),
            _ if r.speeds.windows(2).all(|s| s[0] < s[1]) => format!("terrace of {n}, speeds increasing"),
            _ => format!("terrace of {n}, speeds not increasing"),
        };
        let transition = match prev {
            Some((per, pn)) if pn != n => format!("N {pn} -> {n} between {per} and {er}"),
            _ => String::new(),
        };
        w.write_record([
            fmt(*er),
            fmt(r.params["eps"]),
            fmt(r.params["rho"]),
            n.to_string(),
            join(&r.speeds),
            regime,
            transition,
        ])?;
        prev = Some((*er, n));
    }
    finish_csv(w, dir, "regime.csv", m)
}

// ---------------------------------------------------------------- report

/// Snapshot periods used for the staircase: up to `k` evenly spaced marks
/// ending at the last one.
fn staircase_periods(first: u64, last: u64, k: u64) -> Vec<u64> {
    if last <= first || k <= 1 {
        return vec![last];
    }
    let span = last - first;
    let mut out: Vec<u64> = (0..k).map(|i| first + span * i / (k - 1)).collect();
    out.dedup();
    out
}

/// Writes plot-ready CSVs for a run. Level curves and drift need a terrace
/// directory (`terrace`, or the latest one inside the run).
pub fn cmd_report(run: &Path, terrace: Option<&Path>, out: Option<&Path>) -> Result<Outcome> {
    let start = Instant::now();
    let cfg = RunManifest::read(run)?.config;
    let tl = load_timeline(run)?;
    let terrace_dir = match terrace {
        Some(t) => {
            if !t.join(TERRACE_FILE).is_file() {
                return Err(Error::config(format!("{} has no {TERRACE_FILE}", t.display())));
            }
            Some(t.to_path_buf())
        }
        None => latest_subdir(run, "terrace", TERRACE_FILE),
    };
    let dir = match out {
        Some(d) => {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            d.to_path_buf()
        }
        None => fresh_subdir(run, "report")?,
    };
    let mut m = RunManifest::new("report", &cfg);
    let mut notices = Vec::new();
    let res = report_body(&tl, terrace_dir.as_deref(), &dir, &mut m, &mut notices);
    m.headline.notes.extend(notices.iter().cloned());
    close(dir, m, start, res, notices)
}

fn report_body(
    tl: &SolutionTimeline,
    terrace_dir: Option<&Path>,
    dir: &Path,
    m: &mut RunManifest,
    notices: &mut Vec<String>,
) -> Result<()> {
    let (first, last) = match (tl.first_period(), tl.last()) {
        (Some(f), Some(l)) => (f, tl.period_index(l)),
        _ => return Err(Error::config("the run has no snapshots")),
    };
    let mut w = csv_writer(&dir.join("staircase.csv"))?;
    w.write_record(["j", "t", "x", "u"])?;
    for j in staircase_periods(first, last, 5) {
        let p = tl.snapshot(j).expect("period in range");
        for (i, v) in p.values.iter().enumerate() {
            w.write_record([j.to_string(), fmt(p.t), fmt(p.grid.x(i)), fmt(*v)])?;
        }
    }
    finish_csv(w, dir, "staircase.csv", m)?;

    let Some(tdir) = terrace_dir else {
        notices.push("no terrace directory: level_curves.csv and drift.csv skipped (run terrace first)".into());
        return Ok(());
    };
    let art = TerraceArtifacts::read(tdir)?;
    let dec = &art.decomposition;

    let mut w = csv_writer(&dir.join("level_curves.csv"))?;
    w.write_record(["j", "t", "lambda", "ell", "front"])?;
    for p in &tl.period_snapshots {
        let j = tl.period_index(p);
        for lv in &dec.levels {
            let ell = level_position(p, lv.lambda).ok();
            w.write_record([
                j.to_string(),
                fmt(p.t),
                fmt(lv.lambda),
                fmt_opt(ell),
                lv.front.map(|k| k.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    finish_csv(w, dir, "level_curves.csv", m)?;

    let mut w = csv_writer(&dir.join("drift.csv"))?;
    w.write_record(["front", "speed", "t", "g", "g_over_t"])?;
    for (k, d) in dec.drifts.iter().enumerate() {
        for (t, g) in &d.samples {
            let ratio = if *t > 0.0 { Some(g.abs() / t) } else { None };
            w.write_record([(k + 1).to_string(), fmt(d.speed), fmt(*t), fmt(*g), fmt_opt(ratio)])?;
        }
    }
    finish_csv(w, dir, "drift.csv", m)?;
    m.headline.n_fronts = Some(dec.n_fronts());
    m.headline.speeds = dec.speeds.clone();
    m.headline.floors = dec.floor_values();
    Ok(())
}
