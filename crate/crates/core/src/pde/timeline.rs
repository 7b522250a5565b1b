//! Snapshots of a run and their on-disk forms.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{Grid1D, GridProfile};
use super::window::WindowEvent;
use crate::error::{Error, Result};
use crate::ode::PeriodicOrbit;

/// A profile at phase `phase / phases` of period `period`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSnapshot {
    /// Index of the period being traversed (the profile lies in `(jT, (j+1)T)`).
    pub period: u64,
    pub phase: usize,
    pub phases: usize,
    pub profile: GridProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionTimeline {
    pub period: f64,
    pub steps_per_period: u64,
    pub h: f64,
    pub alpha: f64,
    /// Phases stored per period for periods `≥ subperiod_from`; 0 for none.
    pub subperiod_phases: usize,
    pub subperiod_from: u64,
    /// Profile at `t = jT` is `period_snapshots[j - first_period()]`.
    pub period_snapshots: Vec<GridProfile>,
    pub subperiod_snapshots: Vec<PhaseSnapshot>,
    pub window_log: Vec<WindowEvent>,
    pub alpha_orbit: Option<PeriodicOrbit>,
}

impl SolutionTimeline {
    pub fn period_index(&self, p: &GridProfile) -> u64 {
        (p.t / self.period).round() as u64
    }

    pub fn first_period(&self) -> Option<u64> {
        self.period_snapshots.first().map(|p| self.period_index(p))
    }

    pub fn last(&self) -> Option<&GridProfile> {
        self.period_snapshots.last()
    }

    pub fn snapshot(&self, j: u64) -> Option<&GridProfile> {
        let first = self.first_period()?;
        j.checked_sub(first)
            .and_then(|k| self.period_snapshots.get(k as usize))
    }

    /// Phases to record while traversing period `j`.
    pub fn phases_for(&self, j: u64) -> usize {
        if j >= self.subperiod_from {
            self.subperiod_phases
        } else {
            0
        }
    }

    /// Appends the profile at the next period mark; a repeat of the last
    /// mark is ignored.
    pub fn push_period(&mut self, p: GridProfile) -> Result<()> {
        let j = self.period_index(&p);
        if (p.t - j as f64 * self.period).abs() > 1e-9 * self.period * (j.max(1) as f64) {
            return Err(Error::Consistency(format!("snapshot time {} is not a period mark", p.t)));
        }
        if let Some(last) = self.last() {
            let jl = self.period_index(last);
            if j == jl {
                return Ok(());
            }
            if j != jl + 1 {
                return Err(Error::Consistency(format!("snapshot for period {j} follows period {jl}")));
            }
        }
        self.period_snapshots.push(p);
        Ok(())
    }

    /// The `(x_left, x_right)` window of every stored period snapshot.
    pub fn windows(&self) -> Vec<(u64, f64, f64)> {
        self.period_snapshots
            .iter()
            .map(|p| (self.period_index(p), p.grid.x_left(), p.grid.x_right()))
            .collect()
    }

    /// Checks that snapshot grids share one lattice and that the window log
    /// reproduces each snapshot's window.
    pub fn check_consistency(&self) -> Result<()> {
        let Some(first) = self.period_snapshots.first() else {
            return Ok(());
        };
        for p in &self.period_snapshots {
            if !p.grid.same_lattice(&first.grid) {
                return Err(Error::Consistency("snapshots are on different lattices".into()));
            }
        }
        for pair in self.period_snapshots.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let last_event = self
                .window_log
                .iter()
                .filter(|e| e.t > a.t && e.t <= b.t + 1e-12)
                .next_back();
            let expect = match last_event {
                Some(e) => (e.x_left, e.x_right),
                None => (a.grid.x_left(), a.grid.x_right()),
            };
            let tol = 1e-9 * first.grid.h;
            if (expect.0 - b.grid.x_left()).abs() > tol || (expect.1 - b.grid.x_right()).abs() > tol {
                return Err(Error::Consistency(format!(
                    "window log disagrees with snapshot at t = {}",
                    b.t
                )));
            }
        }
        Ok(())
    }
}

/// Writes `x,u` rows.
pub fn write_profile_csv(path: &Path, p: &GridProfile) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "u"])?;
    for (i, v) in p.values.iter().enumerate() {
        w.write_record([p.grid.x(i).to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads an `x,u` file written by [`write_profile_csv`], recovering the
/// lattice from `origin` and `h`.
pub fn read_profile_csv(path: &Path, origin: f64, h: f64, t: f64) -> Result<GridProfile> {
    let mut r = csv::Reader::from_path(path)?;
    let mut xs = Vec::new();
    let mut us = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| Error::Parse {
                    column: k,
                    message: "missing field".into(),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse {
                    column: k,
                    message: e.to_string(),
                })
        };
        xs.push(parse(0)?);
        us.push(parse(1)?);
    }
    if xs.is_empty() {
        return Err(Error::Parse {
            column: 0,
            message: format!("{} has no rows", path.display()),
        });
    }
    let first = ((xs[0] - origin) / h).round() as i64;
    let grid = Grid1D::new(origin, h, first, xs.len())?;
    for (i, x) in xs.iter().enumerate() {
        if (grid.x(i) - x).abs() > 1e-6 * h {
            return Err(Error::Parse {
                column: 0,
                message: format!("row {i}: x = {x} is off the lattice"),
            });
        }
    }
    GridProfile::new(grid, t, us)
}

const PACK_MAGIC: &[u8; 8] = b"TLPACK01";

#[derive(Debug, Serialize, Deserialize)]
struct PackEntry {
    kind: PackKind,
    t: f64,
    first_index: i64,
    n: usize,
    #[serde(default)]
    period: u64,
    #[serde(default)]
    phase: usize,
    #[serde(default)]
    phases: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum PackKind {
    Period,
    Subperiod,
}

#[derive(Debug, Serialize, Deserialize)]
struct PackHeader {
    origin: f64,
    h: f64,
    timeline: SolutionTimeline,
    entries: Vec<PackEntry>,
}

/// Writes the whole timeline as `magic, u64 header length, JSON header,
/// little-endian f64 values` in snapshot order.
pub fn write_pack(path: &Path, tl: &SolutionTimeline) -> Result<()> {
    let (origin, h) = tl
        .period_snapshots
        .first()
        .map(|p| (p.grid.origin, p.grid.h))
        .unwrap_or((0.0, tl.h));
    let mut entries = Vec::new();
    for p in &tl.period_snapshots {
        entries.push(PackEntry {
            kind: PackKind::Period,
            t: p.t,
            first_index: p.grid.first_index,
            n: p.grid.n,
            period: 0,
            phase: 0,
            phases: 0,
        });
    }
    for s in &tl.subperiod_snapshots {
        entries.push(PackEntry {
            kind: PackKind::Subperiod,
            t: s.profile.t,
            first_index: s.profile.grid.first_index,
            n: s.profile.grid.n,
            period: s.period,
            phase: s.phase,
            phases: s.phases,
        });
    }
    let skeleton = SolutionTimeline {
        period_snapshots: Vec::new(),
        subperiod_snapshots: Vec::new(),
        ..tl.clone()
    };
    let header = serde_json::to_vec(&PackHeader {
        origin,
        h,
        timeline: skeleton,
        entries,
    })?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(PACK_MAGIC).map_err(io)?;
    w.write_all(&(header.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&header).map_err(io)?;
    let profiles = tl
        .period_snapshots
        .iter()
        .chain(tl.subperiod_snapshots.iter().map(|s| &s.profile));
    for p in profiles {
        for v in &p.values {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn read_pack(path: &Path) -> Result<SolutionTimeline> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != PACK_MAGIC {
        return Err(Error::Serde(format!("{} is not a snapshot pack", path.display())));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(io)?;
    let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut header).map_err(io)?;
    let header: PackHeader = serde_json::from_slice(&header)?;
    let mut tl = header.timeline;
    let mut buf = [0u8; 8];
    for e in header.entries {
        let mut values = Vec::with_capacity(e.n);
        for _ in 0..e.n {
            r.read_exact(&mut buf).map_err(io)?;
            values.push(f64::from_le_bytes(buf));
        }
        let grid = Grid1D::new(header.origin, header.h, e.first_index, e.n)?;
        let profile = GridProfile::new(grid, e.t, values)?;
        match e.kind {
            PackKind::Period => tl.period_snapshots.push(profile),
            PackKind::Subperiod => tl.subperiod_snapshots.push(PhaseSnapshot {
                period: e.period,
                phase: e.phase,
                phases: e.phases,
                profile,
            }),
        }
    }
    Ok(tl)
}
