//! On-disk layout of a simulation run.
//!
//! ```text
//! <run>/config.toml
//! <run>/manifest.json
//! <run>/ladder.json, ladder_grid.csv
//! <run>/timeline.json           index of snapshots plus window log
//! <run>/snapshots/period_000012.csv
//! <run>/snapshots/period_000012_phase_3of8.csv
//! <run>/timeline.pack           optional
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::write_atomic;
use crate::error::{Error, Result};
use crate::pde::{read_profile_csv, write_profile_csv, GridProfile, PhaseSnapshot, SolutionTimeline};

pub const TIMELINE_FILE: &str = "timeline.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub t: f64,
    pub period: u64,
    /// 0 for period marks.
    pub phase: usize,
    pub phases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineIndex {
    /// Lattice anchor shared by all snapshots.
    pub origin: f64,
    /// The timeline without its profiles.
    pub header: SolutionTimeline,
    pub periods: Vec<SnapshotEntry>,
    pub subperiods: Vec<SnapshotEntry>,
}

impl TimelineIndex {
    pub fn new(tl: &SolutionTimeline, origin: f64) -> Self {
        Self {
            origin,
            header: skeleton(tl),
            periods: Vec::new(),
            subperiods: Vec::new(),
        }
    }

    pub fn read(run: &Path) -> Result<Self> {
        let path = run.join(TIMELINE_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, run: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        write_atomic(&run.join(TIMELINE_FILE), text.as_bytes())
    }

    pub fn last_period(&self) -> Option<u64> {
        self.periods.last().map(|e| e.period)
    }

    /// Every snapshot file, relative to the run directory.
    pub fn files(&self) -> impl Iterator<Item = &str> {
        self.periods.iter().chain(&self.subperiods).map(|e| e.file.as_str())
    }

    /// Appends new snapshots of `tl` (those not yet indexed) and writes
    /// their CSVs; returns the relative paths written.
    pub fn sync(&mut self, run: &Path, tl: &SolutionTimeline) -> Result<Vec<String>> {
        fs::create_dir_all(run.join(SNAPSHOT_DIR)).map_err(|e| Error::io(run, e))?;
        let mut written = Vec::new();
        let done = self.last_period();
        for p in &tl.period_snapshots {
            let j = tl.period_index(p);
            if done.is_some_and(|d| j <= d) {
                continue;
            }
            let file = format!("{SNAPSHOT_DIR}/period_{j:06}.csv");
            write_csv_atomic(&run.join(&file), p)?;
            self.periods.push(SnapshotEntry {
                file: file.clone(),
                t: p.t,
                period: j,
                phase: 0,
                phases: 0,
            });
            written.push(file);
        }
        let have = self.subperiods.len();
        for s in tl.subperiod_snapshots.iter().skip(have) {
            let file = format!("{SNAPSHOT_DIR}/period_{:06}_phase_{}of{}.csv", s.period, s.phase, s.phases);
            write_csv_atomic(&run.join(&file), &s.profile)?;
            self.subperiods.push(SnapshotEntry {
                file: file.clone(),
                t: s.profile.t,
                period: s.period,
                phase: s.phase,
                phases: s.phases,
            });
            written.push(file);
        }
        self.header.window_log = tl.window_log.clone();
        Ok(written)
    }

    /// Rebuilds the full timeline from the CSV files.
    pub fn load(&self, run: &Path) -> Result<SolutionTimeline> {
        let mut tl = self.header.clone();
        let h = tl.h;
        for e in &self.periods {
            tl.period_snapshots.push(read_profile_csv(&run.join(&e.file), self.origin, h, e.t)?);
        }
        for e in &self.subperiods {
            tl.subperiod_snapshots.push(PhaseSnapshot {
                period: e.period,
                phase: e.phase,
                phases: e.phases,
                profile: read_profile_csv(&run.join(&e.file), self.origin, h, e.t)?,
            });
        }
        tl.check_consistency()?;
        Ok(tl)
    }

    /// Drops entries (and subperiod snapshots) beyond period `j`.
    pub fn truncate_after(&mut self, j: u64) {
        self.periods.retain(|e| e.period <= j);
        self.subperiods.retain(|e| e.period < j);
        let t_max = j as f64 * self.header.period * (1.0 + 1e-12);
        self.header.window_log.retain(|e| e.t <= t_max);
    }
}

pub fn skeleton(tl: &SolutionTimeline) -> SolutionTimeline {
    SolutionTimeline {
        period_snapshots: Vec::new(),
        subperiod_snapshots: Vec::new(),
        ..tl.clone()
    }
}

fn write_csv_atomic(path: &Path, p: &GridProfile) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    write_profile_csv(&tmp, p)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Loads a run's timeline, preferring the CSV index.
pub fn load_timeline(run: &Path) -> Result<SolutionTimeline> {
    if run.join(TIMELINE_FILE).is_file() {
        return TimelineIndex::read(run)?.load(run);
    }
    let pack = run.join("timeline.pack");
    if pack.is_file() {
        return crate::pde::read_pack(&pack);
    }
    Err(Error::config(format!(
        "{} holds no timeline ({TIMELINE_FILE} missing); run simulate first",
        run.display()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::Grid1D;

    fn profile(j: u64, first: i64) -> GridProfile {
        let g = Grid1D::new(0.0, 0.1, first, 80).unwrap();
        let values = (0..80).map(|i| 1.0 / (1.0 + (i as f64 / 7.0).exp())).collect();
        GridProfile::new(g, j as f64 * 2.0, values).unwrap()
    }

    #[test]
    fn sync_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut tl = SolutionTimeline {
            period: 2.0,
            steps_per_period: 8,
            h: 0.1,
            alpha: 1.0,
            subperiod_phases: 2,
            subperiod_from: 1,
            period_snapshots: vec![profile(0, -2)],
            subperiod_snapshots: Vec::new(),
            window_log: Vec::new(),
            alpha_orbit: None,
        };
        let mut idx = TimelineIndex::new(&tl, 0.0);
        assert_eq!(idx.sync(dir.path(), &tl).unwrap().len(), 1);
        tl.period_snapshots.push(profile(1, -2));
        let mut sub = profile(1, -2);
        sub.t = 3.0;
        tl.subperiod_snapshots.push(PhaseSnapshot {
            period: 1,
            phase: 1,
            phases: 2,
            profile: sub,
        });
        assert_eq!(idx.sync(dir.path(), &tl).unwrap().len(), 2);
        idx.write(dir.path()).unwrap();
        let back = load_timeline(dir.path()).unwrap();
        assert_eq!(back, tl);
    }
}
