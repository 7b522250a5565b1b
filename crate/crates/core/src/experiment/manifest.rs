//! Run manifests: config echo, file inventory with digests, headline results.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Headline {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periods_done: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_fronts: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub speeds: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub floors: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub fixed_points: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub software_version: String,
    pub config: RunConfig,
    pub status: RunStatus,
    pub started: String,
    pub finished: Option<String>,
    pub wall_seconds: f64,
    pub error: Option<String>,
    pub files: Vec<FileDigest>,
    pub headline: Headline,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            status: RunStatus::Running,
            started: now_stamp(),
            finished: None,
            wall_seconds: 0.0,
            error: None,
            files: Vec::new(),
            headline: Headline::default(),
        }
    }

    /// Records (or refreshes) the digest of `rel` inside `dir`.
    pub fn track(&mut self, dir: &Path, rel: &str) -> Result<()> {
        let d = digest_file(&dir.join(rel))?;
        let entry = FileDigest {
            path: rel.to_string(),
            bytes: d.0,
            sha256: d.1,
        };
        match self.files.iter_mut().find(|f| f.path == rel) {
            Some(f) => *f = entry,
            None => {
                self.files.push(entry);
                self.files.sort_by(|a, b| a.path.cmp(&b.path));
            }
        }
        Ok(())
    }

    pub fn untrack_missing(&mut self, dir: &Path) {
        self.files.retain(|f| dir.join(&f.path).is_file());
    }

    pub fn finish(&mut self, status: RunStatus, wall_seconds: f64, error: Option<String>) {
        self.status = status;
        self.finished = Some(now_stamp());
        self.wall_seconds = wall_seconds;
        self.error = error;
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Every listed file must exist with a matching digest.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for f in &self.files {
            let (bytes, sha) = digest_file(&dir.join(&f.path))?;
            if bytes != f.bytes || sha != f.sha256 {
                return Err(Error::Consistency(format!("{} does not match its manifest digest", f.path)));
            }
        }
        Ok(())
    }

    /// The manifest with timestamps and wall time blanked, for comparisons
    /// between runs.
    pub fn without_timestamps(&self) -> Self {
        Self {
            started: String::new(),
            finished: self.finished.as_ref().map(|_| String::new()),
            wall_seconds: 0.0,
            ..self.clone()
        }
    }
}

pub fn digest_file(path: &Path) -> Result<(u64, String)> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((total, hex::encode(hasher.finalize())))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn now_stamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Creates `<parent>/<name>-<UTC timestamp>`, adding a counter if taken.
pub fn fresh_run_dir(parent: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S").to_string();
    for i in 0..1000 {
        let dir = if i == 0 {
            parent.join(format!("{name}-{stamp}"))
        } else {
            parent.join(format!("{name}-{stamp}-{i}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    Err(Error::config(format!("could not allocate a run directory under {}", parent.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::NonlinearitySpec;

    #[test]
    fn track_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::new("t", NonlinearitySpec::preset("kpp_logistic", &[]));
        let mut m = RunManifest::new("simulate", &cfg);
        fs::write(dir.path().join("a.csv"), "x,u\n0,1\n").unwrap();
        m.track(dir.path(), "a.csv").unwrap();
        m.finish(RunStatus::Complete, 1.5, None);
        m.write(dir.path()).unwrap();
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        back.verify(dir.path()).unwrap();
        fs::write(dir.path().join("a.csv"), "x,u\n0,2\n").unwrap();
        assert!(matches!(back.verify(dir.path()), Err(Error::Consistency(_))));
        fs::remove_file(dir.path().join("a.csv")).unwrap();
        assert!(matches!(back.verify(dir.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn run_dirs_never_collide() {
        let dir = tempfile::tempdir().unwrap();
        let a = fresh_run_dir(dir.path(), "r").unwrap();
        let b = fresh_run_dir(dir.path(), "r").unwrap();
        assert_ne!(a, b);
    }
}
