//! TOML run definitions.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{build_preset, PeriodicNonlinearity};
use crate::ode::OdeSettings;
use crate::pde::SolverConfig;
use crate::terrace::TerraceSettings;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Arithmetic expression in `t` and `u`, used instead of a preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
}

impl NonlinearitySpec {
    pub fn preset(name: &str, params: &[(&str, f64)]) -> Self {
        Self {
            preset: Some(name.to_string()),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            expression: None,
            period: None,
            u_max: None,
        }
    }

    pub fn build(&self) -> Result<PeriodicNonlinearity> {
        match (&self.preset, &self.expression) {
            (Some(name), None) => {
                if self.period.is_some() || self.u_max.is_some() {
                    return Err(Error::config(
                        "nonlinearity: period and u_max belong to expressions; presets take them as params",
                    ));
                }
                build_preset(name, &self.params)
            }
            (None, Some(src)) => {
                if !self.params.is_empty() {
                    return Err(Error::config("nonlinearity: expressions take no params"));
                }
                let period = self
                    .period
                    .ok_or_else(|| Error::config("nonlinearity: expression needs a period"))?;
                let u_max = self
                    .u_max
                    .ok_or_else(|| Error::config("nonlinearity: expression needs u_max"))?;
                PeriodicNonlinearity::from_expression(src, period, u_max)
            }
            _ => Err(Error::config("nonlinearity: give exactly one of preset or expression")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderSection {
    /// Scan cells on `[0, u_max]`.
    pub grid: usize,
    pub ode: OdeSettings,
}

impl Default for LadderSection {
    fn default() -> Self {
        Self {
            grid: 4000,
            ode: OdeSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    /// Step position of `α·H(a − x)`.
    pub a: f64,
    /// Defaults to the ladder's α.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub x_left: f64,
    pub x_right: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            a: 0.0,
            alpha: None,
            x_left: -20.0,
            x_right: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSection {
    pub subperiod_phases: usize,
    /// Subperiod snapshots are kept for this many final periods.
    pub subperiod_periods: u64,
    pub terrace: TerraceSettings,
}

impl Default for MeasureSection {
    fn default() -> Self {
        Self {
            subperiod_phases: 8,
            subperiod_periods: 3,
            terrace: TerraceSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Also write all snapshots into one binary pack.
    pub pack: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs"),
            pack: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Cartesian product of all value lists.
    #[default]
    Grid,
    /// i-th values taken together; lists must have equal length.
    Zip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mode: SweepMode,
    /// Nonlinearity parameter name to values.
    pub parameters: BTreeMap<String, Vec<f64>>,
}

impl SweepSection {
    /// Parameter assignments, in a fixed order.
    pub fn points(&self) -> Result<Vec<BTreeMap<String, f64>>> {
        if self.parameters.is_empty() || self.parameters.values().any(|v| v.is_empty()) {
            return Ok(Vec::new());
        }
        for (k, vals) in &self.parameters {
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("sweep values for {k} must be finite")));
            }
        }
        match self.mode {
            SweepMode::Zip => {
                let len = self.parameters.values().next().map(Vec::len).unwrap_or(0);
                if self.parameters.values().any(|v| v.len() != len) {
                    return Err(Error::config("zip sweep needs equally long value lists"));
                }
                Ok((0..len)
                    .map(|i| self.parameters.iter().map(|(k, v)| (k.clone(), v[i])).collect())
                    .collect())
            }
            SweepMode::Grid => {
                let mut out = vec![BTreeMap::new()];
                for (k, vals) in &self.parameters {
                    out = out
                        .into_iter()
                        .flat_map(|m| {
                            vals.iter().map(move |v| {
                                let mut m = m.clone();
                                m.insert(k.clone(), *v);
                                m
                            })
                        })
                        .collect();
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Simulated periods.
    #[serde(default)]
    pub horizon: u64,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub ladder: LadderSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub measure: MeasureSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl RunConfig {
    pub fn new(name: &str, nonlinearity: NonlinearitySpec) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            seed: 0,
            horizon: 0,
            nonlinearity,
            ladder: LadderSection::default(),
            initial: InitialSection::default(),
            solver: SolverConfig::default(),
            measure: MeasureSection::default(),
            output: OutputSection::default(),
            sweep: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::config("name must be a nonempty plain file name"));
        }
        self.nonlinearity.build()?;
        if self.ladder.grid < 16 {
            return Err(Error::config("ladder.grid must be at least 16"));
        }
        self.ladder.ode.validate()?;
        self.solver.validate()?;
        self.measure.terrace.validate()?;
        let init = &self.initial;
        if !(init.x_left < init.a && init.a < init.x_right) {
            return Err(Error::config("initial: need x_left < a < x_right"));
        }
        if let Some(alpha) = init.alpha {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::config("initial.alpha must be positive"));
            }
        }
        if let Some((lo, hi)) = self.measure.terrace.fit_window {
            if hi > self.horizon || 2 * (hi - lo) > self.horizon {
                return Err(Error::config(format!(
                    "fit window ({lo}, {hi}) needs a horizon of at least twice its length within {} periods",
                    self.horizon
                )));
            }
        }
        if let Some(s) = &self.sweep {
            s.points()?;
        }
        Ok(())
    }

    /// Copy with nonlinearity parameters overridden and the name suffixed.
    pub fn with_params(&self, params: &BTreeMap<String, f64>, suffix: &str) -> Self {
        let mut c = self.clone();
        for (k, v) in params {
            c.nonlinearity.params.insert(k.clone(), *v);
        }
        c.name = format!("{}-{suffix}", self.name);
        c.sweep = None;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
schema_version = 1
name = "bistable"
horizon = 20

[nonlinearity]
preset = "bistable_cubic"
params = { theta = 0.25 }

[solver]
h = 0.05

[solver.window]
margin = 30.0

[measure.terrace]
lambda_grid = 32
"#;

    #[test]
    fn parse_and_round_trip() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.solver.window.margin, 30.0);
        assert_eq!(c.measure.terrace.lambda_grid, 32);
        let text = c.to_toml().unwrap();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn rejects_bad_input() {
        let unknown = SAMPLE.replace("margin = 30.0", "margn = 30.0");
        let e = RunConfig::parse(&unknown).unwrap_err();
        assert!(e.to_string().contains("margn"), "{e}");
        assert!(e.to_string().contains("line"), "{e}");
        let version = SAMPLE.replace("schema_version = 1", "schema_version = 7");
        assert!(matches!(RunConfig::parse(&version), Err(Error::Config(_))));
        let both = SAMPLE.replace("preset = \"bistable_cubic\"", "preset = \"bistable_cubic\"\nexpression = \"u\"");
        assert!(RunConfig::parse(&both).is_err());
        let window = SAMPLE.replace("lambda_grid = 32", "lambda_grid = 32\nfit_window = [5, 18]");
        assert!(RunConfig::parse(&window).is_err());
    }

    #[test]
    fn sweep_points() {
        let mut s = SweepSection::default();
        assert!(s.points().unwrap().is_empty());
        s.parameters.insert("eps".into(), vec![0.05, 1.0]);
        s.parameters.insert("rho".into(), vec![1.5, 2.0]);
        assert_eq!(s.points().unwrap().len(), 4);
        s.mode = SweepMode::Zip;
        let z = s.points().unwrap();
        assert_eq!(z.len(), 2);
        assert_eq!(z[1]["eps"], 1.0);
        assert_eq!(z[1]["rho"], 2.0);
    }
}
