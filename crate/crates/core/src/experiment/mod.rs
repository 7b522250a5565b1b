//! Configuration-driven runs and their on-disk artifacts.

pub mod config;
pub mod manifest;
pub mod runner;
pub mod store;

pub use config::{
    InitialSection, LadderSection, MeasureSection, NonlinearitySpec, OutputSection, RunConfig, SweepMode,
    SweepSection, SCHEMA_VERSION,
};
pub use manifest::{digest_file, FileDigest, Headline, RunManifest, RunStatus};
pub use runner::{
    cmd_ode_scan, cmd_report, cmd_resume, cmd_signs, cmd_simulate, cmd_sweep, cmd_terrace, simulate_into, Against,
    Outcome, SweepRow, TerraceArtifacts,
};
pub use store::{load_timeline, TimelineIndex};
