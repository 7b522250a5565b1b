//! Numerical tools for `u_t = u_xx + f(t, u)` with time-periodic `f`.

pub mod error;
pub mod experiment;
pub mod nonlinearity;
pub mod ode;
pub mod pde;
pub mod signs;
pub mod terrace;

pub use error::{Error, Result};
pub use experiment::{RunConfig, RunManifest};
pub use nonlinearity::{build_preset, lipschitz_bound, PeriodicNonlinearity};
pub use ode::{FixedPointRecord, OdeSettings, PeriodicOrbit, PhaseLadder};
pub use pde::{GridProfile, SolutionTimeline, Solver, SolverConfig};
