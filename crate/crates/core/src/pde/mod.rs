//! Finite-difference evolution of `u_t = u_xx + f(t, u)` on a following window.

pub mod grid;
pub mod solver;
pub mod timeline;
pub mod tridiag;
pub mod window;

pub use grid::{heaviside_ic, Grid1D, GridProfile, MIN_NODES};
pub use solver::{alpha_orbit, LeftBoundary, RightBoundary, Scheme, Solver, SolverConfig, StepPlan};
pub use timeline::{read_pack, read_profile_csv, write_pack, write_profile_csv, PhaseSnapshot, SolutionTimeline};
pub use tridiag::Tridiagonal;
pub use window::{apply_policy, WindowEvent, WindowPolicy};
