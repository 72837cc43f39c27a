//! Swept-rule and halo-exchange solvers for two-dimensional unsteady PDEs on
//! periodic structured grids.
//!
//! The swept engine advances each block as many sub-steps as its own data
//! allows and communicates only when it must; the standard engine exchanges
//! halos every sub-step. Both run the same kernels on the same rank layout,
//! over a transport that either measures wall time or models link costs.

pub mod engine;
pub mod field;
pub mod geometry;
pub mod oracle;
pub mod physics;
pub mod snapshot;
pub mod transport;

pub use engine::{
    run, run_standard, run_swept, EngineError, EngineKind, Mode, PoolSpec, ProblemKind, RunOutput,
    RunRecord, SolverConfig, TransportConfig,
};
pub use field::FieldState;
