//! Point and region update kernels.
//!
//! Kernels are pure: the values written for a region depend only on the
//! levels they read, so any partition of a level into regions produces the
//! same plane bit for bit.

pub mod euler;
pub mod heat;

use thiserror::Error;

use crate::field::FieldState;
use crate::geometry::{Region, StencilShape};

pub use euler::{EulerParams, EulerScheme, VortexSpec};
pub use heat::{HeatParams, HeatScheme};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("non-finite value at ({x}, {y})")]
    NonFinite { x: usize, y: usize },
    #[error("non-physical state at ({x}, {y}): rho = {rho}, p = {p}")]
    NonPhysical { x: usize, y: usize, rho: f64, p: f64 },
    #[error("non-physical state: rho = {rho}, p = {p}")]
    NonPhysicalState { rho: f64, p: f64 },
    #[error("unstable timestep: {0}")]
    Unstable(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// A time scheme that can advance a rectangular region by one sub-step.
pub trait Scheme: Send + Sync {
    fn nvars(&self) -> usize;

    fn stencil(&self) -> StencilShape;

    /// Computes `region` at sub-step `stage` into `out`, laid out
    /// `[var][row][col]` over the region. `prev` is the level just below the
    /// one being produced and `base` is the level the current timestep
    /// started from (the same plane as `prev` for stage 0).
    fn update_region(
        &self,
        stage: usize,
        prev: &FieldState,
        base: &FieldState,
        region: &Region,
        out: &mut [f64],
    ) -> Result<(), PhysicsError>;
}
