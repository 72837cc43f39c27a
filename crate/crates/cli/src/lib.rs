//! Benchmark harness for the `sweptgrid` solvers: single runs, parameter
//! sweeps, weak scaling, analytic verification and heatmap rendering.

pub mod cli;
pub mod config;
pub mod render;
pub mod sweep;
pub mod verify;
pub mod weak;
