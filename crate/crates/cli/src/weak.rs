//! Weak scaling: grid points per rank held near constant as ranks grow.

use std::path::PathBuf;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sweptgrid::engine::{run_standard_steps, run_swept};
use sweptgrid::{PoolSpec, ProblemKind, RunRecord, SolverConfig, TransportConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeakSpec {
    pub problems: Vec<ProblemKind>,
    pub ranks: Vec<usize>,
    pub points_per_rank: f64,
    pub block: usize,
    pub share: f64,
    pub steps: usize,
    pub transport: TransportConfig,
    pub pool_a: PoolSpec,
    pub pool_b: PoolSpec,
    pub cell_seconds: Option<f64>,
    pub out: PathBuf,
}

impl Default for WeakSpec {
    fn default() -> Self {
        let base = SolverConfig::default();
        WeakSpec {
            problems: vec![ProblemKind::Heat, ProblemKind::Euler],
            ranks: vec![1, 2, 3, 4],
            points_per_rank: 4e4,
            block: 16,
            share: 0.9,
            steps: 500,
            transport: base.transport,
            pool_a: base.pool_a,
            pool_b: base.pool_b,
            cell_seconds: None,
            out: PathBuf::from("weak-out"),
        }
    }
}

/// Grid side for `ranks`: the multiple of `block` nearest `sqrt(points * ranks)`,
/// never fewer block-columns than ranks.
pub fn grid_side(points_per_rank: f64, ranks: usize, block: usize) -> usize {
    let ideal = (points_per_rank * ranks as f64).sqrt();
    let cols = (ideal / block as f64).round().max(ranks as f64) as usize;
    cols * block
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakRow {
    pub problem: String,
    pub engine: String,
    pub ranks: usize,
    pub nx: usize,
    pub b: usize,
    pub share: f64,
    pub mode: String,
    pub points_per_rank: f64,
    pub requested_steps: usize,
    pub actual_steps: usize,
    pub run_seconds: f64,
    pub seconds_per_step: f64,
    pub messages: u64,
    pub bytes_sent: u64,
    pub communication_events: usize,
    pub bytes_per_event: f64,
}

impl WeakRow {
    fn from_record(r: &RunRecord) -> Self {
        let per_event = if r.communication_events == 0 {
            0.0
        } else {
            r.bytes_sent as f64 / r.communication_events as f64
        };
        WeakRow {
            problem: r.problem.name().into(),
            engine: r.engine.name().into(),
            ranks: r.ranks,
            nx: r.nx,
            b: r.b,
            share: r.share,
            mode: r.mode.name().into(),
            points_per_rank: (r.nx * r.nx) as f64 / r.ranks as f64,
            requested_steps: r.requested_steps,
            actual_steps: r.actual_steps,
            run_seconds: r.run_seconds(),
            seconds_per_step: r.run_seconds() / r.actual_steps as f64,
            messages: r.message_count,
            bytes_sent: r.bytes_sent,
            communication_events: r.communication_events,
            bytes_per_event: per_event,
        }
    }
}

/// Runs both engines at every rank count and writes `weak_scaling.csv`.
pub fn run_weak_scaling(spec: &WeakSpec, mut progress: impl FnMut(&WeakRow)) -> anyhow::Result<Vec<WeakRow>> {
    anyhow::ensure!(!spec.ranks.is_empty(), "no rank counts given");
    std::fs::create_dir_all(&spec.out).with_context(|| format!("creating {}", spec.out.display()))?;
    let path = spec.out.join("weak_scaling.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut rows = Vec::new();
    for &problem in &spec.problems {
        for &ranks in &spec.ranks {
            let config = SolverConfig {
                problem,
                nx: grid_side(spec.points_per_rank, ranks, spec.block),
                block: spec.block,
                share: spec.share,
                steps: spec.steps,
                ranks,
                pool_a: spec.pool_a,
                pool_b: spec.pool_b,
                transport: spec.transport,
                cell_seconds: spec.cell_seconds,
                ..Default::default()
            };
            let sw = run_swept(&config)?;
            let st = run_standard_steps(&config, sw.record.actual_steps)?;
            for rec in [&st.record, &sw.record] {
                let row = WeakRow::from_record(rec);
                w.serialize(&row)?;
                w.flush()?;
                progress(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sides_track_points_per_rank() {
        let sides: Vec<_> = (1..=4).map(|r| grid_side(4e4, r, 16)).collect();
        assert_eq!(sides, vec![208, 288, 352, 400]);
        for (r, n) in sides.iter().enumerate() {
            let ideal = (4e4 * (r + 1) as f64).sqrt();
            assert!((*n as f64 - ideal).abs() <= 8.0);
        }
    }
}
