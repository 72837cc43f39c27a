//! Parameter sweeps comparing the two engines cell by cell.
//!
//! Rows are appended to the CSV as each cell finishes, so an interrupted
//! sweep keeps its completed cells and a rerun skips them.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sweptgrid::engine::{comm_profile, per_level_compute, run_standard_steps, run_swept};
use sweptgrid::transport::predict_speedup;
use sweptgrid::{PoolSpec, ProblemKind, SolverConfig, TransportConfig};

/// Full-size array list.
pub const FULL_ARRAYS: [usize; 6] = [320, 480, 640, 800, 960, 1120];
/// Desk-scale arrays: the full list shrunk about fourfold and snapped to
/// multiples of 96, the smallest size every block divides.
pub const DESK_ARRAYS: [usize; 2] = [96, 192];
pub const BLOCKS: [usize; 5] = [8, 12, 16, 24, 32];

pub fn default_shares() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub problems: Vec<ProblemKind>,
    pub arrays: Vec<usize>,
    pub blocks: Vec<usize>,
    pub shares: Vec<f64>,
    pub steps: usize,
    pub repetitions: usize,
    pub ranks: usize,
    pub transport: TransportConfig,
    pub pool_a: PoolSpec,
    pub pool_b: PoolSpec,
    pub cell_seconds: Option<f64>,
    pub out: PathBuf,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let base = SolverConfig::default();
        SweepSpec {
            problems: vec![ProblemKind::Heat, ProblemKind::Euler],
            arrays: DESK_ARRAYS.to_vec(),
            blocks: BLOCKS.to_vec(),
            shares: default_shares(),
            steps: 500,
            repetitions: 1,
            ranks: 2,
            transport: base.transport,
            pool_a: base.pool_a,
            pool_b: base.pool_b,
            cell_seconds: None,
            out: PathBuf::from("sweep-out"),
        }
    }
}

/// One sweep cell: a problem, grid, block size and share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub problem: ProblemKind,
    pub nx: usize,
    pub b: usize,
    pub share: f64,
}

impl SweepSpec {
    /// Full-size arrays; pairs a block does not divide become error rows.
    pub fn full_scale(mut self) -> Self {
        self.arrays = FULL_ARRAYS.to_vec();
        self
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(!self.problems.is_empty(), "no problems selected");
        anyhow::ensure!(
            !self.arrays.is_empty() && !self.blocks.is_empty() && !self.shares.is_empty(),
            "arrays, blocks and shares must be non-empty"
        );
        anyhow::ensure!(self.steps >= 1, "steps must be at least 1");
        anyhow::ensure!(self.repetitions >= 1, "repetitions must be at least 1");
        anyhow::ensure!(self.ranks >= 1, "ranks must be at least 1");
        for s in &self.shares {
            anyhow::ensure!((0.0..=1.0).contains(s), "share {s} outside [0, 1]");
        }
        Ok(())
    }

    /// Array/block pairs that cannot be tiled.
    pub fn indivisible_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &nx in &self.arrays {
            for &b in &self.blocks {
                if nx % b != 0 {
                    out.push((nx, b));
                }
            }
        }
        out
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &problem in &self.problems {
            for &nx in &self.arrays {
                for &b in &self.blocks {
                    for &share in &self.shares {
                        out.push(Cell { problem, nx, b, share });
                    }
                }
            }
        }
        out
    }

    pub fn solver_config(&self, cell: &Cell) -> SolverConfig {
        SolverConfig {
            problem: cell.problem,
            nx: cell.nx,
            block: cell.b,
            share: cell.share,
            steps: self.steps,
            ranks: self.ranks,
            pool_a: self.pool_a,
            pool_b: self.pool_b,
            transport: self.transport,
            cell_seconds: self.cell_seconds,
            ..Default::default()
        }
    }

    pub fn csv_path(&self) -> PathBuf {
        self.out.join("sweep.csv")
    }
}

/// One CSV row. Timing columns are medians over the repetitions; on a failed
/// cell only the key columns and `error` are filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub problem: String,
    pub nx: usize,
    pub b: usize,
    pub share: f64,
    pub ranks: usize,
    pub mode: String,
    pub latency: f64,
    pub bandwidth: f64,
    pub requested_steps: usize,
    pub actual_steps: Option<usize>,
    pub repetitions: usize,
    pub run_seconds_standard: Option<f64>,
    pub run_seconds_swept: Option<f64>,
    pub modeled_seconds_standard: Option<f64>,
    pub modeled_seconds_swept: Option<f64>,
    pub wall_seconds_standard: Option<f64>,
    pub wall_seconds_swept: Option<f64>,
    pub messages_standard: Option<u64>,
    pub messages_swept: Option<u64>,
    pub bytes_standard: Option<u64>,
    pub bytes_swept: Option<u64>,
    pub events_standard: Option<usize>,
    pub events_swept: Option<usize>,
    pub speedup: Option<f64>,
    pub predicted_speedup: Option<f64>,
    pub error: String,
}

/// Column order of the sweep CSV.
pub const CSV_COLUMNS: [&str; 26] = [
    "problem",
    "nx",
    "b",
    "share",
    "ranks",
    "mode",
    "latency",
    "bandwidth",
    "requested_steps",
    "actual_steps",
    "repetitions",
    "run_seconds_standard",
    "run_seconds_swept",
    "modeled_seconds_standard",
    "modeled_seconds_swept",
    "wall_seconds_standard",
    "wall_seconds_swept",
    "messages_standard",
    "messages_swept",
    "bytes_standard",
    "bytes_swept",
    "events_standard",
    "events_swept",
    "speedup",
    "predicted_speedup",
    "error",
];

/// Identity of a cell within a CSV.
pub type CellKey = (String, usize, usize, String, usize, String);

impl BenchRow {
    pub fn key(&self) -> CellKey {
        (
            self.problem.clone(),
            self.nx,
            self.b,
            format!("{:.4}", self.share),
            self.ranks,
            self.mode.clone(),
        )
    }

    fn blank(spec: &SweepSpec, cell: &Cell, error: String) -> Self {
        BenchRow {
            problem: cell.problem.name().to_string(),
            nx: cell.nx,
            b: cell.b,
            share: cell.share,
            ranks: spec.ranks,
            mode: spec.transport.mode.name().to_string(),
            latency: spec.transport.latency,
            bandwidth: spec.transport.bandwidth,
            requested_steps: spec.steps,
            actual_steps: None,
            repetitions: spec.repetitions,
            run_seconds_standard: None,
            run_seconds_swept: None,
            modeled_seconds_standard: None,
            modeled_seconds_swept: None,
            wall_seconds_standard: None,
            wall_seconds_swept: None,
            messages_standard: None,
            messages_swept: None,
            bytes_standard: None,
            bytes_swept: None,
            events_standard: None,
            events_swept: None,
            speedup: None,
            predicted_speedup: None,
            error,
        }
    }
}

/// Median; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn run_cell(spec: &SweepSpec, cell: &Cell) -> anyhow::Result<BenchRow> {
    let config = spec.solver_config(cell);
    config.validate()?;
    let mut sw_times = Vec::new();
    let mut st_times = Vec::new();
    let mut sw_model = Vec::new();
    let mut st_model = Vec::new();
    let mut sw_wall = Vec::new();
    let mut st_wall = Vec::new();
    let mut last = None;
    for _ in 0..spec.repetitions {
        let sw = run_swept(&config)?;
        let st = run_standard_steps(&config, sw.record.actual_steps)?;
        sw_times.push(sw.record.run_seconds());
        st_times.push(st.record.run_seconds());
        sw_model.push(sw.record.modeled_seconds);
        st_model.push(st.record.modeled_seconds);
        sw_wall.push(sw.record.wall_seconds);
        st_wall.push(st.record.wall_seconds);
        last = Some((sw.record, st.record));
    }
    let (sw, st) = last.expect("at least one repetition");
    let profile = comm_profile(&config)?;
    let tau = per_level_compute(&config)?;
    let t_sw = median(&sw_times);
    let t_st = median(&st_times);
    let mut row = BenchRow::blank(spec, cell, String::new());
    row.actual_steps = Some(sw.actual_steps);
    row.run_seconds_standard = Some(t_st);
    row.run_seconds_swept = Some(t_sw);
    row.modeled_seconds_standard = Some(median(&st_model));
    row.modeled_seconds_swept = Some(median(&sw_model));
    row.wall_seconds_standard = Some(median(&st_wall));
    row.wall_seconds_swept = Some(median(&sw_wall));
    row.messages_standard = Some(st.message_count);
    row.messages_swept = Some(sw.message_count);
    row.bytes_standard = Some(st.bytes_sent);
    row.bytes_swept = Some(sw.bytes_sent);
    row.events_standard = Some(st.communication_events);
    row.events_swept = Some(sw.communication_events);
    row.speedup = Some(t_st / t_sw);
    row.predicted_speedup = Some(predict_speedup(&profile, &config.transport.link(), tau));
    Ok(row)
}

/// Reads every row of a sweep CSV.
pub fn read_rows(path: &Path) -> anyhow::Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row.with_context(|| format!("reading {}", path.display()))?);
    }
    Ok(rows)
}

fn write_rows(path: &Path, rows: &[BenchRow]) -> anyhow::Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        if rows.is_empty() {
            w.write_record(CSV_COLUMNS)?;
        }
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepSummary {
    pub ran: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Runs every cell not already present in the CSV without an error.
/// `progress` sees each new row as it is written.
pub fn run_sweep(spec: &SweepSpec, mut progress: impl FnMut(&BenchRow)) -> anyhow::Result<SweepSummary> {
    spec.validate()?;
    std::fs::create_dir_all(&spec.out).with_context(|| format!("creating {}", spec.out.display()))?;
    let path = spec.csv_path();
    let kept: Vec<BenchRow> = if path.exists() {
        read_rows(&path)?.into_iter().filter(|r| r.error.is_empty()).collect()
    } else {
        Vec::new()
    };
    write_rows(&path, &kept)?;
    let done: BTreeSet<CellKey> = kept.iter().map(BenchRow::key).collect();

    let file = OpenOptions::new().append(true).open(&path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let mut summary = SweepSummary::default();
    for cell in spec.cells() {
        let probe = BenchRow::blank(spec, &cell, String::new());
        if done.contains(&probe.key()) {
            summary.skipped += 1;
            continue;
        }
        let row = match run_cell(spec, &cell) {
            Ok(r) => r,
            Err(e) => {
                summary.failed += 1;
                BenchRow::blank(spec, &cell, format!("{e:#}"))
            }
        };
        w.serialize(&row)?;
        w.flush()?;
        summary.ran += 1;
        progress(&row);
    }
    Ok(summary)
}
