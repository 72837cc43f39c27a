//! Solvers: the per-sub-step halo-exchange baseline and the swept decomposition.
//!
//! Both engines split the grid into contiguous block-columns per rank (full y
//! extent) and run one [`RankProgram`] per rank on either transport driver.

pub mod slab;
mod standard;
mod swept;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldState;
use crate::geometry::{
    allocate_blocks, build_schedule, BlockGeometry, GeometryError, PhasePlan, Pool, Region,
    DEFAULT_BLOCK_MAX,
};
use crate::physics::euler::{cfl_timestep, vortex_init};
use crate::physics::heat::heat_field;
use crate::physics::{
    EulerParams, EulerScheme, HeatParams, HeatScheme, PhysicsError, Scheme, VortexSpec,
};
use crate::snapshot::{FramePiece, SnapshotError, SnapshotHeader, SnapshotSink};
use crate::transport::{
    run_virtual, run_wall, CommProfile, CostLedger, LinkModel, RankProgram, TransportError,
    WallOptions,
};

pub use slab::{apply_shift, outgoing_strip, TimeSlab};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("schedule violation: {0}")]
    Schedule(String),
    #[error("shift strip has {got} values, expected {want}")]
    StripSize { got: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Heat,
    Euler,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Heat => "heat",
            ProblemKind::Euler => "euler",
        }
    }

    pub fn halo(&self) -> usize {
        match self {
            ProblemKind::Heat => 1,
            ProblemKind::Euler => 2,
        }
    }

    pub fn nvars(&self) -> usize {
        match self {
            ProblemKind::Heat => 1,
            ProblemKind::Euler => 4,
        }
    }

    pub fn substeps(&self) -> usize {
        match self {
            ProblemKind::Heat => 1,
            ProblemKind::Euler => 2,
        }
    }

    /// Modeled seconds per cell per sub-step on a unit-cost worker.
    pub fn default_cell_seconds(&self) -> f64 {
        match self {
            ProblemKind::Heat => 1e-9,
            ProblemKind::Euler => 1e-8,
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "heat" => Ok(ProblemKind::Heat),
            "euler" => Ok(ProblemKind::Euler),
            other => Err(format!("unknown problem '{other}' (expected heat or euler)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Standard,
    Swept,
}

impl EngineKind {
    pub fn name(&self) -> &'static str {
        match self {
            EngineKind::Standard => "standard",
            EngineKind::Swept => "swept",
        }
    }
}

impl std::str::FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "standard" => Ok(EngineKind::Standard),
            "swept" => Ok(EngineKind::Swept),
            other => Err(format!("unknown engine '{other}' (expected standard or swept)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Virtual,
    Wall,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Virtual => "virtual",
            Mode::Wall => "wall",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "virtual" => Ok(Mode::Virtual),
            "wall" => Ok(Mode::Wall),
            other => Err(format!("unknown mode '{other}' (expected virtual or wall)")),
        }
    }
}

/// A worker pool: `workers` concurrent workers, each `cost` times slower per
/// cell than the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub workers: usize,
    pub cost: f64,
}

impl std::str::FromStr for PoolSpec {
    type Err = String;

    /// Parses `workers:cost`, e.g. `8:1.0`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (w, c) = s
            .split_once(':')
            .ok_or_else(|| format!("pool '{s}' must be workers:cost"))?;
        let workers = w.trim().parse().map_err(|_| format!("bad worker count '{w}'"))?;
        let cost = c.trim().parse().map_err(|_| format!("bad cost '{c}'"))?;
        Ok(PoolSpec { workers, cost })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportConfig {
    pub mode: Mode,
    pub latency: f64,
    pub bandwidth: f64,
    /// Wall mode: hold messages back for their modeled cost.
    pub inject: bool,
    pub timeout_seconds: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            mode: Mode::Virtual,
            latency: 1e-5,
            bandwidth: 1e9,
            inject: true,
            timeout_seconds: 120.0,
        }
    }
}

impl TransportConfig {
    pub fn link(&self) -> LinkModel {
        LinkModel {
            latency: self.latency,
            bandwidth: self.bandwidth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub problem: ProblemKind,
    pub engine: EngineKind,
    /// Grid points per side; the grid is square.
    pub nx: usize,
    pub block: usize,
    pub block_max: usize,
    pub share: f64,
    pub steps: usize,
    pub ranks: usize,
    pub pool_a: PoolSpec,
    pub pool_b: PoolSpec,
    pub transport: TransportConfig,
    /// Modeled seconds per cell per sub-step; problem default when unset.
    pub cell_seconds: Option<f64>,
    pub snapshot: Option<PathBuf>,
    pub alpha: f64,
    pub fourier: f64,
    pub gamma: f64,
    pub cfl: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            problem: ProblemKind::Heat,
            engine: EngineKind::Swept,
            nx: 64,
            block: 16,
            block_max: DEFAULT_BLOCK_MAX,
            share: 0.9,
            steps: 10,
            ranks: 1,
            pool_a: PoolSpec {
                workers: 8,
                cost: 1.0,
            },
            pool_b: PoolSpec {
                workers: 1,
                cost: 1.0,
            },
            transport: TransportConfig::default(),
            cell_seconds: None,
            snapshot: None,
            alpha: 1.0,
            fourier: 0.2,
            gamma: 1.4,
            cfl: 0.4,
        }
    }
}

impl SolverConfig {
    pub fn geometry(&self) -> Result<BlockGeometry, EngineError> {
        Ok(BlockGeometry::with_cap(self.block, self.problem.halo(), self.block_max)?)
    }

    pub fn cell_seconds(&self) -> f64 {
        self.cell_seconds
            .unwrap_or_else(|| self.problem.default_cell_seconds())
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if self.nx == 0 || self.block == 0 {
            return bad("nx and block must be positive".into());
        }
        self.geometry()?;
        if self.nx % self.block != 0 {
            return bad(format!(
                "nx = {} is not divisible by the block size {}",
                self.nx, self.block
            ));
        }
        if self.ranks == 0 {
            return bad("at least one rank is required".into());
        }
        if self.nx / self.block < self.ranks {
            return bad(format!(
                "{} block-columns cannot be split over {} ranks",
                self.nx / self.block,
                self.ranks
            ));
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.share) {
            return bad(format!("share {} outside [0, 1]", self.share));
        }
        for (name, p) in [("pool-a", self.pool_a), ("pool-b", self.pool_b)] {
            if p.workers == 0 || !(p.cost > 0.0 && p.cost.is_finite()) {
                return bad(format!("{name} needs workers >= 1 and cost > 0, got {p:?}"));
            }
        }
        if !(self.cell_seconds() >= 0.0) {
            return bad("cell_seconds must be non-negative".into());
        }
        self.transport.link().check()?;
        if !(self.transport.timeout_seconds > 0.0) {
            return bad("transport timeout must be positive".into());
        }
        Ok(())
    }

    /// Swept schedule for this configuration.
    pub fn plan(&self) -> Result<PhasePlan, EngineError> {
        let problem = build_problem(self)?;
        Ok(build_schedule(self.steps, self.geometry()?, &problem.scheme.stencil())?)
    }
}

/// Rank ownership of block-columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankLayout {
    pub rank_count: usize,
    pub block: usize,
    /// Per rank: first global block-column and column count.
    pub columns: Vec<(usize, usize)>,
}

impl RankLayout {
    pub fn new(nx: usize, block: usize, ranks: usize) -> Result<Self, EngineError> {
        let bx = nx / block;
        if nx % block != 0 || ranks == 0 || bx < ranks {
            return Err(EngineError::Config(format!(
                "cannot lay out {bx} block-columns over {ranks} ranks"
            )));
        }
        let columns = (0..ranks)
            .map(|r| {
                let c0 = r * bx / ranks;
                let c1 = (r + 1) * bx / ranks;
                (c0, c1 - c0)
            })
            .collect();
        Ok(RankLayout {
            rank_count: ranks,
            block,
            columns,
        })
    }

    /// First grid column and width of `rank`.
    pub fn extent(&self, rank: usize) -> (usize, usize) {
        let (c0, n) = self.columns[rank];
        (c0 * self.block, n * self.block)
    }

    pub fn left(&self, rank: usize) -> usize {
        (rank + self.rank_count - 1) % self.rank_count
    }

    pub fn right(&self, rank: usize) -> usize {
        (rank + 1) % self.rank_count
    }
}

/// Initial field, scheme and snapshot header of a configured problem.
pub struct Problem {
    pub scheme: Arc<dyn Scheme>,
    pub initial: FieldState,
    pub header: SnapshotHeader,
}

pub fn build_problem(config: &SolverConfig) -> Result<Problem, EngineError> {
    let n = config.nx;
    match config.problem {
        ProblemKind::Heat => {
            let params = HeatParams::unit_square(n, n, config.alpha, config.fourier);
            let scheme = HeatScheme::new(params)?;
            Ok(Problem {
                scheme: Arc::new(scheme),
                initial: heat_field(n, n, 0.0, config.alpha),
                header: SnapshotHeader {
                    problem: "heat".into(),
                    nx: n,
                    ny: n,
                    nvars: 1,
                    b: config.block,
                    dt: params.dt,
                    dx: params.dx,
                    dy: params.dy,
                    params: BTreeMap::from([
                        ("alpha".to_string(), config.alpha),
                        ("fourier".to_string(), config.fourier),
                    ]),
                },
            })
        }
        ProblemKind::Euler => {
            let spec = VortexSpec::standard(config.gamma);
            let (dx, dy) = spec.spacing(n, n);
            let initial = vortex_init(n, n, &spec, config.gamma)?;
            let dt = cfl_timestep(&initial, config.gamma, dx, dy, config.cfl)?;
            let params = EulerParams {
                gamma: config.gamma,
                dx,
                dy,
                dt,
                cfl: config.cfl,
            };
            Ok(Problem {
                scheme: Arc::new(EulerScheme::new(params)?),
                initial,
                header: SnapshotHeader {
                    problem: "euler".into(),
                    nx: n,
                    ny: n,
                    nvars: 4,
                    b: config.block,
                    dt,
                    dx,
                    dy,
                    params: BTreeMap::from([
                        ("gamma".to_string(), config.gamma),
                        ("cfl".to_string(), config.cfl),
                        ("mach".to_string(), spec.mach),
                        ("beta".to_string(), spec.beta),
                        ("half_width".to_string(), spec.half_width),
                    ]),
                },
            })
        }
    }
}

struct PoolExec {
    spec: PoolSpec,
    threads: Option<rayon::ThreadPool>,
}

/// Runs the regions of one level on a rank's two worker pools and accounts
/// for their cost.
pub(crate) struct Compute {
    scheme: Arc<dyn Scheme>,
    pools: [PoolExec; 2],
    cell_seconds: f64,
    mode: Mode,
    seconds: f64,
    phase_seconds: BTreeMap<String, f64>,
}

fn pool_index(p: Pool) -> usize {
    match p {
        Pool::A => 0,
        Pool::B => 1,
    }
}

impl Compute {
    fn new(config: &SolverConfig, scheme: Arc<dyn Scheme>) -> Result<Self, EngineError> {
        let make = |spec: PoolSpec| -> Result<PoolExec, EngineError> {
            let threads = if config.transport.mode == Mode::Wall && spec.workers > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(spec.workers)
                        .build()
                        .map_err(|e| EngineError::Config(format!("worker pool: {e}")))?,
                )
            } else {
                None
            };
            Ok(PoolExec { spec, threads })
        };
        Ok(Compute {
            scheme,
            pools: [make(config.pool_a)?, make(config.pool_b)?],
            cell_seconds: config.cell_seconds(),
            mode: config.transport.mode,
            seconds: 0.0,
            phase_seconds: BTreeMap::new(),
        })
    }

    /// Modeled seconds to compute `cells[p]` cells on each pool concurrently.
    fn modeled(&self, cells: [usize; 2]) -> f64 {
        let mut worst = 0.0f64;
        for (p, &c) in self.pools.iter().zip(&cells) {
            worst = worst.max(c as f64 * self.cell_seconds * p.spec.cost / p.spec.workers as f64);
        }
        worst
    }

    fn run_pool(
        &self,
        pool: usize,
        stage: usize,
        prev: &FieldState,
        base: &FieldState,
        regions: &[Region],
    ) -> Result<Vec<Vec<f64>>, PhysicsError> {
        let nvars = self.scheme.nvars();
        let exec = &self.pools[pool];
        let reps = match self.mode {
            Mode::Wall => (exec.spec.cost.round() as usize).max(1),
            Mode::Virtual => 1,
        };
        let one = |r: &Region| -> Result<Vec<f64>, PhysicsError> {
            let mut out = vec![0.0; nvars * r.area()];
            for _ in 0..reps {
                self.scheme.update_region(stage, prev, base, r, &mut out)?;
            }
            Ok(out)
        };
        match &exec.threads {
            Some(tp) => {
                use rayon::prelude::*;
                tp.install(|| regions.par_iter().map(one).collect())
            }
            None => regions.iter().map(one).collect(),
        }
    }

    /// Computes `regions` (each tagged with its pool) and returns their
    /// values in the same order.
    fn level(
        &mut self,
        phase: &str,
        stage: usize,
        prev: &FieldState,
        base: &FieldState,
        regions: &[(Region, Pool)],
    ) -> Result<Vec<Vec<f64>>, EngineError> {
        let start = Instant::now();
        let mut split: [Vec<Region>; 2] = [Vec::new(), Vec::new()];
        let mut order = Vec::with_capacity(regions.len());
        for (r, p) in regions {
            let i = pool_index(*p);
            order.push((i, split[i].len()));
            split[i].push(*r);
        }
        let cells = [
            split[0].iter().map(|r| r.area()).sum::<usize>(),
            split[1].iter().map(|r| r.area()).sum::<usize>(),
        ];
        let (a, b) = if self.mode == Mode::Wall && !split[0].is_empty() && !split[1].is_empty() {
            let this = &*self;
            std::thread::scope(|s| {
                let hb = s.spawn(|| this.run_pool(1, stage, prev, base, &split[1]));
                let a = this.run_pool(0, stage, prev, base, &split[0]);
                (a, hb.join().expect("pool thread panicked"))
            })
        } else {
            (
                self.run_pool(0, stage, prev, base, &split[0]),
                self.run_pool(1, stage, prev, base, &split[1]),
            )
        };
        let mut outs = [a?, b?];
        let values = order
            .into_iter()
            .map(|(p, i)| std::mem::take(&mut outs[p][i]))
            .collect();
        let elapsed = start.elapsed().as_secs_f64();
        self.seconds += match self.mode {
            Mode::Virtual => self.modeled(cells),
            Mode::Wall => elapsed,
        };
        *self.phase_seconds.entry(phase.to_string()).or_insert(0.0) += elapsed;
        Ok(values)
    }

    fn take_seconds(&mut self) -> f64 {
        std::mem::take(&mut self.seconds)
    }
}

/// Per-run outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub engine: EngineKind,
    pub problem: ProblemKind,
    pub mode: Mode,
    pub nx: usize,
    pub b: usize,
    pub share: f64,
    pub ranks: usize,
    pub requested_steps: usize,
    pub actual_steps: usize,
    /// Last completed sub-step level.
    pub flat_level: usize,
    pub dt: f64,
    /// Problem setup and schedule construction, excluded from the run times.
    pub setup_seconds: f64,
    pub wall_seconds: f64,
    /// Virtual mode: the latest rank clock. Zero in wall mode.
    pub modeled_seconds: f64,
    pub modeled_compute_seconds: f64,
    pub modeled_comm_seconds: f64,
    pub message_count: u64,
    pub messages_per_rank: Vec<u64>,
    pub bytes_sent: u64,
    pub max_message_bytes: u64,
    pub communication_events: usize,
    pub snapshot_frames: usize,
    /// Wall seconds spent per phase, summed over ranks.
    pub phase_seconds: BTreeMap<String, f64>,
}

impl RunRecord {
    /// Run time in the record's own mode: modeled in virtual, measured in wall.
    pub fn run_seconds(&self) -> f64 {
        match self.mode {
            Mode::Virtual => self.modeled_seconds,
            Mode::Wall => self.wall_seconds,
        }
    }

    /// Mean bytes per non-local message.
    pub fn bytes_per_message(&self) -> f64 {
        if self.message_count == 0 {
            0.0
        } else {
            self.bytes_sent as f64 / self.message_count as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Final field at the last completed timestep, in true coordinates.
    pub field: FieldState,
    pub record: RunRecord,
}

pub(crate) type SharedSink = Arc<Mutex<SnapshotSink>>;

pub(crate) fn submit(sink: &Option<SharedSink>, piece: FramePiece) -> Result<(), EngineError> {
    if let Some(s) = sink {
        s.lock().expect("snapshot sink poisoned").submit(piece)?;
    }
    Ok(())
}

/// Rank program plus what the engine needs after it finishes.
pub(crate) trait EngineRank: RankProgram<Error = EngineError> {
    fn final_piece(&self) -> Result<FramePiece, EngineError>;
    fn phase_seconds(&self) -> &BTreeMap<String, f64>;
    /// Drops the rank's handle on the snapshot sink so it can be closed.
    fn release_sink(&mut self);
}

struct Driven {
    ledger: CostLedger,
    wall_seconds: f64,
    modeled_seconds: f64,
    events: usize,
}

fn drive<P: EngineRank>(config: &SolverConfig, programs: &mut [P]) -> Result<Driven, EngineError> {
    let link = config.transport.link();
    let start = Instant::now();
    match config.transport.mode {
        Mode::Virtual => {
            let out = run_virtual(programs, &link)?;
            Ok(Driven {
                wall_seconds: start.elapsed().as_secs_f64(),
                modeled_seconds: out.makespan(),
                events: out.rounds,
                ledger: out.ledger,
            })
        }
        Mode::Wall => {
            let options = WallOptions {
                inject: config.transport.inject,
                timeout: Duration::from_secs_f64(config.transport.timeout_seconds),
            };
            let out = run_wall(programs, &link, options)?;
            Ok(Driven {
                wall_seconds: out.wall_seconds,
                modeled_seconds: 0.0,
                events: 0,
                ledger: out.ledger,
            })
        }
    }
}

fn gather<P: EngineRank>(programs: &[P], nvars: usize, n: usize) -> Result<FieldState, EngineError> {
    let mut field = FieldState::zeros(nvars, n, n);
    for p in programs {
        let piece = p.final_piece()?;
        piece.place_into(&mut field);
        field.level = piece.level as usize;
    }
    Ok(field)
}

fn open_sink(
    config: &SolverConfig,
    problem: &Problem,
) -> Result<Option<SharedSink>, EngineError> {
    match &config.snapshot {
        Some(path) => Ok(Some(Arc::new(Mutex::new(SnapshotSink::create(
            path,
            problem.header.clone(),
            config.ranks,
        )?)))),
        None => Ok(None),
    }
}

fn close_sink(sink: Option<SharedSink>) -> Result<usize, EngineError> {
    match sink {
        Some(s) => {
            let sink = Arc::try_unwrap(s)
                .map_err(|_| EngineError::Schedule("snapshot sink still shared".into()))?
                .into_inner()
                .expect("snapshot sink poisoned");
            Ok(sink.finish()?)
        }
        None => Ok(0),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish_record<P: EngineRank>(
    config: &SolverConfig,
    programs: &[P],
    driven: Driven,
    setup_seconds: f64,
    actual_steps: usize,
    flat_level: usize,
    dt: f64,
    snapshot_frames: usize,
) -> RunRecord {
    let mut phase_seconds = BTreeMap::new();
    for p in programs {
        for (k, v) in p.phase_seconds() {
            *phase_seconds.entry(k.clone()).or_insert(0.0) += v;
        }
    }
    let l = &driven.ledger;
    let events = match config.transport.mode {
        Mode::Virtual => driven.events,
        Mode::Wall => match config.engine {
            EngineKind::Standard => actual_steps * config.problem.substeps(),
            EngineKind::Swept => config.plan().map(|p| p.communications()).unwrap_or(0),
        },
    };
    RunRecord {
        engine: config.engine,
        problem: config.problem,
        mode: config.transport.mode,
        nx: config.nx,
        b: config.block,
        share: config.share,
        ranks: config.ranks,
        requested_steps: config.steps,
        actual_steps,
        flat_level,
        dt,
        setup_seconds,
        wall_seconds: driven.wall_seconds,
        modeled_seconds: driven.modeled_seconds,
        modeled_compute_seconds: l.compute_seconds(),
        modeled_comm_seconds: l.comm_seconds(),
        message_count: l.messages(),
        messages_per_rank: l.ranks.iter().map(|r| r.message_count).collect(),
        bytes_sent: l.bytes(),
        max_message_bytes: l.ranks.iter().map(|r| r.max_message_bytes).max().unwrap_or(0),
        communication_events: events,
        snapshot_frames,
        phase_seconds,
    }
}

/// Block-column pools seen from one rank: pool of each local column.
fn local_pools(config: &SolverConfig, layout: &RankLayout, rank: usize) -> Vec<Pool> {
    let bx = config.nx / config.block;
    let alloc = allocate_blocks(bx, bx, config.share);
    let (c0, n) = layout.columns[rank];
    (c0..c0 + n).map(|c| alloc.pool_of_column(c)).collect()
}

/// Advances the configuration with per-sub-step halo exchanges.
pub fn run_standard(config: &SolverConfig) -> Result<RunOutput, EngineError> {
    run_standard_steps(config, config.steps)
}

/// Standard engine for an explicit number of timesteps.
pub fn run_standard_steps(config: &SolverConfig, steps: usize) -> Result<RunOutput, EngineError> {
    let mut config = config.clone();
    config.engine = EngineKind::Standard;
    config.steps = steps;
    config.validate()?;
    let setup = Instant::now();
    let problem = build_problem(&config)?;
    let layout = RankLayout::new(config.nx, config.block, config.ranks)?;
    let sink = open_sink(&config, &problem)?;
    let mut programs = (0..config.ranks)
        .map(|r| {
            standard::StandardRank::new(
                &config,
                &problem,
                &layout,
                r,
                local_pools(&config, &layout, r),
                Compute::new(&config, problem.scheme.clone())?,
                sink.clone(),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let setup_seconds = setup.elapsed().as_secs_f64();
    let driven = drive(&config, &mut programs)?;
    let field = gather(&programs, problem.initial.nvars, config.nx)?;
    let s = config.problem.substeps();
    release_sinks(&mut programs);
    let frames = close_sink(sink)?;
    let record = finish_record(
        &config,
        &programs,
        driven,
        setup_seconds,
        steps,
        steps * s,
        problem.header.dt,
        frames,
    );
    Ok(RunOutput { field, record })
}

fn release_sinks<P: EngineRank>(programs: &mut [P]) {
    for p in programs {
        p.release_sink();
    }
}

/// Advances the configuration with the swept schedule.
pub fn run_swept(config: &SolverConfig) -> Result<RunOutput, EngineError> {
    let mut config = config.clone();
    config.engine = EngineKind::Swept;
    config.validate()?;
    let setup = Instant::now();
    let problem = build_problem(&config)?;
    let stencil = problem.scheme.stencil();
    let plan = Arc::new(build_schedule(config.steps, config.geometry()?, &stencil)?);
    let min_reads = Arc::new(plan.min_future_reads(&stencil));
    let layout = RankLayout::new(config.nx, config.block, config.ranks)?;
    let sink = open_sink(&config, &problem)?;
    let mut programs = (0..config.ranks)
        .map(|r| {
            swept::SweptRank::new(
                &problem,
                plan.clone(),
                min_reads.clone(),
                &layout,
                r,
                local_pools(&config, &layout, r),
                Compute::new(&config, problem.scheme.clone())?,
                sink.clone(),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let setup_seconds = setup.elapsed().as_secs_f64();
    let driven = drive(&config, &mut programs)?;
    let field = gather(&programs, problem.initial.nvars, config.nx)?;
    release_sinks(&mut programs);
    let frames = close_sink(sink)?;
    let record = finish_record(
        &config,
        &programs,
        driven,
        setup_seconds,
        plan.actual_steps(),
        plan.flat_level,
        problem.header.dt,
        frames,
    );
    Ok(RunOutput { field, record })
}

/// Runs whichever engine the configuration names.
pub fn run(config: &SolverConfig) -> Result<RunOutput, EngineError> {
    match config.engine {
        EngineKind::Standard => run_standard(config),
        EngineKind::Swept => run_swept(config),
    }
}

/// Modeled compute seconds of one full level on the slowest rank.
pub fn per_level_compute(config: &SolverConfig) -> Result<f64, EngineError> {
    config.validate()?;
    let layout = RankLayout::new(config.nx, config.block, config.ranks)?;
    let area = config.block * config.nx;
    let mut worst = 0.0f64;
    for r in 0..config.ranks {
        let mut cells = [0usize; 2];
        for p in local_pools(config, &layout, r) {
            cells[pool_index(p)] += area;
        }
        for (spec, c) in [config.pool_a, config.pool_b].iter().zip(cells) {
            worst = worst.max(c as f64 * config.cell_seconds() * spec.cost / spec.workers as f64);
        }
    }
    Ok(worst)
}

/// Message sizes and counts of the standard and swept runs that the
/// configuration compares (standard at the swept run's completed steps).
pub fn comm_profile(config: &SolverConfig) -> Result<CommProfile, EngineError> {
    let plan = config.plan()?;
    let p = config.problem;
    let n = config.nx;
    let values = |cols: usize| (cols * n * p.nvars() * 8) as u64;
    Ok(CommProfile {
        ranks: config.ranks,
        standard_levels: plan.actual_steps() * p.substeps(),
        swept_levels: plan.flat_level,
        shifts: plan.communications(),
        halo_bytes: values(p.halo()),
        shift_bytes: values(config.block / 2) * plan.slab_capacity() as u64,
    })
}
