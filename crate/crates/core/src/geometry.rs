//! Space-time geometry of the swept decomposition.
//!
//! A square block of edge `b` advanced by a stencil of halo `n` can be pushed
//! `k = b/(2n) - 1` sub-step levels before it needs data from a neighbour.
//! Every phase of the decomposition is described here as a per-block region
//! template (block origin at `(0, 0)`); the engine translates the template to
//! every block it owns. Templates for the bridges and the octahedron are
//! expressed in whatever frame is current after the last shift, which is what
//! makes one set of templates valid for every cycle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on block edge length.
pub const DEFAULT_BLOCK_MAX: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("stencil halo must be at least 1")]
    ZeroHalo,
    #[error("block size {b} is not divisible by 2n = {}", 2 * .n)]
    NotDivisible { b: usize, n: usize },
    #[error("block size {b} must exceed 2n = {} (the first phase would be empty)", 2 * .n)]
    BlockTooSmall { b: usize, n: usize },
    #[error("block size {b} exceeds the configured maximum {max}")]
    BlockTooLarge { b: usize, max: usize },
    #[error("level {level} is out of range {lo}..={hi} for {phase:?}")]
    LevelOutOfRange {
        phase: Phase,
        level: usize,
        lo: usize,
        hi: usize,
    },
    #[error("{0:?} has no region template")]
    NotACompute(Phase),
    #[error("requested step count must be at least 1")]
    NoSteps,
    #[error("invalid stencil: {0}")]
    InvalidStencil(String),
}

/// One dependency of a sub-step: the level `level_offset` below the level being
/// produced, read within Chebyshev `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StencilRead {
    pub level_offset: i32,
    pub radius: usize,
}

/// Read pattern of a time scheme, per intermediate step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StencilShape {
    halo: usize,
    substeps: usize,
    reads: Vec<Vec<StencilRead>>,
}

impl StencilShape {
    pub fn new(
        halo: usize,
        substeps: usize,
        reads: Vec<Vec<StencilRead>>,
    ) -> Result<Self, GeometryError> {
        if halo == 0 {
            return Err(GeometryError::ZeroHalo);
        }
        if substeps == 0 {
            return Err(GeometryError::InvalidStencil("substeps must be at least 1".into()));
        }
        if reads.len() != substeps {
            return Err(GeometryError::InvalidStencil(format!(
                "{} read lists for {} substeps",
                reads.len(),
                substeps
            )));
        }
        for (stage, list) in reads.iter().enumerate() {
            if !list.contains(&StencilRead {
                level_offset: -1,
                radius: halo,
            }) {
                return Err(GeometryError::InvalidStencil(format!(
                    "stage {stage} does not read level -1 at radius {halo}"
                )));
            }
            for r in list {
                if r.radius > halo || r.level_offset >= 0 || r.level_offset < -(substeps as i32) {
                    return Err(GeometryError::InvalidStencil(format!(
                        "stage {stage} has out-of-range read {r:?}"
                    )));
                }
            }
        }
        Ok(StencilShape {
            halo,
            substeps,
            reads,
        })
    }

    /// Single-stage scheme (forward Euler) reading the previous level.
    pub fn single_stage(halo: usize) -> Result<Self, GeometryError> {
        Self::new(
            halo,
            1,
            vec![vec![StencilRead {
                level_offset: -1,
                radius: halo,
            }]],
        )
    }

    /// Two-stage midpoint Runge-Kutta: the corrector also reads the base level
    /// pointwise.
    pub fn rk2(halo: usize) -> Result<Self, GeometryError> {
        let prev = StencilRead {
            level_offset: -1,
            radius: halo,
        };
        Self::new(
            halo,
            2,
            vec![
                vec![prev],
                vec![
                    prev,
                    StencilRead {
                        level_offset: -2,
                        radius: 0,
                    },
                ],
            ],
        )
    }

    pub fn halo(&self) -> usize {
        self.halo
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Stage index of the sub-step that produces absolute `level` (>= 1).
    pub fn stage_of(&self, level: usize) -> usize {
        (level - 1) % self.substeps
    }

    pub fn reads_for_level(&self, level: usize) -> &[StencilRead] {
        &self.reads[self.stage_of(level)]
    }

    pub fn reads(&self) -> &[Vec<StencilRead>] {
        &self.reads
    }
}

/// Levels a square block of edge `b` can advance before communicating.
pub fn max_levels(b: usize, n: usize) -> Result<usize, GeometryError> {
    if n == 0 {
        return Err(GeometryError::ZeroHalo);
    }
    if b % (2 * n) != 0 {
        return Err(GeometryError::NotDivisible { b, n });
    }
    if b <= 2 * n {
        return Err(GeometryError::BlockTooSmall { b, n });
    }
    Ok(b / (2 * n) - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGeometry {
    b: usize,
    n: usize,
    k: usize,
}

impl BlockGeometry {
    pub fn new(b: usize, n: usize) -> Result<Self, GeometryError> {
        let k = max_levels(b, n)?;
        Ok(BlockGeometry { b, n, k })
    }

    pub fn with_cap(b: usize, n: usize, block_max: usize) -> Result<Self, GeometryError> {
        if b > block_max {
            return Err(GeometryError::BlockTooLarge { b, max: block_max });
        }
        Self::new(b, n)
    }

    pub fn block(&self) -> usize {
        self.b
    }

    pub fn halo(&self) -> usize {
        self.n
    }

    pub fn levels(&self) -> usize {
        self.k
    }

    /// Displacement applied at every communication.
    pub fn shift(&self) -> usize {
        self.b / 2
    }
}

/// Half-open rectangle of grid points at one level. Coordinates may exceed the
/// domain extents and are reduced modulo the periodic extents by users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
    pub level: usize,
}

impl Region {
    pub fn new(x0: usize, x1: usize, y0: usize, y1: usize, level: usize) -> Self {
        debug_assert!(x1 > x0 && y1 > y0, "empty region");
        Region {
            x0,
            x1,
            y0,
            y1,
            level,
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn translate(&self, dx: usize, dy: usize) -> Region {
        Region {
            x0: self.x0 + dx,
            x1: self.x1 + dx,
            y0: self.y0 + dy,
            y1: self.y1 + dy,
            level: self.level,
        }
    }

    pub fn at_level(mut self, level: usize) -> Region {
        self.level = level;
        self
    }

    /// Iterates `(x, y)` reduced modulo `(nx, ny)`.
    pub fn points_mod(&self, nx: usize, ny: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y1).flat_map(move |y| (self.x0..self.x1).map(move |x| (x % nx, y % ny)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    UpPyramid,
    YBridge,
    Communicate,
    XBridge,
    OctahedronDown,
    OctahedronUp,
    DownPyramid,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::UpPyramid => "up_pyramid",
            Phase::YBridge => "y_bridge",
            Phase::Communicate => "communicate",
            Phase::XBridge => "x_bridge",
            Phase::OctahedronDown => "octahedron_down",
            Phase::OctahedronUp => "octahedron_up",
            Phase::DownPyramid => "down_pyramid",
        }
    }
}

/// Per-block region template of `phase` at template level `l`.
pub fn phase_region(phase: Phase, b: usize, n: usize, l: usize) -> Result<Region, GeometryError> {
    let k = max_levels(b, n)?;
    let (lo, hi) = match phase {
        Phase::OctahedronUp => (k + 1, 2 * k),
        Phase::Communicate => return Err(GeometryError::NotACompute(phase)),
        _ => (1, k),
    };
    if l < lo || l > hi {
        return Err(GeometryError::LevelOutOfRange {
            phase,
            level: l,
            lo,
            hi,
        });
    }
    let h = b / 2;
    let r = n * l;
    let region = match phase {
        Phase::UpPyramid => Region::new(r, b - r, r, b - r, l),
        Phase::YBridge => Region::new(r, b - r, b - r, b + r, l),
        Phase::XBridge => Region::new(h - r, h + r, h + r, 3 * h - r, l),
        Phase::OctahedronDown | Phase::DownPyramid => Region::new(h - r, h + r, h - r, h + r, l),
        Phase::OctahedronUp => {
            let half = h - n * (l - k);
            Region::new(h - half, h + half, h - half, h + half, l)
        }
        Phase::Communicate => unreachable!(),
    };
    Ok(region)
}

/// Direction of a communication shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftSign {
    Positive,
    Negative,
}

impl ShiftSign {
    pub fn flipped(self) -> Self {
        match self {
            ShiftSign::Positive => ShiftSign::Negative,
            ShiftSign::Negative => ShiftSign::Positive,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            ShiftSign::Positive => 1,
            ShiftSign::Negative => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeEntry {
    pub phase: Phase,
    /// Template level, relative to the phase.
    pub level: usize,
    /// Absolute sub-step level written by this entry.
    pub abs_level: usize,
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanEntry {
    Compute(ComputeEntry),
    Communicate(ShiftSign),
}

impl PlanEntry {
    pub fn phase(&self) -> Phase {
        match self {
            PlanEntry::Compute(c) => c.phase,
            PlanEntry::Communicate(_) => Phase::Communicate,
        }
    }
}

/// Ordered swept schedule for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub geometry: BlockGeometry,
    pub substeps: usize,
    pub requested_steps: usize,
    pub entries: Vec<PlanEntry>,
    pub octahedra: usize,
    pub flat_level: usize,
}

impl PhasePlan {
    pub fn actual_steps(&self) -> usize {
        self.flat_level / self.substeps
    }

    /// Level of the last completed full timestep.
    pub fn final_step_level(&self) -> usize {
        self.actual_steps() * self.substeps
    }

    pub fn communications(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e, PlanEntry::Communicate(_)))
            .count()
    }

    pub fn shifts(&self) -> impl Iterator<Item = ShiftSign> + '_ {
        self.entries.iter().filter_map(|e| match e {
            PlanEntry::Communicate(s) => Some(*s),
            _ => None,
        })
    }

    /// Ring capacity needed to hold every live level.
    pub fn slab_capacity(&self) -> usize {
        2 * self.geometry.levels() + self.substeps
    }

    /// For each entry index, the lowest level any entry at or after it reads.
    pub fn min_future_reads(&self, stencil: &StencilShape) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.entries.len() + 1];
        for (i, e) in self.entries.iter().enumerate().rev() {
            let here = match e {
                PlanEntry::Compute(c) => stencil
                    .reads_for_level(c.abs_level)
                    .iter()
                    .map(|r| (c.abs_level as i64 + r.level_offset as i64) as usize)
                    .min()
                    .unwrap_or(usize::MAX),
                PlanEntry::Communicate(_) => usize::MAX,
            };
            out[i] = out[i + 1].min(here);
        }
        out
    }
}

fn round_half_up_div(num: usize, den: usize) -> usize {
    (2 * num + den) / (2 * den)
}

/// Builds the phase sequence that most closely reaches `requested_steps`.
pub fn build_schedule(
    requested_steps: usize,
    geom: BlockGeometry,
    stencil: &StencilShape,
) -> Result<PhasePlan, GeometryError> {
    if requested_steps == 0 {
        return Err(GeometryError::NoSteps);
    }
    if stencil.halo() != geom.halo() {
        return Err(GeometryError::InvalidStencil(format!(
            "stencil halo {} does not match block geometry halo {}",
            stencil.halo(),
            geom.halo()
        )));
    }
    let (b, n, k) = (geom.block(), geom.halo(), geom.levels());
    let substeps = stencil.substeps();
    let wanted = requested_steps * substeps;
    // Each octahedron spans 2k levels but starts k levels above the previous
    // one, so every cycle moves the completed frontier by k.
    let octahedra = round_half_up_div(wanted.saturating_sub(k), k);
    let flat_level = k + k * octahedra;
    if flat_level / substeps == 0 {
        return Err(GeometryError::NoSteps);
    }

    let mut entries = Vec::new();
    let push = |phase: Phase, l: usize, base: usize, entries: &mut Vec<PlanEntry>| {
        let region = phase_region(phase, b, n, l).expect("template level in range");
        let abs_level = base + l;
        entries.push(PlanEntry::Compute(ComputeEntry {
            phase,
            level: l,
            abs_level,
            region: region.at_level(abs_level),
        }));
    };

    let mut sign = ShiftSign::Positive;
    for l in 1..=k {
        push(Phase::UpPyramid, l, 0, &mut entries);
    }
    for l in 1..=k {
        push(Phase::YBridge, l, 0, &mut entries);
    }
    entries.push(PlanEntry::Communicate(sign));
    for l in 1..=k {
        push(Phase::XBridge, l, 0, &mut entries);
    }
    for cycle in 0..octahedra {
        let base = k * cycle;
        for l in 1..=k {
            push(Phase::OctahedronDown, l, base, &mut entries);
        }
        for l in k + 1..=2 * k {
            push(Phase::OctahedronUp, l, base, &mut entries);
        }
        let bridge_base = base + k;
        for l in 1..=k {
            push(Phase::YBridge, l, bridge_base, &mut entries);
        }
        sign = sign.flipped();
        entries.push(PlanEntry::Communicate(sign));
        for l in 1..=k {
            push(Phase::XBridge, l, bridge_base, &mut entries);
        }
    }
    for l in 1..=k {
        push(Phase::DownPyramid, l, k * octahedra, &mut entries);
    }

    Ok(PhasePlan {
        geometry: geom,
        substeps,
        requested_steps,
        entries,
        octahedra,
        flat_level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pool {
    A,
    B,
}

/// Block-column split between the two worker pools.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkAllocation {
    pub total_blocks: usize,
    pub pool_a_blocks: usize,
    pub pool_b_blocks: usize,
    /// Pool of each block column, indexed by column.
    pub columns: Vec<Pool>,
}

impl WorkAllocation {
    pub fn pool_of_column(&self, col: usize) -> Pool {
        self.columns[col]
    }

    pub fn columns_of(&self, pool: Pool) -> impl Iterator<Item = usize> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter(move |(_, p)| **p == pool)
            .map(|(c, _)| c)
    }

    pub fn achieved_share(&self) -> f64 {
        self.pool_a_blocks as f64 / self.total_blocks as f64
    }
}

/// Splits whole block columns by `share`, rounding to the nearest column with
/// ties going to pool B.
pub fn allocate_blocks(blocks_x: usize, blocks_y: usize, share: f64) -> WorkAllocation {
    let share = share.clamp(0.0, 1.0);
    let exact = share * blocks_x as f64;
    let cols_a = ((exact - 0.5 - 1e-9).ceil().max(0.0) as usize).min(blocks_x);
    let columns = (0..blocks_x)
        .map(|c| if c < cols_a { Pool::A } else { Pool::B })
        .collect();
    WorkAllocation {
        total_blocks: blocks_x * blocks_y,
        pool_a_blocks: cols_a * blocks_y,
        pool_b_blocks: (blocks_x - cols_a) * blocks_y,
        columns,
    }
}
