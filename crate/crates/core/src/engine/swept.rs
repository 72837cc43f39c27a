use std::collections::BTreeMap;
use std::sync::Arc;

use crate::field::FieldState;
use crate::geometry::{ComputeEntry, PhasePlan, PlanEntry, Pool, ShiftSign, StencilShape};
use crate::snapshot::FramePiece;
use crate::transport::{Envelope, Post, RankProgram};

use super::slab::{apply_shift, outgoing_strip, TimeSlab};
use super::{submit, Compute, EngineError, EngineRank, Problem, RankLayout, SharedSink};

/// One rank of the swept solver. The rank owns whole block-columns over the
/// full y extent; its slab is stored in a frame displaced from true
/// coordinates by `offset`, which moves by half a block at every shift.
pub(crate) struct SweptRank {
    rank: usize,
    left: usize,
    right: usize,
    x0: usize,
    block: usize,
    area: usize,
    plan: Arc<PhasePlan>,
    min_reads: Arc<Vec<usize>>,
    next: usize,
    slab: TimeSlab,
    offset: (i64, i64),
    written: Vec<usize>,
    stencil: StencilShape,
    pools: Vec<Pool>,
    staged: Vec<FramePiece>,
    pending: Option<ShiftSign>,
    events: u64,
    compute: Compute,
    sink: Option<SharedSink>,
}

impl SweptRank {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        problem: &Problem,
        plan: Arc<PhasePlan>,
        min_reads: Arc<Vec<usize>>,
        layout: &RankLayout,
        rank: usize,
        pools: Vec<Pool>,
        compute: Compute,
        sink: Option<SharedSink>,
    ) -> Result<Self, EngineError> {
        let (x0, width) = layout.extent(rank);
        let init = &problem.initial;
        let (nvars, ny) = (init.nvars, init.ny);
        let mut slab = TimeSlab::new(plan.slab_capacity(), nvars, width, ny);
        slab.install(
            0,
            FieldState::from_fn(nvars, width, ny, |v, x, y| init.get(v, x0 + x, y)),
        );
        let mut written = vec![0; plan.flat_level + 1];
        written[0] = width * ny;
        let mut me = SweptRank {
            rank,
            left: layout.left(rank),
            right: layout.right(rank),
            x0,
            block: layout.block,
            area: width * ny,
            stencil: problem.scheme.stencil(),
            plan,
            min_reads,
            next: 0,
            slab,
            offset: (0, 0),
            written,
            pools,
            staged: Vec::new(),
            pending: None,
            events: 0,
            compute,
            sink,
        };
        me.stage(0)?;
        Ok(me)
    }

    fn stage(&mut self, level: usize) -> Result<(), EngineError> {
        if self.sink.is_some() && level % self.stencil.substeps() == 0 {
            self.staged.push(FramePiece {
                level: level as u64,
                x0: self.x0,
                offset: self.offset,
                plane: self.slab.plane(level)?.clone(),
            });
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<(), EngineError> {
        for piece in std::mem::take(&mut self.staged) {
            submit(&self.sink, piece)?;
        }
        Ok(())
    }

    fn execute(&mut self, entry: &ComputeEntry) -> Result<(), EngineError> {
        let level = entry.abs_level;
        let stage = self.stencil.stage_of(level);
        if let Some(old) = self.slab.claim(level) {
            if old >= self.min_reads[self.next] || self.written[old] != self.area {
                return Err(EngineError::Schedule(format!(
                    "writing level {level} evicts level {old} (complete: {}, lowest future read {})",
                    self.written[old] == self.area,
                    self.min_reads[self.next]
                )));
            }
        }
        let b = self.block;
        let rows = self.slab.ny() / b;
        let mut regions = Vec::with_capacity(self.pools.len() * rows);
        for (c, pool) in self.pools.iter().enumerate() {
            for r in 0..rows {
                regions.push((entry.region.translate(c * b, r * b), *pool));
            }
        }
        let prev = self.slab.plane(level - 1)?;
        let base = self.slab.plane(level - 1 - stage)?;
        let values = self
            .compute
            .level(entry.phase.name(), stage, prev, base, &regions)?;
        let out = self.slab.plane_mut(level)?;
        let mut cells = 0;
        for ((region, _), v) in regions.iter().zip(&values) {
            out.scatter(region, v);
            cells += region.area();
        }
        self.written[level] += cells;
        if self.written[level] > self.area {
            return Err(EngineError::Schedule(format!(
                "level {level} written {} times its area",
                self.written[level] as f64 / self.area as f64
            )));
        }
        if self.written[level] == self.area {
            self.stage(level)?;
        }
        Ok(())
    }
}

impl RankProgram for SweptRank {
    type Error = EngineError;

    fn advance(&mut self) -> Result<Option<Post>, EngineError> {
        let plan = self.plan.clone();
        while self.next < plan.entries.len() {
            let entry = plan.entries[self.next];
            match entry {
                PlanEntry::Compute(c) => {
                    self.execute(&c)?;
                    self.next += 1;
                }
                PlanEntry::Communicate(sign) => {
                    self.flush()?;
                    self.next += 1;
                    self.pending = Some(sign);
                    self.events += 1;
                    let half = self.block / 2;
                    let strip = outgoing_strip(&self.slab, sign, half);
                    let (to, from) = match sign {
                        ShiftSign::Positive => (self.right, self.left),
                        ShiftSign::Negative => (self.left, self.right),
                    };
                    return Ok(Some(Post {
                        sends: vec![Envelope::new(self.rank, to, self.events, strip)],
                        expected: vec![(from, self.events)],
                    }));
                }
            }
        }
        self.flush()?;
        Ok(None)
    }

    fn deliver(&mut self, recvs: Vec<Envelope>) -> Result<(), EngineError> {
        let sign = self
            .pending
            .take()
            .ok_or_else(|| EngineError::Schedule("strip delivered without a shift".into()))?;
        let [strip]: [Envelope; 1] = recvs
            .try_into()
            .map_err(|_| EngineError::Schedule("expected one shift message".into()))?;
        let half = self.block / 2;
        apply_shift(&mut self.slab, sign, half, &strip.payload)?;
        let d = sign.as_i64() * half as i64;
        self.offset = (self.offset.0 - d, self.offset.1 - d);
        Ok(())
    }

    fn take_compute_seconds(&mut self) -> f64 {
        self.compute.take_seconds()
    }
}

impl EngineRank for SweptRank {
    fn final_piece(&self) -> Result<FramePiece, EngineError> {
        let flat = self.plan.flat_level;
        if let Some(l) = (1..=flat).find(|&l| self.written[l] != self.area) {
            return Err(EngineError::Schedule(format!(
                "rank {} finished with level {l} incomplete",
                self.rank
            )));
        }
        let level = self.plan.final_step_level();
        Ok(FramePiece {
            level: level as u64,
            x0: self.x0,
            offset: self.offset,
            plane: self.slab.plane(level)?.clone(),
        })
    }

    fn phase_seconds(&self) -> &BTreeMap<String, f64> {
        &self.compute.phase_seconds
    }

    fn release_sink(&mut self) {
        self.sink = None;
    }
}
