use std::collections::BTreeMap;

use crate::field::FieldState;
use crate::geometry::{Pool, Region, StencilShape};
use crate::snapshot::FramePiece;
use crate::transport::{Envelope, Post, RankProgram};

use super::{submit, Compute, EngineError, EngineRank, Problem, RankLayout, SharedSink, SolverConfig};

/// One rank of the halo-exchange solver. Local planes carry `n` ghost
/// columns on each side; the ring holds the levels of one timestep.
pub(crate) struct StandardRank {
    rank: usize,
    left: usize,
    right: usize,
    x0: usize,
    width: usize,
    halo: usize,
    ring: Vec<FieldState>,
    level: usize,
    target: usize,
    halo_ready: bool,
    stencil: StencilShape,
    regions: Vec<(Region, Pool)>,
    compute: Compute,
    sink: Option<SharedSink>,
}

fn columns(plane: &FieldState, x0: usize, width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(plane.nvars * plane.ny * width);
    for v in 0..plane.nvars {
        for y in 0..plane.ny {
            let s = plane.index(v, x0, y);
            out.extend_from_slice(&plane.data[s..s + width]);
        }
    }
    out
}

fn put_columns(plane: &mut FieldState, x0: usize, width: usize, values: &[f64]) -> Result<(), EngineError> {
    let want = plane.nvars * plane.ny * width;
    if values.len() != want {
        return Err(EngineError::StripSize {
            got: values.len(),
            want,
        });
    }
    let mut i = 0;
    for v in 0..plane.nvars {
        for y in 0..plane.ny {
            let s = plane.index(v, x0, y);
            plane.data[s..s + width].copy_from_slice(&values[i..i + width]);
            i += width;
        }
    }
    Ok(())
}

impl StandardRank {
    pub(crate) fn new(
        config: &SolverConfig,
        problem: &Problem,
        layout: &RankLayout,
        rank: usize,
        pools: Vec<Pool>,
        compute: Compute,
        sink: Option<SharedSink>,
    ) -> Result<Self, EngineError> {
        let stencil = problem.scheme.stencil();
        let n = stencil.halo();
        let (x0, width) = layout.extent(rank);
        let init = &problem.initial;
        let (nvars, ny) = (init.nvars, init.ny);
        let s = stencil.substeps();
        let mut ring: Vec<FieldState> =
            (0..=s).map(|_| FieldState::zeros(nvars, width + 2 * n, ny)).collect();
        for v in 0..nvars {
            for y in 0..ny {
                for x in 0..width {
                    ring[0].set(v, x + n, y, init.get(v, x0 + x, y));
                }
            }
        }
        let b = layout.block;
        let regions = pools
            .iter()
            .enumerate()
            .map(|(c, p)| (Region::new(n + c * b, n + (c + 1) * b, 0, ny, 0), *p))
            .collect();
        let me = StandardRank {
            rank,
            left: layout.left(rank),
            right: layout.right(rank),
            x0,
            width,
            halo: n,
            ring,
            level: 0,
            target: config.steps * s,
            halo_ready: false,
            stencil,
            regions,
            compute,
            sink,
        };
        me.snapshot()?;
        Ok(me)
    }

    fn slot(&self, level: usize) -> usize {
        level % self.ring.len()
    }

    fn interior(&self, level: usize) -> FieldState {
        let p = &self.ring[self.slot(level)];
        FieldState {
            nvars: p.nvars,
            nx: self.width,
            ny: p.ny,
            level,
            data: columns(p, self.halo, self.width),
        }
    }

    fn snapshot(&self) -> Result<(), EngineError> {
        if self.sink.is_some() && self.level % self.stencil.substeps() == 0 {
            submit(
                &self.sink,
                FramePiece {
                    level: self.level as u64,
                    x0: self.x0,
                    offset: (0, 0),
                    plane: self.interior(self.level),
                },
            )?;
        }
        Ok(())
    }

    fn step(&mut self) -> Result<(), EngineError> {
        let next = self.level + 1;
        let stage = self.stencil.stage_of(next);
        let prev = &self.ring[self.slot(self.level)];
        let base = &self.ring[self.slot(next - 1 - stage)];
        let values = self.compute.level("standard", stage, prev, base, &self.regions)?;
        let s = self.slot(next);
        let out = &mut self.ring[s];
        out.level = next;
        for ((r, _), v) in self.regions.iter().zip(&values) {
            out.scatter(r, v);
        }
        self.level = next;
        self.snapshot()
    }

    fn tag(&self, dir: u64) -> u64 {
        self.level as u64 * 2 + dir
    }
}

impl RankProgram for StandardRank {
    type Error = EngineError;

    fn advance(&mut self) -> Result<Option<Post>, EngineError> {
        if self.halo_ready {
            self.halo_ready = false;
            self.step()?;
        }
        if self.level == self.target {
            return Ok(None);
        }
        let (n, w) = (self.halo, self.width);
        let plane = &self.ring[self.slot(self.level)];
        Ok(Some(Post {
            sends: vec![
                Envelope::new(self.rank, self.left, self.tag(0), columns(plane, n, n)),
                Envelope::new(self.rank, self.right, self.tag(1), columns(plane, w, n)),
            ],
            expected: vec![(self.right, self.tag(0)), (self.left, self.tag(1))],
        }))
    }

    fn deliver(&mut self, recvs: Vec<Envelope>) -> Result<(), EngineError> {
        let [from_right, from_left]: [Envelope; 2] = recvs
            .try_into()
            .map_err(|_| EngineError::Schedule("expected two halo messages".into()))?;
        let (n, w) = (self.halo, self.width);
        let s = self.slot(self.level);
        let plane = &mut self.ring[s];
        put_columns(plane, w + n, n, &from_right.payload)?;
        put_columns(plane, 0, n, &from_left.payload)?;
        self.halo_ready = true;
        Ok(())
    }

    fn take_compute_seconds(&mut self) -> f64 {
        self.compute.take_seconds()
    }
}

impl EngineRank for StandardRank {
    fn final_piece(&self) -> Result<FramePiece, EngineError> {
        if self.level != self.target {
            return Err(EngineError::Schedule(format!(
                "rank {} stopped at level {} of {}",
                self.rank, self.level, self.target
            )));
        }
        Ok(FramePiece {
            level: self.level as u64,
            x0: self.x0,
            offset: (0, 0),
            plane: self.interior(self.level),
        })
    }

    fn phase_seconds(&self) -> &BTreeMap<String, f64> {
        &self.compute.phase_seconds
    }

    fn release_sink(&mut self) {
        self.sink = None;
    }
}
