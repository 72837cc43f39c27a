//! Brute-force point-set model of swept execution.
//!
//! Used to check the phase templates and schedules independently of the
//! rectangle arithmetic in [`crate::geometry`]: admission is decided point by
//! point from the declared stencil reads, on a small periodic tile.

use std::fmt;

use crate::geometry::{
    max_levels, phase_region, GeometryError, Phase, PhasePlan, PlanEntry, Region, ShiftSign,
    StencilShape,
};

/// Set of points on a periodic `width x height` tile.
#[derive(Clone, PartialEq, Eq)]
pub struct PointSet {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl fmt::Debug for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PointSet {}x{} ({} points)", self.width, self.height, self.len())?;
        for y in (0..self.height).rev() {
            let row: String = (0..self.width)
                .map(|x| if self.contains(x, y) { '#' } else { '.' })
                .collect();
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

impl PointSet {
    pub fn empty(width: usize, height: usize) -> Self {
        PointSet {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        PointSet {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    /// Points of the half-open rectangle, wrapped onto the tile.
    pub fn rect(width: usize, height: usize, x: (usize, usize), y: (usize, usize)) -> Self {
        let mut s = Self::empty(width, height);
        for yy in y.0..y.1 {
            for xx in x.0..x.1 {
                s.insert(xx, yy);
            }
        }
        s
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn idx(&self, x: usize, y: usize) -> usize {
        (y % self.height) * self.width + (x % self.width)
    }

    pub fn insert(&mut self, x: usize, y: usize) {
        let i = self.idx(x, y);
        self.bits[i] = true;
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.bits[self.idx(x, y)]
    }

    pub fn contains_wrapped(&self, x: i64, y: i64) -> bool {
        let xx = x.rem_euclid(self.width as i64) as usize;
        let yy = y.rem_euclid(self.height as i64) as usize;
        self.contains(xx, yy)
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|b| *b)
    }

    pub fn union_with(&mut self, other: &PointSet) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    pub fn is_disjoint(&self, other: &PointSet) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !(*a && *b))
    }

    pub fn difference(&self, other: &PointSet) -> PointSet {
        let mut out = self.clone();
        for (a, b) in out.bits.iter_mut().zip(&other.bits) {
            *a = *a && !*b;
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

/// Column- or block-shaped data domain available to one owner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Each block only sees its own points.
    Block,
    /// Each block column sees its full height.
    Column,
}

/// One erosion stage: grow every level up to `max_level` as far as the data
/// domain allows. `offset` translates the block lattice on both axes.
#[derive(Debug, Clone, Copy)]
pub struct OracleStage {
    pub domain: Domain,
    pub offset: usize,
    pub max_level: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleViolation {
    MissingDependency {
        level: usize,
        x: usize,
        y: usize,
        dep_level: usize,
    },
    Duplicate {
        level: usize,
        x: usize,
        y: usize,
    },
    Evicted {
        level: usize,
        x: usize,
        y: usize,
        dep_level: usize,
    },
    NonLocal {
        level: usize,
        x: usize,
        y: usize,
    },
    NotFlat {
        level: usize,
    },
}

/// Per-level admitted sets on a periodic tile.
pub struct CoverageOracle {
    width: usize,
    height: usize,
    stencil: StencilShape,
    admitted: Vec<PointSet>,
}

impl CoverageOracle {
    /// Level 0 fully available, nothing above.
    pub fn new(width: usize, height: usize, stencil: StencilShape, max_level: usize) -> Self {
        let mut admitted = vec![PointSet::empty(width, height); max_level + 1];
        admitted[0] = PointSet::full(width, height);
        CoverageOracle {
            width,
            height,
            stencil,
            admitted,
        }
    }

    pub fn admitted(&self) -> &[PointSet] {
        &self.admitted
    }

    fn reads_satisfied(&self, level: usize, x: usize, y: usize, domain: Option<&PointSet>) -> bool {
        for read in self.stencil.reads_for_level(level) {
            let dep = (level as i64 + read.level_offset as i64) as usize;
            let r = read.radius as i64;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (qx, qy) = (x as i64 + dx, y as i64 + dy);
                    if !self.admitted[dep].contains_wrapped(qx, qy) {
                        return false;
                    }
                    if let Some(d) = domain {
                        if !d.contains_wrapped(qx, qy) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Greedily admits every point of `domain` whose footprint is present and
    /// lies inside `domain`. Returns the newly admitted points per level.
    pub fn erode_within(&mut self, domain: &PointSet, max_level: usize) -> Vec<PointSet> {
        let mut fresh = vec![PointSet::empty(self.width, self.height); max_level + 1];
        for level in 1..=max_level {
            let candidates: Vec<(usize, usize)> = domain
                .iter()
                .filter(|&(x, y)| !self.admitted[level].contains(x, y))
                .filter(|&(x, y)| self.reads_satisfied(level, x, y, Some(domain)))
                .collect();
            for (x, y) in candidates {
                self.admitted[level].insert(x, y);
                fresh[level].insert(x, y);
            }
        }
        fresh
    }

    /// Runs one stage over every block or column of the 2x2-block tile.
    pub fn run_stage(&mut self, b: usize, stage: OracleStage) -> Vec<PointSet> {
        let (w, h) = (self.width, self.height);
        let mut fresh = vec![PointSet::empty(w, h); stage.max_level + 1];
        let cols = w / b;
        let rows = h / b;
        let domains: Vec<PointSet> = match stage.domain {
            Domain::Block => (0..cols)
                .flat_map(|cx| (0..rows).map(move |cy| (cx, cy)))
                .map(|(cx, cy)| {
                    PointSet::rect(
                        w,
                        h,
                        (cx * b + stage.offset, (cx + 1) * b + stage.offset),
                        (cy * b + stage.offset, (cy + 1) * b + stage.offset),
                    )
                })
                .collect(),
            Domain::Column => (0..cols)
                .map(|cx| {
                    PointSet::rect(
                        w,
                        h,
                        (cx * b + stage.offset, (cx + 1) * b + stage.offset),
                        (0, h),
                    )
                })
                .collect(),
        };
        for d in &domains {
            let got = self.erode_within(d, stage.max_level);
            for (f, g) in fresh.iter_mut().zip(&got) {
                f.union_with(g);
            }
        }
        fresh
    }
}

/// Runs an ordering of erosion stages on a `2b x 2b` tile from a fully
/// available level 0 and returns the admitted set per level, together with the
/// points each stage added.
pub fn coverage_oracle(
    b: usize,
    stencil: &StencilShape,
    levels: usize,
    ordering: &[OracleStage],
) -> (Vec<PointSet>, Vec<Vec<PointSet>>) {
    let mut oracle = CoverageOracle::new(2 * b, 2 * b, stencil.clone(), levels);
    let mut per_stage = Vec::with_capacity(ordering.len());
    for stage in ordering {
        let mut s = *stage;
        s.max_level = s.max_level.min(levels);
        per_stage.push(oracle.run_stage(b, s));
    }
    (oracle.admitted, per_stage)
}

/// Point-by-point replay of an execution with a ring of `capacity` slots per
/// point. Each write of level `L` at a point overwrites the slot holding
/// `L - capacity`; each read must find exactly the level it asks for.
pub struct Replay {
    width: usize,
    height: usize,
    stencil: StencilShape,
    capacity: usize,
    slots: Vec<Vec<Option<usize>>>,
    done: Vec<PointSet>,
}

impl Replay {
    pub fn new(width: usize, height: usize, stencil: StencilShape, capacity: usize) -> Self {
        let mut slots = vec![vec![None; capacity]; width * height];
        for s in &mut slots {
            s[0] = Some(0);
        }
        Replay {
            width,
            height,
            stencil,
            capacity,
            slots,
            done: vec![PointSet::full(width, height)],
        }
    }

    fn pidx(&self, x: i64, y: i64) -> usize {
        let xx = x.rem_euclid(self.width as i64) as usize;
        let yy = y.rem_euclid(self.height as i64) as usize;
        yy * self.width + xx
    }

    /// Computes `points` at `level`. When `column` is given as `(x0, width)`,
    /// every read must stay within that column (wrapped on the tile).
    pub fn compute(
        &mut self,
        level: usize,
        points: &[(usize, usize)],
        column: Option<(usize, usize)>,
    ) -> Result<(), OracleViolation> {
        while self.done.len() <= level {
            self.done.push(PointSet::empty(self.width, self.height));
        }
        for &(x, y) in points {
            for read in self.stencil.reads_for_level(level) {
                let dep = (level as i64 + read.level_offset as i64) as usize;
                let r = read.radius as i64;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let qx = x as i64 + dx;
                        let qy = y as i64 + dy;
                        if let Some((c0, cw)) = column {
                            let rel = (qx - c0 as i64).rem_euclid(self.width as i64);
                            if rel >= cw as i64 {
                                return Err(OracleViolation::NonLocal { level, x, y });
                            }
                        }
                        if !self.done[dep].contains_wrapped(qx, qy) {
                            return Err(OracleViolation::MissingDependency {
                                level,
                                x,
                                y,
                                dep_level: dep,
                            });
                        }
                        let q = self.pidx(qx, qy);
                        if self.slots[q][dep % self.capacity] != Some(dep) {
                            return Err(OracleViolation::Evicted {
                                level,
                                x,
                                y,
                                dep_level: dep,
                            });
                        }
                    }
                }
            }
        }
        // Writes are applied after all reads of the batch: regions of one
        // entry are independent.
        for &(x, y) in points {
            if self.done[level].contains(x, y) {
                return Err(OracleViolation::Duplicate { level, x, y });
            }
            self.done[level].insert(x, y);
            let p = self.pidx(x as i64, y as i64);
            self.slots[p][level % self.capacity] = Some(level);
        }
        Ok(())
    }

    pub fn done(&self) -> &[PointSet] {
        &self.done
    }

    /// Every level up to `flat` must be complete everywhere and nothing above.
    pub fn check_flat(&self, flat: usize) -> Result<(), OracleViolation> {
        for (level, set) in self.done.iter().enumerate() {
            if level <= flat && !set.is_full() {
                return Err(OracleViolation::NotFlat { level });
            }
            if level > flat && !set.is_empty() {
                return Err(OracleViolation::NotFlat { level });
            }
        }
        if self.done.len() <= flat {
            return Err(OracleViolation::NotFlat { level: flat });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanCheckError {
    Geometry(GeometryError),
    /// The four phases at `level` overlap or leave a hole.
    Tiling { level: usize, covered: usize, overlap: bool },
    /// A phase group admitted a different point set than greedy erosion.
    Coverage {
        group: usize,
        phase: Phase,
        level: usize,
        planned: usize,
        oracle: usize,
    },
    Replay(OracleViolation),
}

impl From<GeometryError> for PlanCheckError {
    fn from(e: GeometryError) -> Self {
        PlanCheckError::Geometry(e)
    }
}

impl From<OracleViolation> for PlanCheckError {
    fn from(e: OracleViolation) -> Self {
        PlanCheckError::Replay(e)
    }
}

fn template_points(region: &Region, b: usize, dx: i64, dy: i64, out: &mut PointSet) {
    let w = 2 * b;
    for cy in 0..2 {
        for cx in 0..2 {
            let r = region.translate(cx * b, cy * b);
            for (x, y) in r.points_mod(w, w) {
                let tx = (x as i64 + dx).rem_euclid(w as i64) as usize;
                let ty = (y as i64 + dy).rem_euclid(w as i64) as usize;
                out.insert(tx, ty);
            }
        }
    }
}

/// Checks that UpPyramid, YBridge, and the half-block shifted XBridge and
/// OctahedronDown partition a `2b x 2b` tile at every level `1..=k`.
pub fn check_tiling(b: usize, n: usize) -> Result<(), PlanCheckError> {
    let k = max_levels(b, n)?;
    let w = 2 * b;
    let h = -((b / 2) as i64);
    for l in 1..=k {
        let mut total = PointSet::empty(w, w);
        let mut covered = 0;
        for (phase, d) in [
            (Phase::UpPyramid, 0),
            (Phase::YBridge, 0),
            (Phase::XBridge, h),
            (Phase::OctahedronDown, h),
        ] {
            let mut set = PointSet::empty(w, w);
            template_points(&phase_region(phase, b, n, l)?, b, d, d, &mut set);
            covered += set.len();
            total.union_with(&set);
        }
        if covered != total.len() || !total.is_full() {
            return Err(PlanCheckError::Tiling {
                level: l,
                covered: total.len(),
                overlap: covered != total.len(),
            });
        }
    }
    Ok(())
}

fn stage_domain(phase: Phase) -> Domain {
    match phase {
        Phase::UpPyramid | Phase::OctahedronUp => Domain::Block,
        _ => Domain::Column,
    }
}

/// Replays a whole plan on a `2b x 2b` tile holding two block-columns, each
/// standing in for a rank.
///
/// Every run of entries sharing a data domain (block or block-column) and
/// frame is compared against greedy erosion within that domain, and every
/// point is computed in a ring of the plan's slab capacity with reads kept
/// inside its own column. The run must end flat at `flat_level`.
pub fn check_plan(plan: &PhasePlan, stencil: &StencilShape) -> Result<(), PlanCheckError> {
    let b = plan.geometry.block();
    let w = 2 * b;
    let flat = plan.flat_level;
    let mut oracle = CoverageOracle::new(w, w, stencil.clone(), flat);
    let mut replay = Replay::new(w, w, stencil.clone(), plan.slab_capacity());
    let mut offset: i64 = 0;

    struct Group {
        domain: Domain,
        offset: i64,
        phase: Phase,
        planned: Vec<PointSet>,
        top: usize,
    }
    let mut groups: Vec<Group> = Vec::new();

    for entry in &plan.entries {
        let c = match entry {
            PlanEntry::Communicate(sign) => {
                offset -= match sign {
                    ShiftSign::Positive => (b / 2) as i64,
                    ShiftSign::Negative => -((b / 2) as i64),
                };
                continue;
            }
            PlanEntry::Compute(c) => c,
        };
        let domain = stage_domain(c.phase);
        let fresh = match groups.last() {
            Some(g) => g.domain != domain || g.offset != offset,
            None => true,
        };
        if fresh {
            groups.push(Group {
                domain,
                offset,
                phase: c.phase,
                planned: vec![PointSet::empty(w, w); flat + 1],
                top: 0,
            });
        }
        let g = groups.last_mut().expect("group");
        g.top = g.top.max(c.abs_level);
        let mut points = PointSet::empty(w, w);
        template_points(&c.region, b, offset, offset, &mut points);
        g.planned[c.abs_level].union_with(&points);

        for cx in 0..2 {
            let x0 = (cx as i64 * b as i64 + offset).rem_euclid(w as i64) as usize;
            let column = PointSet::rect(w, w, (x0, x0 + b), (0, w));
            let mine: Vec<(usize, usize)> = points.iter().filter(|&(x, y)| column.contains(x, y)).collect();
            replay.compute(c.abs_level, &mine, Some((x0, b)))?;
        }
    }

    for (i, g) in groups.iter().enumerate() {
        let got = oracle.run_stage(
            b,
            OracleStage {
                domain: g.domain,
                offset: g.offset.rem_euclid(b as i64) as usize,
                max_level: g.top,
            },
        );
        for level in 1..=flat {
            let empty = PointSet::empty(w, w);
            let o = got.get(level).unwrap_or(&empty);
            if *o != g.planned[level] {
                return Err(PlanCheckError::Coverage {
                    group: i,
                    phase: g.phase,
                    level,
                    planned: g.planned[level].len(),
                    oracle: o.len(),
                });
            }
        }
    }
    replay.check_flat(flat)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_zero_is_everything() {
        let st = StencilShape::single_stage(1).unwrap();
        let (sets, _) = coverage_oracle(8, &st, 3, &[]);
        assert!(sets[0].is_full());
        assert!(sets[1].is_empty());
    }

    #[test]
    fn block_erosion_leaves_two_by_two_tops() {
        let st = StencilShape::single_stage(1).unwrap();
        let stage = OracleStage {
            domain: Domain::Block,
            offset: 0,
            max_level: 3,
        };
        let (sets, _) = coverage_oracle(8, &st, 3, &[stage]);
        let mut tops = PointSet::empty(16, 16);
        for bx in 0..2 {
            for by in 0..2 {
                for y in 3..5 {
                    for x in 3..5 {
                        tops.insert(bx * 8 + x, by * 8 + y);
                    }
                }
            }
        }
        assert_eq!(sets[3], tops);
    }

    #[test]
    fn replay_rejects_missing_and_duplicate() {
        let st = StencilShape::single_stage(1).unwrap();
        let mut r = Replay::new(8, 8, st, 3);
        assert_eq!(
            r.compute(2, &[(0, 0)], None),
            Err(OracleViolation::MissingDependency {
                level: 2,
                x: 0,
                y: 0,
                dep_level: 1
            })
        );
        r.compute(1, &[(3, 3)], None).unwrap();
        assert_eq!(
            r.compute(1, &[(3, 3)], None),
            Err(OracleViolation::Duplicate { level: 1, x: 3, y: 3 })
        );
        assert_eq!(
            r.compute(1, &[(0, 4)], Some((0, 4))),
            Err(OracleViolation::NonLocal { level: 1, x: 0, y: 4 })
        );
    }

    #[test]
    fn replay_detects_eviction() {
        let st = StencilShape::single_stage(1).unwrap();
        let mut r = Replay::new(4, 4, st, 1);
        r.compute(1, &[(0, 0)], None).unwrap();
        assert_eq!(
            r.compute(1, &[(1, 0)], None),
            Err(OracleViolation::Evicted {
                level: 1,
                x: 1,
                y: 0,
                dep_level: 0
            })
        );
        assert!(r.check_flat(1).is_err());
    }
}
