use crate::field::FieldState;
use crate::geometry::ShiftSign;

use super::EngineError;

/// Ring of time-level planes for one rank's columns. Level `l` lives in slot
/// `l % capacity`.
#[derive(Debug, Clone)]
pub struct TimeSlab {
    planes: Vec<FieldState>,
    levels: Vec<Option<usize>>,
    scratch: Vec<f64>,
}

impl TimeSlab {
    pub fn new(capacity: usize, nvars: usize, nx: usize, ny: usize) -> Self {
        assert!(capacity >= 1);
        TimeSlab {
            planes: (0..capacity).map(|_| FieldState::zeros(nvars, nx, ny)).collect(),
            levels: vec![None; capacity],
            scratch: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.planes.len()
    }

    pub fn nx(&self) -> usize {
        self.planes[0].nx
    }

    pub fn ny(&self) -> usize {
        self.planes[0].ny
    }

    pub fn nvars(&self) -> usize {
        self.planes[0].nvars
    }

    pub fn slot(&self, level: usize) -> usize {
        level % self.capacity()
    }

    /// Levels currently held, in slot order.
    pub fn retained(&self) -> impl Iterator<Item = usize> + '_ {
        self.levels.iter().filter_map(|l| *l)
    }

    pub fn holds(&self, level: usize) -> bool {
        self.levels[self.slot(level)] == Some(level)
    }

    pub fn plane(&self, level: usize) -> Result<&FieldState, EngineError> {
        if !self.holds(level) {
            return Err(EngineError::Schedule(format!(
                "level {level} is not held (slot has {:?})",
                self.levels[self.slot(level)]
            )));
        }
        Ok(&self.planes[self.slot(level)])
    }

    pub fn plane_mut(&mut self, level: usize) -> Result<&mut FieldState, EngineError> {
        if !self.holds(level) {
            return Err(EngineError::Schedule(format!("level {level} is not held")));
        }
        let s = self.slot(level);
        Ok(&mut self.planes[s])
    }

    /// Makes `level` the occupant of its slot. Returns the level evicted, if
    /// any. Existing contents are kept so partially written levels survive.
    pub fn claim(&mut self, level: usize) -> Option<usize> {
        let s = self.slot(level);
        match self.levels[s] {
            Some(l) if l == level => None,
            old => {
                self.levels[s] = Some(level);
                self.planes[s].level = level;
                old
            }
        }
    }

    /// Installs a full plane at `level`.
    pub fn install(&mut self, level: usize, plane: FieldState) -> Option<usize> {
        let evicted = self.claim(level);
        let s = self.slot(level);
        assert_eq!(plane.data.len(), self.planes[s].data.len());
        self.planes[s].data = plane.data;
        evicted
    }

    /// Columns `[x0, x0 + width)` of every slot, laid out `[slot][var][y][col]`.
    pub fn columns(&self, x0: usize, width: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.capacity() * self.nvars() * self.ny() * width);
        for p in &self.planes {
            for v in 0..p.nvars {
                for y in 0..p.ny {
                    let start = p.index(v, x0, y);
                    out.extend_from_slice(&p.data[start..start + width]);
                }
            }
        }
        out
    }

    /// Bytes in one strip of `width` columns across every slot.
    pub fn strip_bytes(&self, width: usize) -> u64 {
        (self.capacity() * self.nvars() * self.ny() * width * 8) as u64
    }
}

/// Columns leaving this rank when the data moves by `sign * half` in x: the
/// rightmost `half` columns for a positive shift, the leftmost for a negative.
pub fn outgoing_strip(slab: &TimeSlab, sign: ShiftSign, half: usize) -> Vec<f64> {
    match sign {
        ShiftSign::Positive => slab.columns(slab.nx() - half, half),
        ShiftSign::Negative => slab.columns(0, half),
    }
}

/// Moves every slot by `(sign * half, sign * half)`: the plane at `(x, y)`
/// takes the old value at `(x - sign * half, y - sign * half)`. Values that
/// come from beyond the rank's columns are taken from `incoming`, the
/// neighbour's [`outgoing_strip`]. The y move wraps locally.
pub fn apply_shift(
    slab: &mut TimeSlab,
    sign: ShiftSign,
    half: usize,
    incoming: &[f64],
) -> Result<(), EngineError> {
    let (nx, ny, nvars) = (slab.nx(), slab.ny(), slab.nvars());
    if half > nx || half > ny {
        return Err(EngineError::Schedule(format!(
            "shift {half} exceeds local extent {nx}x{ny}"
        )));
    }
    let want = slab.capacity() * nvars * ny * half;
    if incoming.len() != want {
        return Err(EngineError::StripSize {
            got: incoming.len(),
            want,
        });
    }
    let mut scratch = std::mem::take(&mut slab.scratch);
    scratch.resize(nvars * nx * ny, 0.0);
    let strip_plane = nvars * ny * half;
    for (slot, plane) in slab.planes.iter_mut().enumerate() {
        let strip = &incoming[slot * strip_plane..(slot + 1) * strip_plane];
        for v in 0..nvars {
            for y in 0..ny {
                let sy = match sign {
                    ShiftSign::Positive => (y + ny - half % ny) % ny,
                    ShiftSign::Negative => (y + half) % ny,
                };
                let dst = &mut scratch[(v * ny + y) * nx..(v * ny + y + 1) * nx];
                let src_row = &plane.data[(v * ny + sy) * nx..(v * ny + sy + 1) * nx];
                let strip_row = &strip[(v * ny + sy) * half..(v * ny + sy + 1) * half];
                match sign {
                    ShiftSign::Positive => {
                        dst[..half].copy_from_slice(strip_row);
                        dst[half..].copy_from_slice(&src_row[..nx - half]);
                    }
                    ShiftSign::Negative => {
                        dst[..nx - half].copy_from_slice(&src_row[half..]);
                        dst[nx - half..].copy_from_slice(strip_row);
                    }
                }
            }
        }
        std::mem::swap(&mut plane.data, &mut scratch);
    }
    slab.scratch = scratch;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(cap: usize, nx: usize, ny: usize) -> TimeSlab {
        let mut s = TimeSlab::new(cap, 2, nx, ny);
        for l in 0..cap {
            s.install(
                l,
                FieldState::from_fn(2, nx, ny, |v, x, y| (l * 1000 + v * 100 + y * 10 + x) as f64),
            );
        }
        s
    }

    #[test]
    fn ring_slots_and_eviction() {
        let mut s = TimeSlab::new(3, 1, 2, 2);
        assert_eq!(s.claim(0), None);
        assert_eq!(s.claim(1), None);
        assert_eq!(s.claim(2), None);
        assert_eq!(s.claim(3), Some(0));
        assert!(s.holds(3) && !s.holds(0));
        assert!(s.plane(0).is_err());
        let mut held: Vec<_> = s.retained().collect();
        held.sort();
        assert_eq!(held, vec![1, 2, 3]);
    }

    #[test]
    fn single_rank_shift_is_rotation() {
        let mut s = filled(2, 6, 4);
        let before = s.clone();
        let strip = outgoing_strip(&s, ShiftSign::Positive, 2);
        apply_shift(&mut s, ShiftSign::Positive, 2, &strip).unwrap();
        let p = s.plane(1).unwrap();
        let q = before.plane(1).unwrap();
        for v in 0..2 {
            for y in 0..4 {
                for x in 0..6 {
                    assert_eq!(p.get(v, x, y), q.get_wrapped(v, x as i64 - 2, y as i64 - 2));
                }
            }
        }
    }

    #[test]
    fn opposite_shifts_restore_placement() {
        let mut s = filled(3, 8, 4);
        let before = s.clone();
        let strip = outgoing_strip(&s, ShiftSign::Positive, 4);
        apply_shift(&mut s, ShiftSign::Positive, 4, &strip).unwrap();
        let strip = outgoing_strip(&s, ShiftSign::Negative, 4);
        apply_shift(&mut s, ShiftSign::Negative, 4, &strip).unwrap();
        for l in 0..3 {
            assert_eq!(s.plane(l).unwrap().data, before.plane(l).unwrap().data);
        }
    }

    #[test]
    fn two_rank_shift_matches_global_rotation() {
        let (w, ny, half) = (4, 4, 2);
        let global = FieldState::from_fn(1, 2 * w, ny, |_, x, y| (y * 10 + x) as f64);
        let local = |x0: usize| {
            let mut s = TimeSlab::new(1, 1, w, ny);
            s.install(0, FieldState::from_fn(1, w, ny, |_, x, y| global.get(0, x0 + x, y)));
            s
        };
        let (mut a, mut b) = (local(0), local(w));
        let (sa, sb) = (
            outgoing_strip(&a, ShiftSign::Positive, half),
            outgoing_strip(&b, ShiftSign::Positive, half),
        );
        apply_shift(&mut a, ShiftSign::Positive, half, &sb).unwrap();
        apply_shift(&mut b, ShiftSign::Positive, half, &sa).unwrap();
        for y in 0..ny {
            for x in 0..w {
                let want = |gx: usize| global.get_wrapped(0, gx as i64 - 2, y as i64 - 2);
                assert_eq!(a.plane(0).unwrap().get(0, x, y), want(x));
                assert_eq!(b.plane(0).unwrap().get(0, x, y), want(x + w));
            }
        }
        assert!(matches!(
            apply_shift(&mut a, ShiftSign::Positive, half, &[0.0]),
            Err(EngineError::StripSize { .. })
        ));
    }
}
