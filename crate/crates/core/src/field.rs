use crate::geometry::Region;

/// Multi-variable grid planes, laid out `[var][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub nvars: usize,
    pub nx: usize,
    pub ny: usize,
    /// Sub-step level the plane currently holds.
    pub level: usize,
    pub data: Vec<f64>,
}

impl FieldState {
    pub fn zeros(nvars: usize, nx: usize, ny: usize) -> Self {
        FieldState {
            nvars,
            nx,
            ny,
            level: 0,
            data: vec![0.0; nvars * nx * ny],
        }
    }

    pub fn from_fn(
        nvars: usize,
        nx: usize,
        ny: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut s = Self::zeros(nvars, nx, ny);
        for v in 0..nvars {
            for y in 0..ny {
                for x in 0..nx {
                    let i = s.index(v, x, y);
                    s.data[i] = f(v, x, y);
                }
            }
        }
        s
    }

    #[inline]
    pub fn index(&self, var: usize, x: usize, y: usize) -> usize {
        (var * self.ny + y) * self.nx + x
    }

    #[inline]
    pub fn get(&self, var: usize, x: usize, y: usize) -> f64 {
        self.data[self.index(var, x, y)]
    }

    /// Periodic read on both axes.
    #[inline]
    pub fn get_wrapped(&self, var: usize, x: i64, y: i64) -> f64 {
        let xx = x.rem_euclid(self.nx as i64) as usize;
        let yy = y.rem_euclid(self.ny as i64) as usize;
        self.get(var, xx, yy)
    }

    #[inline]
    pub fn set(&mut self, var: usize, x: usize, y: usize, value: f64) {
        let i = self.index(var, x, y);
        self.data[i] = value;
    }

    pub fn plane(&self, var: usize) -> &[f64] {
        let n = self.nx * self.ny;
        &self.data[var * n..(var + 1) * n]
    }

    /// Writes a region-shaped buffer (`[var][row][col]`) back, wrapping on
    /// both axes.
    pub fn scatter(&mut self, region: &Region, values: &[f64]) {
        let (w, h) = (region.width(), region.height());
        debug_assert_eq!(values.len(), self.nvars * w * h);
        for v in 0..self.nvars {
            for j in 0..h {
                let y = (region.y0 + j) % self.ny;
                let row = &values[(v * h + j) * w..(v * h + j + 1) * w];
                if region.x1 <= self.nx {
                    let start = self.index(v, region.x0, y);
                    self.data[start..start + w].copy_from_slice(row);
                } else {
                    for (i, val) in row.iter().enumerate() {
                        let x = (region.x0 + i) % self.nx;
                        self.set(v, x, y, *val);
                    }
                }
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sum of each variable over the whole plane.
    pub fn sums(&self) -> Vec<f64> {
        (0..self.nvars).map(|v| self.plane(v).iter().sum()).collect()
    }

    /// Largest absolute difference, relative to the largest magnitude in `other`.
    pub fn max_rel_diff(&self, other: &FieldState) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "field shapes differ");
        let scale = other
            .data
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let diff = self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_wraps_rows_and_columns() {
        let mut f = FieldState::zeros(1, 4, 4);
        let r = Region::new(3, 5, 3, 5, 1);
        f.scatter(&r, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(f.get(0, 3, 3), 1.0);
        assert_eq!(f.get(0, 0, 3), 2.0);
        assert_eq!(f.get(0, 3, 0), 3.0);
        assert_eq!(f.get(0, 0, 0), 4.0);
    }

    #[test]
    fn relative_difference() {
        let a = FieldState::from_fn(1, 2, 2, |_, x, _| x as f64);
        let mut b = a.clone();
        assert_eq!(a.max_rel_diff(&b), 0.0);
        b.set(0, 1, 1, 1.5);
        assert!((b.max_rel_diff(&a) - 0.5).abs() < 1e-15);
    }
}
