//! SVG heatmaps of a sweep CSV, one per problem and array size.
//!
//! Columns are shares, rows are block sizes. The best cell of each map
//! carries a white dot with a black border, the worst a black dot with a
//! white border.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::sweep::{read_rows, BenchRow};

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub problem: String,
    pub nx: usize,
    pub metric: String,
    pub shares: Vec<f64>,
    pub blocks: Vec<usize>,
    /// `values[row][col]`, rows following `blocks`; `None` for missing or failed cells.
    pub values: Vec<Vec<Option<f64>>>,
}

/// Grid position of a marked cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mark {
    pub row: usize,
    pub col: usize,
}

pub fn metric_value(row: &BenchRow, metric: &str) -> anyhow::Result<Option<f64>> {
    Ok(match metric {
        "speedup" => row.speedup,
        "predicted_speedup" => row.predicted_speedup,
        "run_seconds_standard" => row.run_seconds_standard,
        "run_seconds_swept" => row.run_seconds_swept,
        "modeled_seconds_standard" => row.modeled_seconds_standard,
        "modeled_seconds_swept" => row.modeled_seconds_swept,
        "wall_seconds_standard" => row.wall_seconds_standard,
        "wall_seconds_swept" => row.wall_seconds_swept,
        other => anyhow::bail!("cannot plot column '{other}'"),
    })
}

fn share_key(s: f64) -> i64 {
    (s * 1e6).round() as i64
}

/// Groups rows into one heatmap per (problem, nx).
pub fn heatmaps(rows: &[BenchRow], metric: &str) -> anyhow::Result<Vec<Heatmap>> {
    let mut groups: BTreeMap<(String, usize), Vec<&BenchRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.problem.clone(), r.nx)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((problem, nx), rows) in groups {
        let mut shares: Vec<f64> = Vec::new();
        let mut blocks: Vec<usize> = Vec::new();
        for r in &rows {
            if !shares.iter().any(|s| share_key(*s) == share_key(r.share)) {
                shares.push(r.share);
            }
            if !blocks.contains(&r.b) {
                blocks.push(r.b);
            }
        }
        shares.sort_by(f64::total_cmp);
        blocks.sort();
        let mut values = vec![vec![None; shares.len()]; blocks.len()];
        for r in &rows {
            let i = blocks.iter().position(|b| *b == r.b).expect("block");
            let j = shares
                .iter()
                .position(|s| share_key(*s) == share_key(r.share))
                .expect("share");
            let v = if r.error.is_empty() { metric_value(r, metric)? } else { None };
            values[i][j] = v.filter(|x| x.is_finite());
        }
        out.push(Heatmap {
            problem,
            nx,
            metric: metric.to_string(),
            shares,
            blocks,
            values,
        });
    }
    Ok(out)
}

impl Heatmap {
    fn extremes(&self) -> Option<(Mark, f64, Mark, f64)> {
        let mut best: Option<(Mark, f64)> = None;
        let mut worst: Option<(Mark, f64)> = None;
        for (row, vals) in self.values.iter().enumerate() {
            for (col, v) in vals.iter().enumerate() {
                let Some(v) = *v else { continue };
                let m = Mark { row, col };
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((m, v));
                }
                if worst.is_none_or(|(_, w)| v < w) {
                    worst = Some((m, v));
                }
            }
        }
        let (b, bv) = best?;
        let (w, wv) = worst?;
        Some((b, bv, w, wv))
    }

    /// Best and worst cells. Lower is better for time columns.
    pub fn best_worst(&self) -> Option<(Mark, Mark)> {
        let (hi, _, lo, _) = self.extremes()?;
        if self.metric.contains("seconds") {
            Some((lo, hi))
        } else {
            Some((hi, lo))
        }
    }

    fn colour(&self, v: f64, lo: f64, hi: f64) -> String {
        let t = if self.metric.contains("speedup") {
            // Diverging around 1 on a log scale.
            let span = lo.ln().abs().max(hi.ln().abs()).max(1e-12);
            0.5 + 0.5 * (v.ln() / span)
        } else if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.5
        };
        let t = t.clamp(0.0, 1.0);
        let (r, g, b) = if t < 0.5 {
            let u = t / 0.5;
            (lerp(49, 247, u), lerp(104, 247, u), lerp(173, 247, u))
        } else {
            let u = (t - 0.5) / 0.5;
            (lerp(247, 190, u), lerp(247, 38, u), lerp(247, 41, u))
        };
        format!("#{r:02x}{g:02x}{b:02x}")
    }

    pub fn to_svg(&self) -> String {
        let cell = 56.0;
        let (left, top) = (70.0, 50.0);
        let w = left + cell * self.shares.len() as f64 + 20.0;
        let h = top + cell * self.blocks.len() as f64 + 50.0;
        let (lo, hi) = match self.extremes() {
            Some((_, hv, _, lv)) => (lv, hv),
            None => (1.0, 1.0),
        };
        let marks = self.best_worst();
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{} nx={} ({})</text>"#,
            w / 2.0,
            self.problem,
            self.nx,
            self.metric
        );
        for (i, b) in self.blocks.iter().enumerate() {
            // Largest block at the top.
            let y = top + cell * (self.blocks.len() - 1 - i) as f64;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{b}</text>"#,
                left - 8.0,
                y + cell / 2.0 + 4.0
            );
            for (j, v) in self.values[i].iter().enumerate() {
                let x = left + cell * j as f64;
                let (fill, label) = match v {
                    Some(v) => (self.colour(*v, lo, hi), format_value(*v)),
                    None => ("#bdbdbd".to_string(), "n/a".to_string()),
                };
                let _ = writeln!(
                    s,
                    r#"<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="white"/>"#
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#,
                    x + cell / 2.0,
                    y + cell - 8.0
                );
                if let Some((best, worst)) = marks {
                    let (cx, cy) = (x + cell / 2.0, y + cell / 2.0 - 6.0);
                    if best == (Mark { row: i, col: j }) {
                        let _ = writeln!(
                            s,
                            r#"<circle class="best" cx="{cx}" cy="{cy}" r="8" fill="white" stroke="black" stroke-width="2"/>"#
                        );
                    }
                    if worst == (Mark { row: i, col: j }) && worst != best {
                        let _ = writeln!(
                            s,
                            r#"<circle class="worst" cx="{cx}" cy="{cy}" r="8" fill="black" stroke="white" stroke-width="2"/>"#
                        );
                    }
                }
            }
        }
        let base = top + cell * self.blocks.len() as f64;
        for (j, share) in self.shares.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{share:.1}</text>"#,
                left + cell * j as f64 + cell / 2.0,
                base + 16.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">share</text>"#,
            left + cell * self.shares.len() as f64 / 2.0,
            base + 36.0
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">block size</text>"#,
            top + cell * self.blocks.len() as f64 / 2.0,
            top + cell * self.blocks.len() as f64 / 2.0
        );
        s.push_str("</svg>\n");
        s
    }
}

fn lerp(a: u8, b: u8, t: f64) -> u8 {
    (a as f64 + (b as f64 - a as f64) * t).round() as u8
}

fn format_value(v: f64) -> String {
    if v.abs() >= 100.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Writes one SVG per heatmap of `csv` into `out`; returns the paths.
pub fn render_csv(csv: &Path, metric: &str, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let rows = read_rows(csv)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut paths = Vec::new();
    for map in heatmaps(&rows, metric)? {
        let p = out.join(format!("{}_{}_{}.svg", metric, map.problem, map.nx));
        std::fs::write(&p, map.to_svg()).with_context(|| format!("writing {}", p.display()))?;
        paths.push(p);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(values: Vec<Vec<Option<f64>>>, metric: &str) -> Heatmap {
        Heatmap {
            problem: "heat".into(),
            nx: 96,
            metric: metric.into(),
            shares: vec![0.0, 0.5],
            blocks: vec![8, 16],
            values,
        }
    }

    #[test]
    fn marks_best_and_worst() {
        let m = map(vec![vec![Some(0.5), Some(2.0)], vec![None, Some(1.0)]], "speedup");
        assert_eq!(m.best_worst(), Some((Mark { row: 0, col: 1 }, Mark { row: 0, col: 0 })));
        let svg = m.to_svg();
        assert_eq!(svg.matches(r#"class="best""#).count(), 1);
        assert_eq!(svg.matches(r#"class="worst""#).count(), 1);
        assert!(svg.contains("n/a"));
        let t = map(vec![vec![Some(0.5), Some(2.0)], vec![None, Some(1.0)]], "run_seconds_swept");
        assert_eq!(t.best_worst().unwrap().0, Mark { row: 0, col: 0 });
    }
}
