//! Convergence checks against the analytic solutions.

use serde::Serialize;
use sweptgrid::engine::{build_problem, run, run_standard};
use sweptgrid::geometry::Region;
use sweptgrid::physics::euler::{cfl_timestep, vortex_analytic, EulerParams, EulerScheme, VortexSpec};
use sweptgrid::physics::heat::heat_field;
use sweptgrid::physics::Scheme;
use sweptgrid::{EngineKind, FieldState, ProblemKind, SolverConfig};

/// Minimum observed heat order.
pub const HEAT_MIN_ORDER: f64 = 1.9;
/// Largest relative drift of a conserved sum over an Euler run.
pub const CONSERVATION_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRow {
    pub nx: usize,
    pub steps: usize,
    pub time: f64,
    pub linf: f64,
    pub l2: f64,
    /// Observed order against the previous, coarser row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub problem: String,
    pub rows: Vec<ErrorRow>,
    pub passed: bool,
    pub criterion: String,
}

impl VerifyReport {
    pub fn table(&self) -> String {
        let mut s = format!("{} ({})\n", self.problem, self.criterion);
        s.push_str("      nx  steps          time          linf            l2  order\n");
        for r in &self.rows {
            let order = r.order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{:>8} {:>6} {:>13.6e} {:>13.6e} {:>13.6e}  {order}\n",
                r.nx, r.steps, r.time, r.linf, r.l2
            ));
        }
        s.push_str(if self.passed { "PASS\n" } else { "FAIL\n" });
        s
    }
}

fn errors(numeric: &FieldState, exact: &FieldState, var: usize) -> (f64, f64) {
    let a = numeric.plane(var);
    let b = exact.plane(var);
    let mut linf = 0.0f64;
    let mut sq = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        linf = linf.max(d);
        sq += d * d;
    }
    (linf, (sq / a.len() as f64).sqrt())
}

fn fill_orders(rows: &mut [ErrorRow]) {
    for i in 1..rows.len() {
        let (c, f) = (&rows[i - 1], &rows[i]);
        if c.linf > 0.0 && f.linf > 0.0 {
            rows[i].order = Some((c.linf / f.linf).ln() / (f.nx as f64 / c.nx as f64).ln());
        }
    }
}

/// Heat on a refinement ladder with `dt` proportional to `dx^2`. The coarsest
/// grid runs `base_steps`; finer grids run the steps that reach the same time.
pub fn verify_heat(sizes: &[usize], base: &SolverConfig, base_steps: usize) -> anyhow::Result<VerifyReport> {
    anyhow::ensure!(sizes.len() >= 2, "need at least two sizes");
    let mut rows = Vec::new();
    let n0 = sizes[0] as f64;
    for &nx in sizes {
        let ratio = nx as f64 / n0;
        let steps = (base_steps as f64 * ratio * ratio).round() as usize;
        let c = SolverConfig {
            problem: ProblemKind::Heat,
            nx,
            steps,
            ..base.clone()
        };
        let out = run(&c)?;
        let t = out.record.actual_steps as f64 * out.record.dt;
        let exact = heat_field(nx, nx, t, c.alpha);
        let (linf, l2) = errors(&out.field, &exact, 0);
        rows.push(ErrorRow {
            nx,
            steps: out.record.actual_steps,
            time: t,
            linf,
            l2,
            order: None,
        });
    }
    fill_orders(&mut rows);
    let passed = rows.iter().skip(1).all(|r| r.order.is_some_and(|o| o >= HEAT_MIN_ORDER));
    Ok(VerifyReport {
        problem: "heat".into(),
        rows,
        passed,
        criterion: format!("observed order >= {HEAT_MIN_ORDER}"),
    })
}

/// Isentropic vortex to a common final time on each size; density error
/// must fall monotonically.
pub fn verify_euler(sizes: &[usize], base: &SolverConfig, final_time: f64) -> anyhow::Result<VerifyReport> {
    anyhow::ensure!(sizes.len() >= 2, "need at least two sizes");
    let mut rows = Vec::new();
    for &nx in sizes {
        let probe = SolverConfig {
            problem: ProblemKind::Euler,
            nx,
            ..base.clone()
        };
        let dt = build_problem(&probe)?.header.dt;
        let steps = ((final_time / dt).round() as usize).max(1);
        let c = SolverConfig { steps, ..probe };
        let out = run(&c)?;
        let t = out.record.actual_steps as f64 * out.record.dt;
        let spec = VortexSpec::standard(c.gamma);
        let exact = vortex_analytic(nx, nx, &spec, c.gamma, t)?;
        let (linf, l2) = errors(&out.field, &exact, 0);
        rows.push(ErrorRow {
            nx,
            steps: out.record.actual_steps,
            time: t,
            linf,
            l2,
            order: None,
        });
    }
    fill_orders(&mut rows);
    let passed = rows.windows(2).all(|w| w[1].linf < w[0].linf);
    Ok(VerifyReport {
        problem: "euler".into(),
        rows,
        passed,
        criterion: "density error decreases monotonically".into(),
    })
}

/// Uniform free stream advanced by the Euler kernels: an exact fixed point.
pub fn verify_uniform(sizes: &[usize], steps: usize) -> anyhow::Result<VerifyReport> {
    let gamma = 1.4;
    let mut spec = VortexSpec::standard(gamma);
    spec.beta = 0.0;
    let mut rows = Vec::new();
    for &nx in sizes {
        let init = vortex_analytic(nx, nx, &spec, gamma, 0.0)?;
        let (dx, dy) = spec.spacing(nx, nx);
        let dt = cfl_timestep(&init, gamma, dx, dy, 0.4)?;
        let scheme = EulerScheme::new(EulerParams {
            gamma,
            dx,
            dy,
            dt,
            cfl: 0.4,
        })?;
        let all = Region::new(0, nx, 0, nx, 0);
        let mut q = init.clone();
        for _ in 0..steps {
            let mut half = q.clone();
            scheme.update_region(0, &q, &q, &all, &mut half.data)?;
            let mut next = q.clone();
            scheme.update_region(1, &half, &q, &all, &mut next.data)?;
            q = next;
        }
        let exact = vortex_analytic(nx, nx, &spec, gamma, steps as f64 * dt)?;
        let mut linf = 0.0f64;
        let mut l2 = 0.0f64;
        for v in 0..4 {
            let (a, b) = errors(&q, &exact, v);
            linf = linf.max(a);
            l2 = l2.max(b);
        }
        rows.push(ErrorRow {
            nx,
            steps,
            time: steps as f64 * dt,
            linf,
            l2,
            order: None,
        });
    }
    let passed = rows.iter().all(|r| r.linf == 0.0);
    Ok(VerifyReport {
        problem: "uniform".into(),
        rows,
        passed,
        criterion: "zero error at every size".into(),
    })
}

/// Relative drift of each conserved sum after `steps` Euler steps.
pub fn euler_conservation(nx: usize, steps: usize, base: &SolverConfig) -> anyhow::Result<[f64; 4]> {
    let c = SolverConfig {
        problem: ProblemKind::Euler,
        engine: EngineKind::Standard,
        nx,
        steps,
        ..base.clone()
    };
    let before = build_problem(&c)?.initial.sums();
    let after = run_standard(&c)?.field.sums();
    let mut drift = [0.0; 4];
    for v in 0..4 {
        drift[v] = (after[v] - before[v]).abs() / before[v].abs().max(f64::MIN_POSITIVE);
    }
    Ok(drift)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_from_halving_errors() {
        let mut rows: Vec<ErrorRow> = [(32, 4.0), (64, 1.0), (128, 0.25)]
            .into_iter()
            .map(|(nx, linf)| ErrorRow {
                nx,
                steps: 1,
                time: 0.0,
                linf,
                l2: 0.0,
                order: None,
            })
            .collect();
        fill_orders(&mut rows);
        assert!(rows[0].order.is_none());
        assert!((rows[2].order.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_stream_is_exact() {
        let r = verify_uniform(&[16, 32], 3).unwrap();
        assert!(r.passed, "{}", r.table());
    }
}
