//! Acceptance run. Prints one line per criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use sweptgrid::engine::{comm_profile, per_level_compute, run_standard, run_standard_steps, run_swept};
use sweptgrid::geometry::{build_schedule, max_levels, phase_region, BlockGeometry, Phase, StencilShape};
use sweptgrid::oracle::{check_plan, check_tiling};
use sweptgrid::snapshot::{read_snapshot, SnapshotWriter};
use sweptgrid::transport::predict_speedup;
use sweptgrid::{EngineKind, Mode, ProblemKind, SolverConfig, TransportConfig};
use sweptgrid_cli::render::render_csv;
use sweptgrid_cli::sweep::{read_rows, run_sweep, SweepSpec};
use sweptgrid_cli::verify::{euler_conservation, verify_euler, verify_heat, CONSERVATION_TOL, HEAT_MIN_ORDER};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn geometry_cases() -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for b in [8, 12, 16, 24, 32] {
        for n in [1, 2] {
            if b % (2 * n) != 0 {
                continue;
            }
            for s in [1, 2] {
                out.push((b, n, s));
            }
        }
    }
    out
}

fn stencil(n: usize, s: usize) -> StencilShape {
    if s == 1 {
        StencilShape::single_stage(n).unwrap()
    } else {
        StencilShape::rk2(n).unwrap()
    }
}

fn heat(nx: usize, b: usize, ranks: usize, steps: usize) -> SolverConfig {
    SolverConfig {
        problem: ProblemKind::Heat,
        nx,
        block: b,
        ranks,
        steps,
        ..Default::default()
    }
}

fn c1_geometry_oracle() -> Outcome {
    let start = Instant::now();
    let mut plans = 0;
    for (b, n, s) in geometry_cases() {
        check_tiling(b, n).map_err(|e| format!("tiling b={b} n={n}: {e:?}"))?;
        let st = stencil(n, s);
        let geom = BlockGeometry::new(b, n).map_err(|e| e.to_string())?;
        let k = geom.levels();
        for steps in [k.div_ceil(s), (3 * k).div_ceil(s), (4 * k).div_ceil(s)] {
            let plan = build_schedule(steps, geom, &st).map_err(|e| e.to_string())?;
            check_plan(&plan, &st).map_err(|e| format!("b={b} n={n} S={s} steps={steps}: {e:?}"))?;
            plans += 1;
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(60), format!("{plans} schedules checked in {:.2} s", t.as_secs_f64()))
}

fn c2_levels() -> Outcome {
    for (b, n, _) in geometry_cases() {
        let k = max_levels(b, n).map_err(|e| e.to_string())?;
        if k != b / (2 * n) - 1 {
            return Err(format!("b={b} n={n}: k={k}"));
        }
        let top = phase_region(Phase::UpPyramid, b, n, k).map_err(|e| e.to_string())?;
        if top.width() != 2 * n || top.height() != 2 * n {
            return Err(format!("b={b} n={n}: top {}x{}", top.width(), top.height()));
        }
    }
    Ok("k = b/(2n) - 1 and the top is 2n wide for every case".into())
}

fn c3_swept_matches_standard() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut runs = 0;
    for problem in [ProblemKind::Heat, ProblemKind::Euler] {
        for nx in [96, 192] {
            for b in [8, 16] {
                for share in [0.0, 0.5, 1.0] {
                    for ranks in [1, 2, 4] {
                        let c = SolverConfig {
                            problem,
                            nx,
                            block: b,
                            share,
                            ranks,
                            steps: 50,
                            ..Default::default()
                        };
                        let sw = run_swept(&c).map_err(|e| e.to_string())?;
                        let st = run_standard_steps(&c, sw.record.actual_steps).map_err(|e| e.to_string())?;
                        let d = sw.field.max_rel_diff(&st.field);
                        if !(d <= 1e-10) {
                            return Err(format!("{problem:?} nx={nx} b={b} share={share} ranks={ranks}: {d:e}"));
                        }
                        worst = worst.max(d);
                        runs += 1;
                    }
                }
            }
        }
    }
    let t = start.elapsed();
    ensure(
        t < Duration::from_secs(300),
        format!("{runs} pairs, max difference {worst:.2e}, {:.1} s", t.as_secs_f64()),
    )
}

fn c4_rank_invariance() -> Outcome {
    let mut worst = 0.0f64;
    for problem in [ProblemKind::Heat, ProblemKind::Euler] {
        let c = SolverConfig {
            problem,
            engine: EngineKind::Standard,
            nx: 96,
            block: 8,
            steps: 20,
            ..Default::default()
        };
        let one = run_standard(&SolverConfig { ranks: 1, ..c.clone() }).map_err(|e| e.to_string())?;
        let four = run_standard(&SolverConfig { ranks: 4, ..c }).map_err(|e| e.to_string())?;
        worst = worst.max(one.field.max_rel_diff(&four.field));
    }
    ensure(worst <= 1e-12, format!("max difference {worst:.2e}"))
}

fn c5_heat_order() -> Outcome {
    let base = SolverConfig {
        engine: EngineKind::Standard,
        ..Default::default()
    };
    let r = verify_heat(&[32, 64, 128], &base, 14).map_err(|e| e.to_string())?;
    let orders: Vec<String> = r.rows.iter().filter_map(|x| x.order).map(|o| format!("{o:.3}")).collect();
    ensure(r.passed, format!("orders [{}], minimum {HEAT_MIN_ORDER}", orders.join(", ")))
}

fn c6_euler() -> Outcome {
    let base = SolverConfig {
        engine: EngineKind::Standard,
        ..Default::default()
    };
    let r = verify_euler(&[64, 128, 256], &base, 0.5).map_err(|e| e.to_string())?;
    let errs: Vec<String> = r.rows.iter().map(|x| format!("{:.3e}", x.linf)).collect();
    let drift = euler_conservation(64, 100, &base).map_err(|e| e.to_string())?;
    let max_drift = drift.iter().cloned().fold(0.0, f64::max);
    ensure(
        r.passed && max_drift <= CONSERVATION_TOL,
        format!("density errors [{}], conservation drift {max_drift:.2e}", errs.join(", ")),
    )
}

fn c7_message_ratio() -> Outcome {
    let c = heat(96, 16, 2, 500);
    let sw = run_swept(&c).map_err(|e| e.to_string())?;
    let st = run_standard_steps(&c, sw.record.actual_steps).map_err(|e| e.to_string())?;
    let plan = c.plan().map_err(|e| e.to_string())?;
    let m_levels = plan.actual_steps() * plan.substeps;
    let formula = 2.0 * m_levels as f64 / plan.communications() as f64;
    let measured = st.record.messages_per_rank[0] as f64 / sw.record.messages_per_rank[0] as f64;
    let exact = st.record.messages_per_rank.iter().zip(&sw.record.messages_per_rank).all(|(a, b)| {
        (*a as usize) * plan.communications() == 2 * m_levels * (*b as usize)
    });
    ensure(
        exact && measured >= 14.0,
        format!("measured {measured:.4}, 2M/(m+1) = {formula:.4}"),
    )
}

fn c8_step_rounding() -> Outcome {
    let mut got = Vec::new();
    for (req, want) in [(500, 497), (10, 7)] {
        let plan = heat(64, 16, 1, req).plan().map_err(|e| e.to_string())?;
        let sw = run_swept(&heat(64, 16, 1, req)).map_err(|e| e.to_string())?;
        if plan.actual_steps() != want || sw.record.actual_steps != want {
            return Err(format!("{req} steps ran as {}", sw.record.actual_steps));
        }
        got.push(format!("{req} -> {want}"));
    }
    Ok(got.join(", "))
}

fn c9_virtual_model() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, latency, bandwidth) in [("latency", 1e-3, 1e9), ("balanced", 1e-6, 1e9), ("bandwidth", 0.0, 1e7)] {
        let mut c = heat(96, 16, 2, 500);
        c.transport = TransportConfig {
            mode: Mode::Virtual,
            latency,
            bandwidth,
            ..Default::default()
        };
        let sw = run_swept(&c).map_err(|e| e.to_string())?;
        let st = run_standard_steps(&c, sw.record.actual_steps).map_err(|e| e.to_string())?;
        let measured = st.record.modeled_seconds / sw.record.modeled_seconds;
        let tau = per_level_compute(&c).map_err(|e| e.to_string())?;
        let profile = comm_profile(&c).map_err(|e| e.to_string())?;
        let predicted = predict_speedup(&profile, &c.transport.link(), tau);
        let rel = (measured / predicted - 1.0).abs();
        ok &= rel <= 0.1;
        if name == "latency" {
            let k = c.geometry().map_err(|e| e.to_string())?.levels();
            ok &= k == 7 && latency / tau >= 100.0 && measured >= 5.0;
        }
        parts.push(format!("{name} {measured:.3} vs {predicted:.3}"));
    }
    ensure(ok, parts.join(", "))
}

fn c10_wall_mode() -> Outcome {
    let mut c = heat(96, 16, 2, 200);
    c.transport = TransportConfig {
        mode: Mode::Wall,
        latency: 1e-3,
        ..Default::default()
    };
    let sw = run_swept(&c).map_err(|e| e.to_string())?;
    let st = run_standard_steps(&c, sw.record.actual_steps).map_err(|e| e.to_string())?;
    let per_event = |r: &sweptgrid::RunRecord| r.bytes_sent as f64 / r.communication_events as f64;
    let (bs, bw) = (per_event(&st.record), per_event(&sw.record));
    ensure(
        sw.record.wall_seconds < st.record.wall_seconds && bw > bs,
        format!(
            "wall {:.3} s swept vs {:.3} s standard, {bw:.0} vs {bs:.0} bytes per event",
            sw.record.wall_seconds, st.record.wall_seconds
        ),
    )
}

fn c11_snapshot() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("run.swpt");
    let copy = dir.path().join("copy.swpt");
    let mut c = heat(64, 16, 2, 20);
    c.snapshot = Some(path.clone());
    let out = run_swept(&c).map_err(|e| e.to_string())?;
    let (header, frames) = read_snapshot(&path).map_err(|e| e.to_string())?;
    let mut w = SnapshotWriter::create(&copy, header).map_err(|e| e.to_string())?;
    for f in &frames {
        w.append(f.level, &f.field).map_err(|e| e.to_string())?;
    }
    w.finish().map_err(|e| e.to_string())?;
    let same = std::fs::read(&path).map_err(|e| e.to_string())? == std::fs::read(&copy).map_err(|e| e.to_string())?;
    ensure(
        same && frames.len() == out.record.flat_level + 1,
        format!("{} frames for flat level {}, rewrite identical: {same}", frames.len(), out.record.flat_level),
    )
}

fn c12_default_sweep() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SweepSpec {
        out: dir.path().join("sweep"),
        ..Default::default()
    };
    let start = Instant::now();
    let summary = run_sweep(&spec, |_| {}).map_err(|e| e.to_string())?;
    let maps = render_csv(&spec.csv_path(), "speedup", &spec.out).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    let rows = read_rows(&spec.csv_path()).map_err(|e| e.to_string())?;
    let valid = rows.len() == spec.cells().len()
        && rows
            .iter()
            .all(|r| r.error.is_empty() && r.speedup.is_some_and(|s| s.is_finite() && s > 0.0));
    let mut marked = !maps.is_empty();
    for p in &maps {
        let svg = std::fs::read_to_string(p).map_err(|e| e.to_string())?;
        marked &= svg.contains(r#"class="best""#) && svg.contains(r#"class="worst""#);
    }
    ensure(
        valid && marked && summary.failed == 0 && t < Duration::from_secs(1800),
        format!(
            "{} rows, {} heatmaps, {:.1} min",
            rows.len(),
            maps.len(),
            t.as_secs_f64() / 60.0
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("geometry oracle", c1_geometry_oracle),
        ("levels per pyramid", c2_levels),
        ("swept equals standard", c3_swept_matches_standard),
        ("rank invariance", c4_rank_invariance),
        ("heat convergence", c5_heat_order),
        ("euler convergence and conservation", c6_euler),
        ("message ratio", c7_message_ratio),
        ("step rounding", c8_step_rounding),
        ("virtual cost model", c9_virtual_model),
        ("wall mode latency", c10_wall_mode),
        ("snapshot round trip", c11_snapshot),
        ("default sweep", c12_default_sweep),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match res {
            Ok(d) => println!("criterion {n} ({name}): PASS ({d})"),
            Err(d) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL ({d})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
