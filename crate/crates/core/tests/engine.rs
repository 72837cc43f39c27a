use sweptgrid::engine::{
    comm_profile, per_level_compute, run_standard, run_standard_steps, run_swept, EngineKind, Mode,
    ProblemKind, SolverConfig,
};
use sweptgrid::physics::heat::{heat_update, HeatParams};
use sweptgrid::geometry::Region;

fn config(problem: ProblemKind, nx: usize, b: usize, share: f64, ranks: usize, steps: usize) -> SolverConfig {
    SolverConfig {
        problem,
        nx,
        block: b,
        share,
        ranks,
        steps,
        ..Default::default()
    }
}

#[test]
fn swept_matches_standard_heat_and_euler() {
    for (problem, nx, b, share, ranks, steps) in [
        (ProblemKind::Heat, 64, 16, 0.5, 1, 30),
        (ProblemKind::Heat, 96, 8, 0.0, 2, 20),
        (ProblemKind::Heat, 96, 16, 1.0, 3, 40),
        (ProblemKind::Euler, 48, 8, 0.5, 2, 6),
        (ProblemKind::Euler, 96, 16, 0.5, 2, 12),
        (ProblemKind::Euler, 64, 16, 0.5, 1, 4),
    ] {
        let c = config(problem, nx, b, share, ranks, steps);
        let sw = run_swept(&c).unwrap();
        let st = run_standard_steps(&c, sw.record.actual_steps).unwrap();
        assert_eq!(sw.field.level, st.field.level);
        let d = sw.field.max_rel_diff(&st.field);
        assert!(d <= 1e-10, "{problem:?} nx={nx} b={b} ranks={ranks}: diff {d}");
    }
}

#[test]
fn single_rank_standard_matches_plain_loop() {
    let c = config(ProblemKind::Heat, 64, 8, 0.5, 1, 10);
    let out = run_standard(&c).unwrap();
    assert_eq!(out.record.actual_steps, 10);
    let p = HeatParams::unit_square(64, 64, 1.0, 0.2);
    let mut f = sweptgrid::physics::heat::heat_field(64, 64, 0.0, 1.0);
    let all = Region::new(0, 64, 0, 64, 1);
    for _ in 0..10 {
        f.data = heat_update(&f, &all, &p).unwrap();
    }
    assert_eq!(out.field.data, f.data);
}

#[test]
fn message_counts_follow_schedule() {
    let c = config(ProblemKind::Heat, 64, 16, 0.5, 2, 50);
    let sw = run_swept(&c).unwrap();
    let plan = c.plan().unwrap();
    let st = run_standard_steps(&c, sw.record.actual_steps).unwrap();
    for m in &sw.record.messages_per_rank {
        assert_eq!(*m as usize, plan.octahedra + 1);
    }
    for m in &st.record.messages_per_rank {
        assert_eq!(*m as usize, 2 * sw.record.actual_steps);
    }
    let profile = comm_profile(&c).unwrap();
    assert_eq!(sw.record.max_message_bytes, profile.shift_bytes);
    assert_eq!(st.record.max_message_bytes, profile.halo_bytes);
    let tau = per_level_compute(&c).unwrap();
    let predicted = sweptgrid::transport::predict_speedup(&profile, &c.transport.link(), tau);
    let measured = st.record.modeled_seconds / sw.record.modeled_seconds;
    assert!((measured / predicted - 1.0).abs() < 0.1, "{measured} vs {predicted}");
    let _ = (EngineKind::Swept, Mode::Virtual);
}
