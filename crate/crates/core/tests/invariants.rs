use proptest::prelude::*;

use sweptgrid::engine::{run_standard, run_standard_steps, run_swept, EngineKind, ProblemKind, SolverConfig};
use sweptgrid::geometry::{allocate_blocks, build_schedule, BlockGeometry, StencilShape};
use sweptgrid::oracle::check_plan;
use sweptgrid::snapshot::read_snapshot;

fn config(problem: ProblemKind, nx: usize, b: usize, ranks: usize, steps: usize) -> SolverConfig {
    SolverConfig {
        problem,
        nx,
        block: b,
        ranks,
        steps,
        ..Default::default()
    }
}

#[test]
fn standard_is_rank_invariant() {
    let one = config(ProblemKind::Euler, 96, 8, 1, 20);
    let four = SolverConfig { ranks: 4, ..one.clone() };
    let a = run_standard(&one).unwrap();
    let b = run_standard(&four).unwrap();
    let d = a.field.max_rel_diff(&b.field);
    assert!(d <= 1e-12, "diff {d}");
    assert_eq!(b.record.messages_per_rank, vec![2 * 2 * 20; 4]);
}

#[test]
fn swept_is_rank_invariant() {
    let one = config(ProblemKind::Heat, 96, 8, 1, 30);
    let three = SolverConfig { ranks: 3, ..one.clone() };
    let a = run_swept(&one).unwrap();
    let b = run_swept(&three).unwrap();
    assert!(a.field.max_rel_diff(&b.field) <= 1e-12);
}

#[test]
fn share_does_not_change_the_answer() {
    let base = config(ProblemKind::Euler, 64, 16, 2, 8);
    let reference = run_swept(&SolverConfig { share: 0.0, ..base.clone() }).unwrap();
    for share in [0.3, 0.5, 1.0] {
        let out = run_swept(&SolverConfig { share, ..base.clone() }).unwrap();
        assert!(out.field.max_rel_diff(&reference.field) <= 1e-12, "share {share}");
    }
}

#[test]
fn snapshots_are_complete_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name);
    let mut c = config(ProblemKind::Heat, 64, 16, 2, 30);
    c.snapshot = Some(path("a.swpt"));
    let a = run_swept(&c).unwrap();
    c.snapshot = Some(path("b.swpt"));
    let b = run_swept(&c).unwrap();

    let flat = a.record.flat_level;
    assert_eq!(a.record.snapshot_frames, flat + 1);
    let (_, frames) = read_snapshot(&path("a.swpt")).unwrap();
    assert_eq!(frames.len(), flat + 1);
    for (i, f) in frames.iter().enumerate() {
        assert_eq!(f.level, i as u64);
    }
    assert_eq!(frames.last().unwrap().field.data, a.field.data);

    assert_eq!(std::fs::read(path("a.swpt")).unwrap(), std::fs::read(path("b.swpt")).unwrap());
    assert_eq!(a.record.messages_per_rank, b.record.messages_per_rank);
    assert_eq!(a.record.modeled_seconds, b.record.modeled_seconds);

    c.snapshot = Some(path("s.swpt"));
    c.engine = EngineKind::Standard;
    run_standard_steps(&c, a.record.actual_steps).unwrap();
    let (_, std_frames) = read_snapshot(&path("s.swpt")).unwrap();
    assert_eq!(std_frames.len(), frames.len());
    for (x, y) in frames.iter().zip(&std_frames) {
        assert_eq!(x.level, y.level);
        assert!(x.field.max_rel_diff(&y.field) <= 1e-12);
    }
}

#[test]
fn euler_snapshots_hold_full_steps_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(ProblemKind::Euler, 48, 8, 2, 6);
    c.snapshot = Some(dir.path().join("e.swpt"));
    let out = run_swept(&c).unwrap();
    let (h, frames) = read_snapshot(c.snapshot.as_ref().unwrap()).unwrap();
    assert_eq!(h.nvars, 4);
    assert_eq!(frames.len(), out.record.actual_steps + 1);
    assert!(frames.iter().all(|f| f.level % 2 == 0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_schedules_are_valid(
        bi in 0usize..3,
        n in 1usize..3,
        rk2 in any::<bool>(),
        steps in 1usize..40,
    ) {
        let b = [8, 12, 16][bi];
        prop_assume!(b % (2 * n) == 0);
        let st = if rk2 { StencilShape::rk2(n).unwrap() } else { StencilShape::single_stage(n).unwrap() };
        let geom = BlockGeometry::new(b, n).unwrap();
        let Ok(plan) = build_schedule(steps, geom, &st) else {
            return Ok(());
        };
        let k = geom.levels();
        prop_assert_eq!(plan.flat_level, k * (plan.octahedra + 1));
        prop_assert_eq!(plan.communications(), plan.octahedra + 1);
        let wanted = (steps * st.substeps()) as i64;
        prop_assert!((plan.flat_level as i64 - wanted).abs() <= (k as i64 + 1) / 2 || plan.octahedra == 0);
        prop_assert!(check_plan(&plan, &st).is_ok());
    }

    #[test]
    fn allocation_tracks_share(bx in 1usize..40, by in 1usize..5, share in 0.0f64..=1.0) {
        let a = allocate_blocks(bx, by, share);
        prop_assert_eq!(a.pool_a_blocks + a.pool_b_blocks, a.total_blocks);
        prop_assert_eq!(a.total_blocks, bx * by);
        prop_assert!((a.achieved_share() - share).abs() * bx as f64 <= 1.0 + 1e-9);
    }
}
