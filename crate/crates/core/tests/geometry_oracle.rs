use sweptgrid::geometry::{build_schedule, max_levels, phase_region, BlockGeometry, Phase, StencilShape};
use sweptgrid::oracle::{check_plan, check_tiling, coverage_oracle, Domain, OracleStage, PointSet};

fn cases() -> Vec<(usize, usize, usize)> {
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

#[test]
fn levels_per_pyramid() {
    for (b, n, _) in cases() {
        let k = max_levels(b, n).unwrap();
        assert_eq!(k, b / (2 * n) - 1);
        let top = phase_region(Phase::UpPyramid, b, n, k).unwrap();
        assert_eq!((top.width(), top.height()), (2 * n, 2 * n), "b={b} n={n}");
        let last = phase_region(Phase::DownPyramid, b, n, k).unwrap();
        assert_eq!(last.width(), b - 2 * n);
        let oct = phase_region(Phase::OctahedronDown, b, n, k).unwrap();
        assert_eq!(oct.width(), b - 2 * n);
    }
    assert_eq!(max_levels(32, 1).unwrap(), 15);
    assert_eq!(max_levels(8, 2).unwrap(), 1);
    assert_eq!(max_levels(12, 2).unwrap(), 2);
    assert!(max_levels(10, 2).is_err());
    assert!(max_levels(4, 2).is_err());
}

#[test]
fn phases_tile_every_level() {
    for (b, n, _) in cases() {
        check_tiling(b, n).unwrap_or_else(|e| panic!("b={b} n={n}: {e:?}"));
    }
}

#[test]
fn up_pyramid_matches_block_erosion() {
    let st = StencilShape::single_stage(1).unwrap();
    let stage = OracleStage {
        domain: Domain::Block,
        offset: 0,
        max_level: 3,
    };
    let (sets, _) = coverage_oracle(8, &st, 3, &[stage]);
    for l in 1..=3 {
        let r = phase_region(Phase::UpPyramid, 8, 1, l).unwrap();
        let mut want = PointSet::empty(16, 16);
        for (bx, by) in [(0, 0), (8, 0), (0, 8), (8, 8)] {
            for (x, y) in r.translate(bx, by).points_mod(16, 16) {
                want.insert(x, y);
            }
        }
        assert_eq!(sets[l], want, "level {l}");
    }
    let r = phase_region(Phase::UpPyramid, 8, 1, 1).unwrap();
    assert_eq!((r.x0, r.x1, r.y0, r.y1), (1, 7, 1, 7));
    let r = phase_region(Phase::OctahedronDown, 8, 1, 1).unwrap();
    assert_eq!((r.x0, r.x1, r.y0, r.y1), (3, 5, 3, 5));
}

#[test]
fn schedules_match_oracle_and_stay_flat() {
    for (b, n, s) in cases() {
        let st = stencil(n, s);
        let geom = BlockGeometry::new(b, n).unwrap();
        let k = geom.levels();
        // Up to three octahedra: both shift signs and a repeat of each.
        for steps in [k.div_ceil(s), (3 * k).div_ceil(s), (4 * k).div_ceil(s)] {
            let plan = build_schedule(steps, geom, &st).unwrap();
            check_plan(&plan, &st)
                .unwrap_or_else(|e| panic!("b={b} n={n} S={s} steps={steps}: {e:?}"));
        }
    }
}

#[test]
fn broken_plan_is_caught() {
    let st = StencilShape::single_stage(1).unwrap();
    let geom = BlockGeometry::new(8, 1).unwrap();
    let mut plan = build_schedule(9, geom, &st).unwrap();
    let i = plan
        .entries
        .iter()
        .position(|e| e.phase() == Phase::XBridge)
        .unwrap();
    plan.entries.swap(i - 1, i);
    assert!(check_plan(&plan, &st).is_err());

    let mut plan = build_schedule(9, geom, &st).unwrap();
    let j = plan
        .entries
        .iter()
        .rposition(|e| e.phase() == Phase::DownPyramid)
        .unwrap();
    plan.entries.remove(j);
    assert!(check_plan(&plan, &st).is_err());
}
