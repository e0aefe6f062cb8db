use fastflow::bandit::{optimal_arm, simulate_ucb, BanditRegistry, BernoulliBandit};
use fastflow::fields::{
    make_analytic_field, parse_field_id, AnalyticField, CountingField, FieldKind, SmoothnessBounds,
    VelocityField,
};
use fastflow::solver::{
    fastflow_generate, fixed_skip_generate, full_trajectory, lms_generate, lms_jump,
    local_truncation_error_coeff, reuse_velocity_generate, skip_update, ArmSchedule, DeltaTSemantics,
    FastFlowConfig, JumpMode, TimeGrid,
};
use proptest::prelude::*;

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// A fixed pool of fixtures covering every kind, dimensions 1 to 3.
fn analytic_field() -> impl Strategy<Value = (AnalyticField, SmoothnessBounds)> {
    let mut pool = Vec::new();
    for d in 1..=3usize {
        let s = d as f64;
        let specs: [(FieldKind, Vec<f64>); 10] = [
            (FieldKind::Constant, vec![1.5 - s]),
            (FieldKind::Constant, vec![0.0]),
            (FieldKind::LinearTime, vec![s, -2.0]),
            (FieldKind::LinearTime, vec![-1.0, 0.5 * s]),
            (FieldKind::SinusoidalTime, vec![1.0, std::f64::consts::PI]),
            (FieldKind::SinusoidalTime, vec![-0.7 * s, 5.0, 0.3]),
            (FieldKind::ThreePhase, vec![1.0, 1.0, 0.02, 0.1]),
            (FieldKind::ThreePhase, vec![-2.0, 0.5, 0.1, 0.07]),
            (FieldKind::ContractingAffine, vec![0.5 * s, 1.0, 3.0]),
            (FieldKind::ContractingAffine, vec![2.5, -1.5, 7.0]),
        ];
        for (kind, params) in specs {
            pool.push(make_analytic_field(kind, &params, d).unwrap());
        }
    }
    prop::sample::select(pool)
}

fn state(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn lms_closed_form_matches_two_stage_update(
        x in -1.0f64..1.0,
        vk in -1.0f64..1.0,
        vkm1 in -1.0f64..1.0,
        steps in 5usize..200,
        m in 0usize..20,
    ) {
        let h = 1.0 / steps as f64;
        // Two-stage form: stride with v_k, then one step with the extrapolated velocity.
        let x_jump = x + m as f64 * h * vk;
        let v_hat = vk + m as f64 * h * (vk - vkm1) / h;
        let two_stage = x_jump + h * v_hat;
        let closed = lms_jump(&[x], &[vk], &[vkm1], h, m)[0];
        prop_assert!((closed - two_stage).abs() <= 1e-12);

        let k = 1.0;
        let times = [(k - 1.0) * h, k * h, (k + m as f64) * h, (k + m as f64 + 1.0) * h];
        let (_, _, _, engine) =
            skip_update(&[x], &[vk], &[vkm1], times, JumpMode::PlainEuler, DeltaTSemantics::AnchorOffset)
                .unwrap();
        prop_assert!((engine[0] - closed).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn analytic_fields_are_lipschitz(
        (f, b) in analytic_field(),
        seed in prop::collection::vec(-5.0f64..5.0, 6),
        t in 0.0f64..=1.0,
    ) {
        let d = f.dim();
        let (x, y) = (&seed[..d], &seed[3..3 + d]);
        let lhs = norm(&diff(&f.eval(x, t), &f.eval(y, t)));
        let rhs = b.lipschitz_x * norm(&diff(x, y));
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-14, "{lhs} > {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn curvature_never_exceeds_bound(
        (f, b) in analytic_field(),
        x in state(3),
        t in 1e-3f64..(1.0 - 1e-3),
    ) {
        let h = 1e-3;
        let x = &x[..f.dim()];
        let (lo, mid, hi) = (f.eval(x, t - h), f.eval(x, t), f.eval(x, t + h));
        let second: Vec<f64> = (0..f.dim()).map(|i| (hi[i] - 2.0 * mid[i] + lo[i]) / (h * h)).collect();
        prop_assert!(norm(&second) <= b.curvature_m + 1e-2 * b.curvature_m + 1e-6);
    }

    #[test]
    fn zero_skip_is_bitwise_full_euler(
        (f, _) in analytic_field(),
        x0 in state(3),
        steps in 1usize..80,
    ) {
        let x0 = &x0[..f.dim()];
        let grid = TimeGrid::uniform(steps).unwrap();
        let config = FastFlowConfig { arms: ArmSchedule::Uniform(vec![0]), ..FastFlowConfig::default() };
        let full = full_trajectory(&f, &grid, x0).unwrap();
        let ff = fastflow_generate(&f, &grid, x0, &config, &mut BanditRegistry::new()).unwrap();
        prop_assert_eq!(&ff.states, &full.states);
        prop_assert_eq!(ff.eval_count, steps);
    }

    #[test]
    fn constant_field_is_exact_for_every_solver(
        c in prop::collection::vec(-4.0f64..4.0, 2),
        x0 in state(2),
        steps in 3usize..60,
        j in 1usize..8,
        delta in 0.0f64..0.5,
        m in 0usize..4,
    ) {
        let (f, _) = make_analytic_field(FieldKind::Constant, &c, 2).unwrap();
        let grid = TimeGrid::uniform(steps).unwrap();
        let expected = [x0[0] + c[0], x0[1] + c[1]];
        let config = FastFlowConfig { mu: 0.01, ..FastFlowConfig::for_horizon(steps, 0.01) };
        let runs = [
            full_trajectory(&f, &grid, &x0).unwrap(),
            fastflow_generate(&f, &grid, &x0, &config, &mut BanditRegistry::new()).unwrap(),
            fixed_skip_generate(&f, &grid, &x0, j).unwrap(),
            reuse_velocity_generate(&f, &grid, &x0, delta).unwrap(),
            lms_generate(&f, &grid, &x0, m).unwrap(),
        ];
        for r in &runs {
            let end = r.final_state();
            prop_assert!((end[0] - expected[0]).abs() <= 1e-12 && (end[1] - expected[1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn affine_time_extrapolation_is_exact(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        steps in 4usize..60,
        gens in 1usize..6,
        literal in any::<bool>(),
    ) {
        let (f, _) = make_analytic_field(FieldKind::LinearTime, &[a, b], 1).unwrap();
        let grid = TimeGrid::uniform(steps).unwrap();
        let config = FastFlowConfig {
            delta_t: if literal { DeltaTSemantics::Literal } else { DeltaTSemantics::AnchorOffset },
            ..FastFlowConfig::for_horizon(steps, 1e-3)
        };
        let mut reg = BanditRegistry::new();
        for _ in 0..gens {
            let rec = fastflow_generate(&f, &grid, &[0.0], &config, &mut reg).unwrap();
            for e in &rec.extrapolations {
                let truth = a + b * e.target_time;
                prop_assert!((rec.velocities[e.step][0] - truth).abs() <= 1e-10);
            }
            if !literal {
                prop_assert!(rec.decisions.iter().all(|d| d.loss <= 1e-20));
            }
        }
    }

    #[test]
    fn eval_accounting_matches_counter(
        (f, _) in analytic_field(),
        steps in 3usize..60,
        j in 1usize..6,
        delta in 0.0f64..0.2,
        gens in 1usize..4,
    ) {
        let x0 = vec![0.5; f.dim()];
        let grid = TimeGrid::uniform(steps).unwrap();
        let check = |run: &dyn Fn(&CountingField<&AnalyticField>) -> fastflow::TrajectoryRecord| {
            let counted = CountingField::new(&f);
            let rec = run(&counted);
            rec.check_invariants().unwrap();
            (rec.eval_count as u64, counted.eval_count())
        };
        let (a, b) = check(&|c| full_trajectory(c, &grid, &x0).unwrap());
        prop_assert_eq!(a, b);
        let (a, b) = check(&|c| fixed_skip_generate(c, &grid, &x0, j).unwrap());
        prop_assert_eq!(a, b);
        let (a, b) = check(&|c| reuse_velocity_generate(c, &grid, &x0, delta).unwrap());
        prop_assert_eq!(a, b);
        let config = FastFlowConfig::for_horizon(steps, 1e-3);
        let mut reg = BanditRegistry::new();
        for _ in 0..gens {
            let (a, b) = check(&|c| fastflow_generate(c, &grid, &x0, &config, &mut reg.clone()).unwrap());
            prop_assert_eq!(a, b);
            fastflow_generate(&f, &grid, &x0, &config, &mut reg).unwrap();
        }
    }

    #[test]
    fn registry_replays_from_log(gens in 1usize..30, omega in 1.0f64..8.0, steps in 8usize..40) {
        let (f, _) = parse_field_id(&format!("contracting_affine:lambda=0.5,A=1,omega={omega}"), 2).unwrap();
        let grid = TimeGrid::uniform(steps).unwrap();
        let config = FastFlowConfig::for_horizon(steps, 1e-3);
        let mut reg = BanditRegistry::new();
        for g in 0..gens {
            let x0 = [g as f64 * 0.1, -0.3];
            fastflow_generate(&f, &grid, &x0, &config, &mut reg).unwrap();
        }
        let replayed = reg.replay().unwrap();
        for ((_, a), (_, b)) in reg.agents().zip(replayed.agents()) {
            prop_assert_eq!(a.arms(), b.arms());
            prop_assert_eq!(a.counts(), b.counts());
            prop_assert_eq!(a.total(), a.counts().iter().sum::<u64>());
            for (x, y) in a.q().iter().zip(b.q()) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn optimal_arm_is_monotone_in_mu(
        losses in prop::collection::vec(0.0f64..1.0, 2..7),
        mut mus in prop::collection::vec(0.0f64..1.0, 2..12),
    ) {
        let arms: Vec<usize> = (0..losses.len()).map(|i| 2 * i).collect();
        mus.sort_by(f64::total_cmp);
        let picks: Vec<usize> = mus.iter().map(|&mu| optimal_arm(&arms, &losses, mu)).collect();
        prop_assert!(picks.windows(2).all(|w| w[0] <= w[1]), "{picks:?}");
    }

    #[test]
    fn fastflow_records_are_well_formed(
        (f, _) in analytic_field(),
        steps in 2usize..70,
        gens in 1usize..5,
        jump in any::<bool>(),
        literal in any::<bool>(),
    ) {
        let grid = TimeGrid::uniform(steps).unwrap();
        let config = FastFlowConfig {
            jump: if jump { JumpMode::PlainEuler } else { JumpMode::Extrapolated },
            delta_t: if literal { DeltaTSemantics::Literal } else { DeltaTSemantics::AnchorOffset },
            ..FastFlowConfig::for_horizon(steps, 5e-3)
        };
        let x0 = vec![0.0; f.dim()];
        let mut reg = BanditRegistry::new();
        for _ in 0..gens {
            let rec = fastflow_generate(&f, &grid, &x0, &config, &mut reg).unwrap();
            prop_assert_eq!(rec.states.len(), steps + 1);
            prop_assert!(rec.check_invariants().is_ok(), "{:?}", rec.check_invariants());
            prop_assert!(rec.evaluated[0] && rec.evaluated[steps.min(2) - 1]);
            for d in &rec.decisions {
                prop_assert!(d.step + d.arm + 1 < steps);
                prop_assert!(d.reward <= config.mu * d.arm as f64);
            }
        }
    }

    #[test]
    fn grids_are_well_formed(steps in 1usize..500, shift in 0.2f64..5.0) {
        let u = TimeGrid::uniform(steps).unwrap();
        for (k, t) in u.times().iter().enumerate() {
            prop_assert!((t - k as f64 / steps as f64).abs() <= f64::EPSILON);
        }
        let s = TimeGrid::shifted(steps, shift).unwrap();
        prop_assert_eq!(s.t(0), 0.0);
        prop_assert_eq!(s.t(steps), 1.0);
        prop_assert!(s.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn bandit_simulation_is_deterministic(seed in any::<u64>(), gap in 0.05f64..0.9) {
        let inst = BernoulliBandit::from_gaps(0.95, &[gap, 0.0, gap / 2.0]);
        prop_assert_eq!(simulate_ucb(&inst, 2.0, 300, seed).unwrap(), simulate_ucb(&inst, 2.0, 300, seed).unwrap());
    }
}

#[test]
fn truncation_coefficient_never_exceeds_half_m() {
    for m in 1..=20usize {
        for h in [1e-3, 0.02, 0.1, 1.0] {
            let c = local_truncation_error_coeff(m, h);
            assert!(c <= m as f64 / 2.0 * h * h, "m = {m}, h = {h}");
        }
    }
}

#[test]
fn fixed_skip_deviation_grows_with_period() {
    let (f, _) = parse_field_id("sinusoidal_time", 2).unwrap();
    let grid = TimeGrid::uniform(50).unwrap();
    let x0 = [0.3, -0.2];
    let full = full_trajectory(&f, &grid, &x0).unwrap();
    let devs: Vec<f64> = [1, 2, 5, 10]
        .iter()
        .map(|&j| fixed_skip_generate(&f, &grid, &x0, j).unwrap().endpoint_distance(&full))
        .collect();
    assert_eq!(devs[0], 0.0);
    assert!(devs.windows(2).all(|w| w[0] <= w[1]), "{devs:?}");
}

#[test]
fn fastflow_is_deterministic() {
    let (f, _) = parse_field_id("three_phase", 2).unwrap();
    let grid = TimeGrid::uniform(50).unwrap();
    let config = FastFlowConfig::for_horizon(50, 1e-3);
    let run = || {
        let mut reg = BanditRegistry::new();
        (0..20)
            .map(|_| fastflow_generate(&f, &grid, &[0.0, 0.0], &config, &mut reg).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn lms_engine_matches_closed_form_along_a_trajectory() {
    let (f, _) = parse_field_id("contracting_affine:lambda=0.8,A=1.5,omega=4", 1).unwrap();
    let grid = TimeGrid::uniform(40).unwrap();
    for m in 1..5 {
        let rec = lms_generate(&f, &grid, &[0.7], m).unwrap();
        let ev = rec.evaluated_indices();
        let h = 1.0 / 40.0;
        for w in ev.windows(3) {
            let (p, k, next) = (w[0], w[1], w[2]);
            if next != k + m + 1 || p + 1 != k {
                continue;
            }
            let v_k = f.eval(&rec.states[k], grid.t(k));
            let v_p = f.eval(&rec.states[p], grid.t(p));
            let x = lms_jump(&rec.states[k], &v_k, &v_p, h, m);
            assert!((x[0] - rec.states[next][0]).abs() < 1e-12);
        }
    }
}

#[test]
fn reuse_counts_stay_between_anchors_and_full() {
    let (f, _) = parse_field_id("three_phase", 1).unwrap();
    let grid = TimeGrid::uniform(50).unwrap();
    let counts: Vec<usize> = (0..=200)
        .map(|i| i as f64 * 0.005)
        .map(|d| reuse_velocity_generate(&f, &grid, &[0.0], d).unwrap().eval_count)
        .collect();
    assert_eq!(counts[0], 50);
    assert!(counts.iter().all(|c| (2..=50).contains(c)));
    // Anchors move with the threshold, so the count is not monotone.
    assert_eq!(counts[7], 11);
    assert_eq!(counts[8], 24);
}
