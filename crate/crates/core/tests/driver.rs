mod common;

use common::*;
use fastbcd::activeset::EstimateStrategy;
use fastbcd::driver::{
    build_block_plan, outer_iteration, solve, solve_reduced_smooth, solve_to_target, BlockBudget, OrderingMeasure,
    SolverConfig,
};
use fastbcd::linalg::{dist_sq, DenseMatrix};
use fastbcd::problem::{generate_instance, gradient_q, objective, GeneratorKind};
use fastbcd::rng::Stream;
use fastbcd::{Error, Instance, SolverState, Status};
use nalgebra::DVector;

fn p1(seed: u64) -> Instance {
    generate_instance(GeneratorKind::P1, 128, 32, 0.1, 0.5, 1e-3, seed).unwrap()
}

#[test]
fn block_plan_cuts_selection_into_pairs_then_a_single() {
    let mut rng = Stream::new(41);
    let inst = gaussian_instance(&mut rng, 6, 10, 0.2);
    let x = random_point(&mut rng, 10, 1.0, 0.0);
    let g = gradient_q(&inst, &inst.residual(&x).unwrap()).unwrap();
    let cfg = SolverConfig {
        budget: BlockBudget::Fixed(5),
        ..SolverConfig::fast2()
    };
    let plan = build_block_plan(&inst, &x, &g, &[0, 2, 3, 5, 7, 8, 9], &cfg).unwrap();
    let sizes: Vec<usize> = plan.blocks.iter().map(Vec::len).collect();
    assert_eq!(sizes, vec![2, 2, 1]);
    assert_eq!(plan.ordered.len(), 7);
    assert_eq!(plan.selected, plan.ordered[..5].to_vec());
    let flat: Vec<usize> = plan.blocks.concat();
    assert_eq!(flat, plan.selected);
    let tau = inst.tau();
    let score = |i: usize| {
        fastbcd::blocksolve::phi(x[i], g[i], inst.col_norms_sq()[i], tau)
            .unwrap()
            .abs()
    };
    for w in plan.ordered.windows(2) {
        assert!(score(w[0]) >= score(w[1]));
    }
}

#[test]
fn outer_iterations_chain_their_decreases() {
    for seed in 0..5 {
        let inst = p1(seed);
        for cfg in [SolverConfig::fast1(), SolverConfig::fast2()] {
            let mut state = SolverState::zeros(&inst);
            for _ in 0..20 {
                let x_prev = state.x().to_vec();
                let (next, step) = outer_iteration(&inst, state, &cfg).unwrap();
                let slack = 1e-12 * (1.0 + step.f_start.abs());
                assert!(step.f_zeroed <= step.f_start + slack);
                assert!(step.f_next <= step.f_zeroed + slack);
                assert!((objective(&inst, next.x()).unwrap() - step.f_next).abs() <= 1e-10);
                assert_eq!(step.record.f, step.f_start);
                assert!(dist_sq(next.x(), &x_prev).is_finite());
                state = next;
            }
        }
    }
}

#[test]
fn block_sizes_agree_on_the_optimum() {
    for seed in 0..5 {
        let inst = p1(seed);
        let tight = |cfg: SolverConfig| SolverConfig {
            tol: 1e-10,
            max_outer: 5000,
            ..cfg
        };
        let (s1, _) = solve(&inst, &tight(SolverConfig::fast1())).unwrap();
        let (s2, _) = solve(&inst, &tight(SolverConfig::fast2())).unwrap();
        assert_eq!(s1.status, Status::Optimal);
        assert_eq!(s2.status, Status::Optimal);
        assert!(rel_diff(s1.f, s2.f) <= 1e-8, "{} vs {}", s1.f, s2.f);
    }
}

#[test]
fn runs_are_monotone_and_deterministic() {
    for kind in [GeneratorKind::P1, GeneratorKind::P2] {
        let inst = generate_instance(kind, 128, 32, 0.1, 0.5, 1e-3, 7).unwrap();
        let variants = [
            SolverConfig::fast1(),
            SolverConfig::fast2(),
            SolverConfig {
                adaptive_eps: true,
                ..SolverConfig::fast1()
            },
            SolverConfig {
                enhanced: true,
                ..SolverConfig::fast2()
            },
            SolverConfig {
                measure: OrderingMeasure::FirstOrder,
                ..SolverConfig::fast1()
            },
        ];
        for cfg in variants {
            let (a, ta) = solve(&inst, &cfg).unwrap();
            let (b, tb) = solve(&inst, &cfg).unwrap();
            assert_eq!(a.status, Status::Optimal);
            assert!(ta.is_monotone(1e-12));
            assert_eq!(a.x, b.x);
            assert_eq!(a.f.to_bits(), b.f.to_bits());
            assert_eq!(ta.f_values(), tb.f_values());
        }
    }
}

#[test]
fn trace_records_the_adaptive_epsilon() {
    let inst = p1(3);
    let cfg = SolverConfig {
        adaptive_eps: true,
        ..SolverConfig::fast1()
    };
    let (_, trace) = solve(&inst, &cfg).unwrap();
    let bar = cfg.estimate.eps_bar;
    for r in &trace.records {
        let eps = r.epsilon.unwrap();
        let h = (eps / bar).log2().round();
        assert!(h <= 0.0 && (bar * 2f64.powf(h) - eps).abs() <= 1e-15 * bar);
    }
}

#[test]
fn target_runs_handle_trivial_and_unreachable_targets() {
    let inst = p1(1);
    let f0 = objective(&inst, &vec![0.0; inst.n()]).unwrap();
    let (sol, trace) = solve_to_target(&inst, &SolverConfig::fast1(), f0).unwrap();
    assert_eq!(sol.status, Status::TargetReached);
    assert_eq!(sol.iterations, 0);
    assert_eq!(trace.len(), 1);

    let cfg = SolverConfig {
        max_outer: 200,
        ..SolverConfig::fast1()
    };
    let (sol, _) = solve_to_target(&inst, &cfg, -1.0).unwrap();
    assert_eq!(sol.status, Status::MaxIter);
    assert!(sol.iterations <= 200);

    assert!(solve_to_target(&inst, &cfg, f64::NAN).is_err());
}

#[test]
fn solver_rejects_bad_configurations() {
    let inst = p1(0);
    let mut cfg = SolverConfig::fast1();
    cfg.block_size = 3;
    assert!(matches!(
        solve(&inst, &cfg).unwrap_err().error,
        Error::InvalidParameter(_)
    ));
    let mut cfg = SolverConfig::fast1();
    cfg.estimate.strategy = EstimateStrategy::Byrd;
    assert!(matches!(
        solve(&inst, &cfg).unwrap_err().error,
        Error::InvalidParameter(_)
    ));
}

#[test]
fn reduced_solve_with_orthonormal_columns_is_explicit() {
    let a = DenseMatrix::identity(4);
    let inst = Instance::new(a, vec![3.0, -2.0, 0.5, 1.0], 0.25).unwrap();
    let out = solve_reduced_smooth(&inst, &[0, 1, 3], &[1.0, -1.0, 1.0], 1e-14, 100).unwrap();
    assert!(out.converged);
    let expected = [2.75, -1.75, 0.0, 0.75];
    for (v, e) in out.x.iter().zip(expected) {
        assert!((v - e).abs() <= 1e-12);
    }
}

#[test]
fn reduced_solve_matches_dense_linear_solve() {
    let mut rng = Stream::new(42);
    let inst = gaussian_instance(&mut rng, 20, 30, 0.2);
    let working = [1, 4, 9, 17, 25];
    let signs = [1.0, -1.0, -1.0, 1.0, 1.0];
    let out = solve_reduced_smooth(&inst, &working, &signs, 1e-14, 200).unwrap();
    let a = to_nalgebra(inst.a());
    let aw = a.select_columns(working.iter());
    let b = DVector::from_column_slice(inst.b());
    let rhs = aw.transpose() * &b - DVector::from_column_slice(&signs) * inst.tau();
    let z = (aw.transpose() * &aw).lu().solve(&rhs).unwrap();
    for (k, &i) in working.iter().enumerate() {
        assert!((out.x[i] - z[k]).abs() <= 1e-9 * (1.0 + z[k].abs()));
    }
    assert!(out.x.iter().enumerate().all(|(i, v)| working.contains(&i) || *v == 0.0));
}

#[test]
fn sign_inconsistent_reduced_solution_is_not_adopted() {
    // With one column and a positive sign guess, z = aᵀb − τ < 0 here.
    let a = DenseMatrix::from_col_major(2, 1, vec![1.0, 0.0]).unwrap();
    let inst = Instance::new(a, vec![0.1, 1.0], 0.5).unwrap();
    let out = solve_reduced_smooth(&inst, &[0], &[1.0], 1e-14, 10).unwrap();
    assert!(out.x[0] < 0.0);
    // The enhanced solver still ends on the plain solver's optimum.
    for seed in 0..5 {
        let inst = generate_instance(GeneratorKind::P2, 128, 32, 0.1, 0.5, 1e-3, seed).unwrap();
        let (plain, _) = solve(&inst, &SolverConfig::fast1()).unwrap();
        let cfg = SolverConfig {
            enhanced: true,
            ..SolverConfig::fast1()
        };
        let (enh, trace) = solve(&inst, &cfg).unwrap();
        assert!(trace.is_monotone(1e-12));
        assert!(rel_diff(plain.f, enh.f) <= 1e-8);
    }
}
