mod common;

use common::*;
use fastbcd::problem::{
    generate_instance, gradient_q, hessian_block, objective, read_instance, write_instance, GeneratorKind,
};
use fastbcd::rng::Stream;
use fastbcd::{Error, SolverState};
use proptest::prelude::*;

#[test]
fn objective_matches_row_sum_oracle() {
    let mut rng = Stream::new(11);
    for _ in 0..50 {
        let inst = gaussian_instance(&mut rng, 7, 12, 0.2);
        let x = random_point(&mut rng, 12, 1.0, 0.3);
        let f = objective(&inst, &x).unwrap();
        assert!(rel_diff(f, objective_naive(&inst, &x)) < 1e-12);
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = Stream::new(12);
    let inst = gaussian_instance(&mut rng, 8, 10, 0.3);
    let x = random_point(&mut rng, 10, 1.0, 0.0);
    let g = gradient_q(&inst, &inst.residual(&x).unwrap()).unwrap();
    let smooth = |x: &[f64]| {
        let r = inst.residual(x).unwrap();
        0.5 * r.iter().map(|v| v * v).sum::<f64>()
    };
    let h = 1e-6;
    for i in 0..10 {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fd = (smooth(&xp) - smooth(&xm)) / (2.0 * h);
        assert!(
            (fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()),
            "coord {i}: {fd} vs {}",
            g[i]
        );
    }
    let naive = gradient_naive(&inst, &x);
    for (a, b) in g.iter().zip(&naive) {
        assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
    }
}

#[test]
fn incremental_residual_tracks_dense_recompute() {
    let mut rng = Stream::new(13);
    let inst = gaussian_instance(&mut rng, 20, 40, 0.1);
    let mut state = SolverState::zeros(&inst);
    for _ in 0..1000 {
        let i = rng.below(40);
        state.apply_coordinate_delta(&inst, i, rng.normal()).unwrap();
    }
    let dense = inst.residual(state.x()).unwrap();
    let drift = state
        .residual()
        .iter()
        .zip(&dense)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    assert!(drift < 1e-9, "drift {drift}");
    assert!(state.residual_drift(&inst) < 1e-9);
}

#[test]
fn hessian_block_matches_dense_gram() {
    let mut rng = Stream::new(14);
    let inst = gaussian_instance(&mut rng, 6, 9, 0.2);
    let a = to_nalgebra(inst.a());
    let gram = a.transpose() * &a;
    let block = [7, 2, 4];
    let h = hessian_block(&inst, &block).unwrap();
    for (p, &i) in block.iter().enumerate() {
        for (q, &j) in block.iter().enumerate() {
            assert!((h[p][q] - gram[(i, j)]).abs() < 1e-12);
        }
    }
    assert!(matches!(hessian_block(&inst, &[1, 1]), Err(Error::InvalidParameter(_))));
    assert!(matches!(hessian_block(&inst, &[9]), Err(Error::IndexOutOfRange { .. })));
}

#[test]
fn p2_entries_follow_the_density() {
    for seed in 0..50 {
        let inst = generate_instance(GeneratorKind::P2, 64, 32, 0.1, 0.5, 1e-3, seed).unwrap();
        let data = inst.a().as_col_major();
        let frac = data.iter().filter(|v| **v != 0.0).count() as f64 / data.len() as f64;
        assert!((0.4..=0.6).contains(&frac), "seed {seed}: density {frac}");
    }
}

#[test]
fn generated_columns_have_unit_norm_and_tau_rule() {
    for kind in [GeneratorKind::P1, GeneratorKind::P2] {
        let inst = generate_instance(kind, 128, 32, 0.1, 0.5, 1e-3, 5).unwrap();
        for h in inst.col_norms_sq() {
            assert!((h - 1.0).abs() < 1e-12);
        }
        let atb = inst.a().tr_matvec(inst.b()).unwrap();
        let inf = atb.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((inst.tau() - 0.1 * inf).abs() <= 1e-15 * inf);
        let xt = inst.x_true().unwrap();
        assert_eq!(xt.iter().filter(|v| **v != 0.0).count(), 3);
        assert!(xt.iter().all(|v| *v == 0.0 || v.abs() == 1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_is_convex_along_segments(seed in any::<u64>(), t in 0.0f64..1.0) {
        let mut rng = Stream::new(seed);
        let inst = gaussian_instance(&mut rng, 5, 8, 0.3);
        let x = random_point(&mut rng, 8, 2.0, 0.2);
        let y = random_point(&mut rng, 8, 2.0, 0.2);
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let fz = objective(&inst, &z).unwrap();
        let bound = t * objective(&inst, &x).unwrap() + (1.0 - t) * objective(&inst, &y).unwrap();
        prop_assert!(fz <= bound + 1e-10 * (1.0 + bound.abs()));
    }

    #[test]
    fn instance_files_round_trip_bit_exactly(seed in 0u64..1000, p2 in any::<bool>()) {
        let kind = if p2 { GeneratorKind::P2 } else { GeneratorKind::P1 };
        let inst = generate_instance(kind, 16, 8, 0.25, 0.5, 1e-3, seed).unwrap();
        let mut buf = Vec::new();
        write_instance(&inst, &mut buf).unwrap();
        let back = read_instance(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.a().as_col_major(), inst.a().as_col_major());
        prop_assert_eq!(back.b(), inst.b());
        prop_assert_eq!(back.x_true(), inst.x_true());
        prop_assert_eq!(back.tau().to_bits(), inst.tau().to_bits());
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>()) {
        let a = generate_instance(GeneratorKind::P2, 32, 8, 0.25, 0.5, 1e-3, seed).unwrap();
        let b = generate_instance(GeneratorKind::P2, 32, 8, 0.25, 0.5, 1e-3, seed).unwrap();
        prop_assert_eq!(a.a().as_col_major(), b.a().as_col_major());
        prop_assert_eq!(a.b(), b.b());
    }
}
