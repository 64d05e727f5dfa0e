use std::fs::File;

use fastbcd::bench::{
    performance_profile, read_results_csv, relative_error_trace, run_experiment, write_results_csv, ExperimentSpec,
    ResultRow, SolverKind, ERROR_TRACE_FILE, PROFILE_FILE,
};
use fastbcd::driver::{solve, SolverConfig};
use fastbcd::linalg::DenseMatrix;
use fastbcd::problem::{generate_instance, GeneratorKind};
use fastbcd::Instance;

fn small_spec() -> ExperimentSpec {
    ExperimentSpec {
        sizes: vec![64, 128],
        rhos: vec![0.1],
        seeds_per_cell: 2,
        solvers: vec![
            SolverKind::Fast1,
            SolverKind::Fast2,
            SolverKind::Fast2E,
            SolverKind::Ista,
            SolverKind::Fista,
        ],
        ..ExperimentSpec::desk()
    }
}

/// Results with the timing column blanked.
fn untimed(rows: &[ResultRow]) -> Vec<ResultRow> {
    rows.iter()
        .cloned()
        .map(|mut r| {
            r.time_s = 0.0;
            r
        })
        .collect()
}

#[test]
fn sweeps_are_reproducible_across_worker_counts() {
    let spec = small_spec();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let p1 = run_experiment(&spec, d1.path(), 1).unwrap();
    let p2 = run_experiment(&spec, d2.path(), 2).unwrap();
    let r1 = read_results_csv(File::open(p1).unwrap()).unwrap();
    let r2 = read_results_csv(File::open(p2).unwrap()).unwrap();
    assert_eq!(r1.len(), 2 * 2 * 2 * 5);
    assert_eq!(untimed(&r1), untimed(&r2));
    for r in &r1 {
        assert_eq!(r.m, r.n / 4);
        if r.solver == spec.target_setter {
            assert!(r.reached);
        }
        if r.solver.is_fast() {
            assert!(r.reached, "{r:?}");
        }
    }
    assert!(d1.path().join(PROFILE_FILE).exists());
}

#[test]
fn capped_baselines_are_recorded_as_failures() {
    let spec = ExperimentSpec {
        kinds: vec![GeneratorKind::P2],
        sizes: vec![128],
        seeds_per_cell: 1,
        max_iter: 2,
        solvers: vec![SolverKind::Fast2, SolverKind::Ista],
        ..ExperimentSpec::desk()
    };
    let dir = tempfile::tempdir().unwrap();
    let rows = read_results_csv(File::open(run_experiment(&spec, dir.path(), 1).unwrap()).unwrap()).unwrap();
    let ista: Vec<_> = rows.iter().filter(|r| r.solver == SolverKind::Ista).collect();
    assert!(ista.iter().all(|r| !r.reached));
    let curves = performance_profile(&rows, None).unwrap();
    let ista_curve = curves.iter().find(|c| c.solver == "ISTA").unwrap();
    assert!(ista_curve.fractions.iter().all(|f| *f == 0.0));
}

#[test]
fn results_csv_round_trips() {
    let row = ResultRow {
        kind: GeneratorKind::P1,
        n: 64,
        m: 16,
        rho: 0.1,
        seed: 3,
        solver: SolverKind::Fast1E,
        time_s: 0.125,
        iters: 7,
        final_f: 0.1 + 0.2,
        reached: true,
    };
    let mut buf = Vec::new();
    write_results_csv(std::slice::from_ref(&row), &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("kind,n,m,rho,seed,solver,time_s,iters,final_f,reached\n"));
    assert_eq!(read_results_csv(buf.as_slice()).unwrap(), vec![row]);
}

#[test]
fn profiles_from_sweeps_are_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        error_traces: true,
        ..small_spec()
    };
    let rows = read_results_csv(File::open(run_experiment(&spec, dir.path(), 1).unwrap()).unwrap()).unwrap();
    for c in performance_profile(&rows, None).unwrap() {
        assert!(c.ratios.windows(2).all(|w| w[0] < w[1]));
        assert!(c.fractions.windows(2).all(|w| w[0] <= w[1]));
        assert!(c.fractions.iter().all(|f| (0.0..=1.0).contains(f)));
    }
    let traces = std::fs::read_to_string(dir.path().join(ERROR_TRACE_FILE)).unwrap();
    assert!(traces.lines().count() > 1);
}

#[test]
fn relative_error_needs_a_ground_truth() {
    let inst = generate_instance(GeneratorKind::P1, 64, 16, 0.25, 0.5, 1e-3, 1).unwrap();
    let (_, trace) = solve(&inst, &SolverConfig::fast1()).unwrap();
    let series = relative_error_trace(&trace).unwrap();
    assert_eq!(series.len(), trace.len());
    assert_eq!(series[0].1, 1.0);
    assert!(series.windows(2).all(|w| w[0].0 <= w[1].0));

    let a = DenseMatrix::identity(3);
    let bare = Instance::new(a, vec![1.0, 2.0, 3.0], 0.5).unwrap();
    let (_, trace) = solve(&bare, &SolverConfig::fast1()).unwrap();
    assert!(relative_error_trace(&trace).is_err());
}
