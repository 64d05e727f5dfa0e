//! Benchmark sweeps over synthetic instances, performance profiles and
//! relative-error traces.
//!
//! A sweep generates every `(kind, n, ρ, seed)` cell, runs the target-setting
//! solver to convergence, then times every other solver until it first
//! reaches that objective value.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fista_solve, fista_to_target, ista_solve, ista_to_target, ProxConfig};
use crate::driver::{solve, solve_to_target, SolveFailure, SolverConfig};
use crate::error::{Error, Result};
use crate::problem::{generate_instance, GeneratorKind, Instance, DEFAULT_DENSITY, DEFAULT_NOISE_VAR};
use crate::trace::{RunTrace, Solution, Status};

/// Named solver configurations available to sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Fast1,
    Fast2,
    Fast1E,
    Fast2E,
    Fast1Eps,
    Fast2Eps,
    Ista,
    Fista,
}

impl SolverKind {
    pub const ALL: [SolverKind; 8] = [
        SolverKind::Fast1,
        SolverKind::Fast2,
        SolverKind::Fast1E,
        SolverKind::Fast2E,
        SolverKind::Fast1Eps,
        SolverKind::Fast2Eps,
        SolverKind::Ista,
        SolverKind::Fista,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Fast1 => "FAST1",
            SolverKind::Fast2 => "FAST2",
            SolverKind::Fast1E => "FAST1-E",
            SolverKind::Fast2E => "FAST2-E",
            SolverKind::Fast1Eps => "FAST1-eps",
            SolverKind::Fast2Eps => "FAST2-eps",
            SolverKind::Ista => "ISTA",
            SolverKind::Fista => "FISTA",
        }
    }

    pub fn is_fast(self) -> bool {
        !matches!(self, SolverKind::Ista | SolverKind::Fista)
    }

    /// Block-descent configuration for the FAST variants.
    pub fn fast_config(self) -> Option<SolverConfig> {
        let cfg = match self {
            SolverKind::Fast1 => SolverConfig::fast1(),
            SolverKind::Fast2 => SolverConfig::fast2(),
            SolverKind::Fast1E => SolverConfig {
                enhanced: true,
                ..SolverConfig::fast1()
            },
            SolverKind::Fast2E => SolverConfig {
                enhanced: true,
                ..SolverConfig::fast2()
            },
            SolverKind::Fast1Eps => SolverConfig {
                adaptive_eps: true,
                ..SolverConfig::fast1()
            },
            SolverKind::Fast2Eps => SolverConfig {
                adaptive_eps: true,
                ..SolverConfig::fast2()
            },
            SolverKind::Ista | SolverKind::Fista => return None,
        };
        Some(cfg)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown solver '{s}'")))
    }
}

impl Serialize for SolverKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for SolverKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

mod kind_serde {
    use super::*;

    pub fn serialize<S: serde::Serializer>(k: &GeneratorKind, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(k.as_str())
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<GeneratorKind, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct KindName(#[serde(with = "kind_serde")] GeneratorKind);

/// Sweep description, usually read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(with = "kinds_serde")]
    pub kinds: Vec<GeneratorKind>,
    /// Signal lengths `n`; each instance has `m = n/4` observations.
    pub sizes: Vec<usize>,
    pub rhos: Vec<f64>,
    pub seeds_per_cell: usize,
    pub base_seed: u64,
    pub solvers: Vec<SolverKind>,
    pub target_setter: SolverKind,
    /// Iteration cap; runs that exceed it count as failures.
    pub max_iter: usize,
    pub tol: f64,
    pub density: f64,
    pub noise_var: f64,
    /// Use `s = round(fraction·T)` from the known spike count.
    pub use_true_support: bool,
    /// Also write seed-averaged relative-error traces.
    pub error_traces: bool,
}

mod kinds_serde {
    use super::*;

    pub fn serialize<S: serde::Serializer>(k: &[GeneratorKind], s: S) -> std::result::Result<S::Ok, S::Error> {
        let names: Vec<KindName> = k.iter().copied().map(KindName).collect();
        names.serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<GeneratorKind>, D::Error> {
        Ok(Vec::<KindName>::deserialize(d)?.into_iter().map(|k| k.0).collect())
    }
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentSpec {
    /// Desk-scale grid: `n ∈ {2^10, 2^12}`, `ρ ∈ {0.01, 0.05, 0.1}`, 5 seeds.
    pub fn desk() -> Self {
        Self {
            kinds: vec![GeneratorKind::P1, GeneratorKind::P2],
            sizes: vec![1 << 10, 1 << 12],
            rhos: vec![0.01, 0.05, 0.1],
            seeds_per_cell: 5,
            base_seed: 0,
            solvers: vec![
                SolverKind::Fast1,
                SolverKind::Fast2,
                SolverKind::Fast1E,
                SolverKind::Fast2E,
                SolverKind::Ista,
                SolverKind::Fista,
            ],
            target_setter: SolverKind::Fast2,
            max_iter: 1000,
            tol: 1e-6,
            density: DEFAULT_DENSITY,
            noise_var: DEFAULT_NOISE_VAR,
            use_true_support: true,
            error_traces: false,
        }
    }

    /// Full-size grid: `n ∈ {2^14, …, 2^17}`, five ρ values, 10 seeds.
    pub fn full() -> Self {
        Self {
            sizes: vec![1 << 14, 1 << 15, 1 << 16, 1 << 17],
            rhos: vec![0.01, 0.03, 0.05, 0.07, 0.1],
            seeds_per_cell: 10,
            ..Self::desk()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() || self.sizes.is_empty() || self.rhos.is_empty() || self.solvers.is_empty() {
            return Err(Error::InvalidParameter(
                "spec needs kinds, sizes, rhos and solvers".into(),
            ));
        }
        if let Some(n) = self.sizes.iter().find(|&&n| n == 0 || n % 4 != 0) {
            return Err(Error::InvalidParameter(format!(
                "size {n} is not a positive multiple of 4"
            )));
        }
        if self.seeds_per_cell == 0 {
            return Err(Error::InvalidParameter("seeds_per_cell must be at least 1".into()));
        }
        if self.kinds.contains(&GeneratorKind::Custom) {
            return Err(Error::InvalidParameter("sweeps only generate P1/P2 instances".into()));
        }
        if !self.target_setter.is_fast() {
            return Err(Error::InvalidParameter(
                "the target setter must be a FAST variant".into(),
            ));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter("tol and max_iter must be positive".into()));
        }
        Ok(())
    }

    /// Every `(kind, n, ρ, seed)` cell in sweep order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        let mut group = 0u64;
        for &kind in &self.kinds {
            for &n in &self.sizes {
                for &rho in &self.rhos {
                    for s in 0..self.seeds_per_cell as u64 {
                        out.push(Cell {
                            kind,
                            n,
                            m: n / 4,
                            rho,
                            seed: self.base_seed.wrapping_add(group * 1000 + s),
                        });
                    }
                    group += 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub kind: GeneratorKind,
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub seed: u64,
}

/// One `(cell, solver)` outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    #[serde(with = "kind_serde")]
    pub kind: GeneratorKind,
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub seed: u64,
    pub solver: SolverKind,
    pub time_s: f64,
    pub iters: usize,
    pub final_f: f64,
    pub reached: bool,
}

impl ResultRow {
    fn problem_key(&self) -> (GeneratorKind, usize, usize, u64, u64) {
        (self.kind, self.n, self.m, self.rho.to_bits(), self.seed)
    }
}

type RunOutcome = std::result::Result<(Solution, RunTrace), SolveFailure>;

fn run_solver(kind: SolverKind, inst: &Instance, spec: &ExperimentSpec, target: Option<f64>) -> RunOutcome {
    if let Some(mut cfg) = kind.fast_config() {
        if spec.use_true_support {
            if let Some(t) = inst.true_support_size() {
                cfg = cfg.with_support_budget(t);
            }
        }
        cfg.max_outer = spec.max_iter;
        cfg.tol = spec.tol;
        return match target {
            Some(t) => solve_to_target(inst, &cfg, t),
            None => solve(inst, &cfg),
        };
    }
    let cfg = ProxConfig {
        tol: spec.tol,
        max_iter: spec.max_iter,
        ..ProxConfig::default()
    };
    match (kind, target) {
        (SolverKind::Ista, Some(t)) => ista_to_target(inst, &cfg, t),
        (SolverKind::Ista, None) => ista_solve(inst, &cfg),
        (_, Some(t)) => fista_to_target(inst, &cfg, t),
        (_, None) => fista_solve(inst, &cfg),
    }
}

/// Rows for one cell plus the traces of every run, in `spec.solvers` order.
pub fn run_cell(spec: &ExperimentSpec, cell: &Cell) -> (Vec<ResultRow>, Vec<(SolverKind, Option<RunTrace>)>) {
    let row = |solver, time_s, iters, final_f, reached| ResultRow {
        kind: cell.kind,
        n: cell.n,
        m: cell.m,
        rho: cell.rho,
        seed: cell.seed,
        solver,
        time_s,
        iters,
        final_f,
        reached,
    };
    let inst = match generate_instance(
        cell.kind,
        cell.n,
        cell.m,
        cell.rho,
        spec.density,
        spec.noise_var,
        cell.seed,
    ) {
        Ok(inst) => inst,
        Err(_) => {
            let rows = spec.solvers.iter().map(|&s| row(s, 0.0, 0, f64::NAN, false)).collect();
            return (rows, spec.solvers.iter().map(|&s| (s, None)).collect());
        }
    };

    let timed = |kind, target| {
        let start = Instant::now();
        let out = run_solver(kind, &inst, spec, target);
        (start.elapsed().as_secs_f64(), out)
    };

    let (setter_time, setter_out) = timed(spec.target_setter, None);
    let target = setter_out.as_ref().ok().map(|(sol, _)| sol.f);

    let mut rows = Vec::with_capacity(spec.solvers.len());
    let mut traces = Vec::with_capacity(spec.solvers.len());
    let mut setter_out = Some(setter_out);
    for &solver in &spec.solvers {
        let (time_s, out, is_setter) = if solver == spec.target_setter {
            (setter_time, setter_out.take().expect("setter listed once"), true)
        } else if let Some(t) = target {
            let (time_s, out) = timed(solver, Some(t));
            (time_s, out, false)
        } else {
            rows.push(row(solver, 0.0, 0, f64::NAN, false));
            traces.push((solver, None));
            continue;
        };
        match out {
            Ok((sol, trace)) => {
                let reached = is_setter || sol.status == Status::TargetReached;
                rows.push(row(solver, time_s, sol.iterations, sol.f, reached));
                traces.push((solver, Some(trace)));
            }
            Err(fail) => {
                rows.push(row(solver, time_s, fail.trace.len(), f64::NAN, false));
                traces.push((solver, Some(fail.trace)));
            }
        }
    }
    (rows, traces)
}

/// `(kind, n, ρ bits, solver)` grouping of error traces.
type ErrorKey = (GeneratorKind, usize, u64, SolverKind);

pub const RESULTS_FILE: &str = "results.csv";
pub const PROFILE_FILE: &str = "profile.csv";
pub const ERROR_TRACE_FILE: &str = "error_traces.csv";

/// Runs the sweep on `workers` threads and writes `results.csv` and
/// `profile.csv` into `out_dir`. Rows are ordered by cell, then solver,
/// regardless of scheduling.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: impl AsRef<Path>, workers: usize) -> Result<PathBuf> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    let per_cell: Vec<_> = pool.install(|| cells.par_iter().map(|c| run_cell(spec, c)).collect());

    let mut rows = Vec::new();
    let mut error_series: BTreeMap<ErrorKey, Vec<Vec<(f64, f64)>>> = BTreeMap::new();
    for (cell, (cell_rows, traces)) in cells.iter().zip(per_cell) {
        rows.extend(cell_rows);
        if spec.error_traces {
            for (solver, trace) in traces {
                if let Some(series) = trace.as_ref().and_then(|t| relative_error_trace(t).ok()) {
                    error_series
                        .entry((cell.kind, cell.n, cell.rho.to_bits(), solver))
                        .or_default()
                        .push(series);
                }
            }
        }
    }

    let results_path = out_dir.join(RESULTS_FILE);
    write_results_csv(&rows, File::create(&results_path)?)?;
    if spec.solvers.len() >= 2 {
        let curves = performance_profile(&rows, None)?;
        write_profile_csv(&curves, File::create(out_dir.join(PROFILE_FILE))?)?;
    }
    if spec.error_traces {
        let mut w = std::io::BufWriter::new(File::create(out_dir.join(ERROR_TRACE_FILE))?);
        writeln!(w, "kind,n,rho,solver,time_s,rel_error")?;
        for ((kind, n, rho, solver), series) in &error_series {
            for (t, e) in average_error_traces(series, ERROR_GRID_POINTS) {
                writeln!(w, "{kind},{n},{},{solver},{t:e},{e:e}", f64::from_bits(*rho))?;
            }
        }
        w.flush()?;
    }
    Ok(results_path)
}

pub fn write_results_csv(rows: &[ResultRow], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_results_csv(r: impl Read) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Fraction of problems solved within a ratio of the best time, per solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub solver: String,
    /// Ratio breakpoints, ascending; the last one is the failure penalty.
    pub ratios: Vec<f64>,
    /// `ρ_s(T)` at each breakpoint.
    pub fractions: Vec<f64>,
}

/// Dolan–Moré performance profile over run times.
///
/// Failed runs are given the ratio `failure_penalty` (default: twice the
/// largest finite ratio) and are never counted as solved.
pub fn performance_profile(rows: &[ResultRow], failure_penalty: Option<f64>) -> Result<Vec<ProfileCurve>> {
    let mut solvers: Vec<String> = Vec::new();
    let mut problems: BTreeMap<_, BTreeMap<String, Option<f64>>> = BTreeMap::new();
    for r in rows {
        let name = r.solver.to_string();
        if !solvers.contains(&name) {
            solvers.push(name.clone());
        }
        let time = (r.reached && r.time_s.is_finite()).then_some(r.time_s.max(f64::MIN_POSITIVE));
        problems.entry(r.problem_key()).or_default().insert(name, time);
    }
    let times: Vec<Vec<Option<f64>>> = problems
        .values()
        .map(|by_solver| solvers.iter().map(|s| by_solver.get(s).copied().flatten()).collect())
        .collect();
    profile_from_times(&solvers, &times, failure_penalty)
}

/// Profile from a problems × solvers table of times (`None` = failure).
pub fn profile_from_times(
    solvers: &[String],
    times: &[Vec<Option<f64>>],
    failure_penalty: Option<f64>,
) -> Result<Vec<ProfileCurve>> {
    if times.is_empty() {
        return Err(Error::InvalidParameter(
            "performance profile needs at least one problem".into(),
        ));
    }
    if solvers.len() < 2 {
        return Err(Error::InvalidParameter(
            "performance profile needs at least two solvers".into(),
        ));
    }
    let ratios: Vec<Vec<Option<f64>>> = times
        .iter()
        .map(|row| {
            let best = row.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            row.iter().map(|t| t.map(|t| t / best)).collect()
        })
        .collect();
    let max_ratio = ratios.iter().flatten().flatten().copied().fold(1.0, f64::max);
    let penalty = failure_penalty.unwrap_or(2.0 * max_ratio);
    let mut breakpoints: Vec<f64> = ratios.iter().flatten().flatten().copied().collect();
    breakpoints.push(penalty);
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();

    let total = times.len() as f64;
    Ok(solvers
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let mut mine: Vec<f64> = ratios.iter().filter_map(|row| row[s]).collect();
            mine.sort_by(f64::total_cmp);
            let fractions = breakpoints
                .iter()
                .map(|&t| mine.partition_point(|&r| r <= t) as f64 / total)
                .collect();
            ProfileCurve {
                solver: name.clone(),
                ratios: breakpoints.clone(),
                fractions,
            }
        })
        .collect())
}

pub fn write_profile_csv(curves: &[ProfileCurve], w: impl Write) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "solver,ratio,log2_ratio,fraction")?;
    for c in curves {
        for (r, f) in c.ratios.iter().zip(&c.fractions) {
            writeln!(w, "{},{r},{},{f}", c.solver, r.log2())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `(elapsed seconds, ‖x^k − x_true‖/‖x_true‖)` pairs recorded during a run.
pub fn relative_error_trace(trace: &RunTrace) -> Result<Vec<(f64, f64)>> {
    trace
        .records
        .iter()
        .map(|r| {
            r.rel_error
                .map(|e| (r.elapsed_s, e))
                .ok_or_else(|| Error::InvalidParameter("trace carries no ground-truth error".into()))
        })
        .collect()
}

pub const ERROR_GRID_POINTS: usize = 200;

/// Averages several error series on a shared log-spaced time grid, holding
/// each series at its last value before the grid point (its first value
/// before it starts).
pub fn average_error_traces(series: &[Vec<(f64, f64)>], points: usize) -> Vec<(f64, f64)> {
    let series: Vec<&Vec<(f64, f64)>> = series.iter().filter(|s| !s.is_empty()).collect();
    if series.is_empty() || points == 0 {
        return Vec::new();
    }
    let t_hi = series
        .iter()
        .map(|s| s.last().unwrap().0)
        .fold(f64::MIN_POSITIVE, f64::max);
    let t_lo = series
        .iter()
        .flat_map(|s| s.iter().map(|p| p.0).filter(|t| *t > 0.0))
        .fold(t_hi, f64::min);
    let grid: Vec<f64> = if points == 1 || t_hi <= t_lo {
        vec![t_hi]
    } else {
        let (a, b) = (t_lo.ln(), t_hi.ln());
        (0..points)
            .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
            .collect()
    };
    grid.into_iter()
        .map(|t| {
            let sum: f64 = series
                .iter()
                .map(|s| {
                    let idx = s.partition_point(|p| p.0 <= t);
                    s[idx.saturating_sub(1)].1
                })
                .sum();
            (t, sum / series.len() as f64)
        })
        .collect()
}
