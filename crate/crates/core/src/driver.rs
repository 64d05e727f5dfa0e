//! Active-set block coordinate descent outer loop.
//!
//! Each outer iteration estimates the active set at `x^k`, zeroes the
//! estimated active coordinates, then exactly minimizes over blocks of the
//! non-active coordinates that violate optimality the most. With
//! `enhanced` set, a reduced smooth problem on the non-active set is solved
//! once that set has settled.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::activeset::{
    epsilon_linesearch, estimate, set_active_to_zero, EstimateParams, EstimateResult, EstimateStrategy,
};
use crate::blocksolve::{kkt_max_violation, phi, violation_first_order, BlockSubproblem};
use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, dot, norm2, DenseMatrix};
use crate::problem::{gradient_q, Instance, SolverState};
use crate::trace::{IterationRecord, RunTrace, Solution, Status};

/// Measure used to rank non-active coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingMeasure {
    /// `|Φ_i|`, which also accounts for how far `x_i` is from zero.
    Phi,
    /// First-order violation only.
    FirstOrder,
}

impl FromStr for OrderingMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phi" => Ok(OrderingMeasure::Phi),
            "first-order" | "first_order" | "firstorder" => Ok(OrderingMeasure::FirstOrder),
            other => Err(Error::InvalidParameter(format!("unknown ordering measure '{other}'"))),
        }
    }
}

impl fmt::Display for OrderingMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderingMeasure::Phi => "phi",
            OrderingMeasure::FirstOrder => "first-order",
        })
    }
}

/// How many non-active coordinates (`s`) are visited per outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockBudget {
    /// `s = max(r, round(fraction·|N^k|))`
    FractionOfNonactive(f64),
    /// `s = max(r, count)`
    Fixed(usize),
}

impl BlockBudget {
    pub fn resolve(self, n_nonactive: usize, block_size: usize) -> usize {
        let s = match self {
            BlockBudget::FractionOfNonactive(frac) => (frac * n_nonactive as f64).round() as usize,
            BlockBudget::Fixed(s) => s,
        };
        s.max(block_size)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Block size `r`, 1 or 2.
    pub block_size: usize,
    pub budget: BlockBudget,
    pub measure: OrderingMeasure,
    pub estimate: EstimateParams,
    pub adaptive_eps: bool,
    pub enhanced: bool,
    /// Non-active cardinality threshold of the enhanced stage, as a fraction of `n`.
    pub xi_fraction: f64,
    /// Stop once the maximal optimality violation is at most `tol`.
    pub tol: f64,
    pub max_outer: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Recompute the residual from scratch every this many outer iterations (0 = never).
    pub resync_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::fast1()
    }
}

impl SolverConfig {
    /// One-variable blocks, `ε = 1e-4`, `s` = 80% of the non-active set.
    pub fn fast1() -> Self {
        Self {
            block_size: 1,
            budget: BlockBudget::FractionOfNonactive(0.8),
            measure: OrderingMeasure::Phi,
            estimate: EstimateParams::with_epsilon(1e-4),
            adaptive_eps: false,
            enhanced: false,
            xi_fraction: 0.05,
            tol: 1e-6,
            max_outer: 1000,
            cg_tol: 1e-12,
            cg_max_iter: 1000,
            resync_every: 50,
        }
    }

    /// Two-variable blocks, `ε = 1e-5`, `s` = 65% of the non-active set.
    pub fn fast2() -> Self {
        Self {
            block_size: 2,
            budget: BlockBudget::FractionOfNonactive(0.65),
            estimate: EstimateParams::with_epsilon(1e-5),
            ..Self::fast1()
        }
    }

    /// Replaces a fractional budget by the same fraction of a known support
    /// size `T`, i.e. `s = round(fraction·T)`.
    pub fn with_support_budget(mut self, support: usize) -> Self {
        if let BlockBudget::FractionOfNonactive(frac) = self.budget {
            self.budget = BlockBudget::Fixed((frac * support as f64).round() as usize);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.block_size, 1 | 2) {
            return Err(Error::InvalidParameter(format!(
                "block size must be 1 or 2, got {}",
                self.block_size
            )));
        }
        if let BlockBudget::FractionOfNonactive(f) = self.budget {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "budget fraction must lie in (0, 1], got {f}"
                )));
            }
        }
        if self.estimate.strategy != EstimateStrategy::Ours {
            return Err(Error::InvalidParameter(format!(
                "the solver only supports the decrease-guaranteeing estimate, got '{}'",
                self.estimate.strategy
            )));
        }
        self.estimate.validate()?;
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.xi_fraction >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "xi fraction must be >= 0, got {}",
                self.xi_fraction
            )));
        }
        if !(self.cg_tol > 0.0) || self.cg_max_iter == 0 {
            return Err(Error::InvalidParameter("cg controls must be positive".into()));
        }
        Ok(())
    }
}

/// Sorted, truncated and partitioned non-active indices for one outer iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockPlan {
    /// Non-active indices by decreasing violation, ties by index.
    pub ordered: Vec<usize>,
    /// The first `min(s, |N^k|)` entries of `ordered`.
    pub selected: Vec<usize>,
    /// `selected` cut into consecutive blocks of size `r` (the last may be shorter).
    pub blocks: Vec<Vec<usize>>,
}

pub fn build_block_plan(
    inst: &Instance,
    x: &[f64],
    g: &[f64],
    nonactive: &[usize],
    cfg: &SolverConfig,
) -> Result<BlockPlan> {
    let tau = inst.tau();
    let h = inst.col_norms_sq();
    let mut scored = Vec::with_capacity(nonactive.len());
    for &i in nonactive {
        if i >= inst.n() {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: inst.n(),
            });
        }
        let v = match cfg.measure {
            OrderingMeasure::Phi => phi(x[i], g[i], h[i], tau)?.abs(),
            OrderingMeasure::FirstOrder => violation_first_order(x[i], g[i], tau),
        };
        scored.push((v, i));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let ordered: Vec<usize> = scored.into_iter().map(|(_, i)| i).collect();
    let s = cfg.budget.resolve(ordered.len(), cfg.block_size).min(ordered.len());
    let selected = ordered[..s].to_vec();
    let blocks = selected.chunks(cfg.block_size).map(<[usize]>::to_vec).collect();
    Ok(BlockPlan {
        ordered,
        selected,
        blocks,
    })
}

/// Zeroes the estimated active set (fixed ε, or the adaptive ε search).
fn estimate_phase(
    inst: &Instance,
    state: &SolverState,
    g: &[f64],
    cfg: &SolverConfig,
) -> Result<(EstimateResult, SolverState)> {
    if cfg.adaptive_eps {
        let search = epsilon_linesearch(inst, state, g, &cfg.estimate)?;
        Ok((search.estimate, search.state))
    } else {
        let est = estimate(inst, state.x(), g, &cfg.estimate)?;
        let zeroed = set_active_to_zero(inst, state.clone(), &est.active)?;
        Ok((est, zeroed))
    }
}

/// Solves each block exactly at the running point and splices it in.
pub fn sweep_blocks(inst: &Instance, mut state: SolverState, plan: &BlockPlan) -> Result<SolverState> {
    for block in &plan.blocks {
        let w = BlockSubproblem::at(inst, &state, block)?.solve()?;
        for (&i, &wi) in block.iter().zip(&w) {
            state.set_coordinate(inst, i, wi)?;
        }
    }
    Ok(state)
}

/// What happened during one outer iteration.
#[derive(Debug, Clone)]
pub struct OuterStep {
    /// Describes the iterate the step started from.
    pub record: IterationRecord,
    pub estimate: EstimateResult,
    pub plan: BlockPlan,
    pub f_start: f64,
    pub f_zeroed: f64,
    pub f_next: f64,
}

/// One outer iteration from `state`, returning `x^{k+1}`.
pub fn outer_iteration(inst: &Instance, state: SolverState, cfg: &SolverConfig) -> Result<(SolverState, OuterStep)> {
    cfg.validate()?;
    let mut state = state;
    let g = gradient_q(inst, state.residual())?;
    let kkt = kkt_max_violation(inst, state.x(), &g)?;
    let f_start = state.f(inst);
    let (est, mut zeroed) = estimate_phase(inst, &state, &g, cfg)?;
    let f_zeroed = zeroed.f(inst);
    let plan = build_block_plan(inst, state.x(), &g, &est.nonactive, cfg)?;
    let mut next = sweep_blocks(inst, zeroed, &plan)?;
    next.outer_iter = state.outer_iter + 1;
    let f_next = next.f(inst);
    let record = IterationRecord {
        iter: state.outer_iter,
        f: f_start,
        elapsed_s: 0.0,
        n_nonactive: est.nonactive.len(),
        n_active: est.active.len(),
        kkt_violation: kkt,
        epsilon: Some(est.epsilon_used),
        enhanced: false,
        rel_error: relative_error(inst, state.x()),
    };
    Ok((
        next,
        OuterStep {
            record,
            estimate: est,
            plan,
            f_start,
            f_zeroed,
            f_next,
        },
    ))
}

pub(crate) fn relative_error(inst: &Instance, x: &[f64]) -> Option<f64> {
    let xt = inst.x_true()?;
    let denom = norm2(xt);
    if denom == 0.0 {
        return None;
    }
    let num: f64 = x.iter().zip(xt).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Some(num / denom)
}

/// True when `|N|` is unchanged over the last three records and at most `ξ = xi_fraction·n`.
pub fn enhanced_trigger(trace: &RunTrace, n: usize, xi_fraction: f64) -> bool {
    let recs = &trace.records;
    if recs.len() < 3 {
        return false;
    }
    let tail = &recs[recs.len() - 3..];
    let card = tail[2].n_nonactive;
    tail.iter().all(|r| r.n_nonactive == card) && (card as f64) <= xi_fraction * n as f64
}

/// Solution of the sign-fixed reduced problem.
#[derive(Debug, Clone)]
pub struct ReducedSolve {
    /// Full-length vector, zero outside the working set.
    pub x: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Minimizes `½‖A_W z − b‖² + τ·sᵀz` over the working set `W` with all
/// other coordinates held at zero, i.e. solves
/// `(A_WᵀA_W) z = A_Wᵀb − τ s` by conjugate gradients.
pub fn solve_reduced_smooth(
    inst: &Instance,
    working: &[usize],
    signs: &[f64],
    cg_tol: f64,
    cg_max_iter: usize,
) -> Result<ReducedSolve> {
    if working.len() != signs.len() {
        return Err(Error::dim("solve_reduced_smooth signs", working.len(), signs.len()));
    }
    if let Some(&bad) = working.iter().find(|&&i| i >= inst.n()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            dim: inst.n(),
        });
    }
    if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
        return Err(Error::InvalidParameter("reduced solve needs signs in {-1, +1}".into()));
    }
    let a = inst.a();
    let tau = inst.tau();
    let rhs: Vec<f64> = working
        .iter()
        .zip(signs)
        .map(|(&i, &s)| dot(a.col(i), inst.b()) - tau * s)
        .collect();
    let apply = |v: &[f64]| normal_apply(a, working, v);
    let out = conjugate_gradient(apply, &rhs, cg_tol, cg_max_iter);
    let mut x = vec![0.0; inst.n()];
    for (&i, &v) in working.iter().zip(&out.x) {
        x[i] = v;
    }
    Ok(ReducedSolve {
        x,
        converged: out.converged,
        iterations: out.iterations,
        relative_residual: out.relative_residual,
    })
}

fn normal_apply(a: &DenseMatrix, working: &[usize], v: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; a.rows()];
    for (&i, &vi) in working.iter().zip(v) {
        crate::linalg::axpy(vi, a.col(i), &mut t);
    }
    working.iter().map(|&i| dot(a.col(i), &t)).collect()
}

/// Failed solve together with the trace recorded up to the failure.
#[derive(Debug, thiserror::Error)]
#[error("solve failed after {} recorded iterations: {error}", trace.len())]
pub struct SolveFailure {
    #[source]
    pub error: Error,
    pub trace: RunTrace,
}

/// Relative slack allowed when comparing against a target objective value.
pub const TARGET_REL_SLACK: f64 = 1e-13;

/// Runs from `x⁰ = 0` until the optimality violation is at most `cfg.tol`.
pub fn solve(inst: &Instance, cfg: &SolverConfig) -> Result<(Solution, RunTrace), SolveFailure> {
    solve_from(inst, cfg, vec![0.0; inst.n()])
}

/// Runs from an arbitrary starting point.
pub fn solve_from(inst: &Instance, cfg: &SolverConfig, x0: Vec<f64>) -> Result<(Solution, RunTrace), SolveFailure> {
    run(inst, cfg, x0, None)
}

/// Runs from `x⁰ = 0` until `f(x^k) ≤ f_target`; reaching `max_outer` first
/// is reported as [`Status::MaxIter`].
pub fn solve_to_target(
    inst: &Instance,
    cfg: &SolverConfig,
    f_target: f64,
) -> Result<(Solution, RunTrace), SolveFailure> {
    if !f_target.is_finite() {
        return Err(SolveFailure {
            error: Error::InvalidParameter(format!("target must be finite, got {f_target}")),
            trace: RunTrace::default(),
        });
    }
    run(inst, cfg, vec![0.0; inst.n()], Some(f_target))
}

fn run(
    inst: &Instance,
    cfg: &SolverConfig,
    x0: Vec<f64>,
    target: Option<f64>,
) -> Result<(Solution, RunTrace), SolveFailure> {
    let mut trace = RunTrace::default();
    match run_inner(inst, cfg, x0, target, &mut trace) {
        Ok(sol) => Ok((sol, trace)),
        Err(error) => Err(SolveFailure { error, trace }),
    }
}

fn run_inner(
    inst: &Instance,
    cfg: &SolverConfig,
    x0: Vec<f64>,
    target: Option<f64>,
    trace: &mut RunTrace,
) -> Result<Solution> {
    cfg.validate()?;
    let start = Instant::now();
    let mut state = SolverState::new(inst, x0)?;
    let mut enhanced_at: Option<usize> = None;
    let mut k = 0usize;
    loop {
        if cfg.resync_every > 0 && k > 0 && k.is_multiple_of(cfg.resync_every) {
            state.resync(inst);
        }
        let g = gradient_q(inst, state.residual())?;
        let kkt = kkt_max_violation(inst, state.x(), &g)?;
        let f = state.f(inst);
        let (est, zeroed) = estimate_phase(inst, &state, &g, cfg)?;
        trace.push(IterationRecord {
            iter: k,
            f,
            elapsed_s: start.elapsed().as_secs_f64(),
            n_nonactive: est.nonactive.len(),
            n_active: est.active.len(),
            kkt_violation: kkt,
            epsilon: Some(est.epsilon_used),
            enhanced: false,
            rel_error: relative_error(inst, state.x()),
        });

        let status = match target {
            Some(t) if f <= t + TARGET_REL_SLACK * (1.0 + t.abs()) => Some(Status::TargetReached),
            None if kkt <= cfg.tol => Some(Status::Optimal),
            _ if k >= cfg.max_outer => Some(Status::MaxIter),
            _ => None,
        };
        if let Some(status) = status {
            return Ok(Solution {
                f,
                status,
                iterations: k,
                kkt_violation: kkt,
                x: state.into_x(),
            });
        }

        let plan = build_block_plan(inst, state.x(), &g, &est.nonactive, cfg)?;
        let mut next = sweep_blocks(inst, zeroed, &plan)?;

        let card = est.nonactive.len();
        if cfg.enhanced && enhanced_at != Some(card) && enhanced_trigger(trace, inst.n(), cfg.xi_fraction) {
            enhanced_at = Some(card);
            if let Some(last) = trace.records.last_mut() {
                last.enhanced = true;
            }
            if let Some(better) = try_enhanced(inst, &mut next, &est.nonactive, cfg)? {
                next = better;
            }
        }

        if target.is_some() && next.x() == state.x() {
            // A fixed point repeats forever; the target can no longer be reached.
            return Ok(Solution {
                f,
                status: Status::MaxIter,
                iterations: k,
                kkt_violation: kkt,
                x: state.into_x(),
            });
        }
        next.outer_iter = k + 1;
        state = next;
        k += 1;
    }
}

/// Reduced smooth solve on the nonzero non-active coordinates of `current`.
/// Accepted only if every sign is preserved and the objective improves.
fn try_enhanced(
    inst: &Instance,
    current: &mut SolverState,
    nonactive: &[usize],
    cfg: &SolverConfig,
) -> Result<Option<SolverState>> {
    let working: Vec<usize> = nonactive.iter().copied().filter(|&i| current.x()[i] != 0.0).collect();
    if working.is_empty() {
        return Ok(None);
    }
    let signs: Vec<f64> = working.iter().map(|&i| current.x()[i].signum()).collect();
    let reduced = solve_reduced_smooth(inst, &working, &signs, cfg.cg_tol, cfg.cg_max_iter)?;
    let consistent = working.iter().zip(&signs).all(|(&i, &s)| reduced.x[i] * s > 0.0);
    if !consistent {
        return Ok(None);
    }
    let mut candidate = SolverState::new(inst, reduced.x)?;
    candidate.outer_iter = current.outer_iter;
    if candidate.f(inst) < current.f(inst) {
        Ok(Some(candidate))
    } else {
        Ok(None)
    }
}
