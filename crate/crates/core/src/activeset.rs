//! Active-set estimates for `min ½‖Ax − b‖² + τ‖x‖₁`.
//!
//! The estimate marks coordinate `i` non-active when
//! `max(0, x_i) > ε(τ + g_i)` or `max(0, −x_i) > ε(τ − g_i)`. Zeroing every
//! active coordinate decreases the objective by at least `‖y − x‖²/(2ε)`
//! whenever `ε < 1/λmax(AᵀA)`.

use std::fmt;
use std::str::FromStr;

use crate::blocksolve::phi;
use crate::error::{check_len, Error, Result};
use crate::linalg::dist_sq;
use crate::problem::{Instance, SolverState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateStrategy {
    Ours,
    Byrd,
    Yuan,
    Ista,
}

impl fmt::Display for EstimateStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimateStrategy::Ours => "ours",
            EstimateStrategy::Byrd => "byrd",
            EstimateStrategy::Yuan => "yuan",
            EstimateStrategy::Ista => "ista",
        })
    }
}

impl FromStr for EstimateStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ours" => Ok(EstimateStrategy::Ours),
            "byrd" => Ok(EstimateStrategy::Byrd),
            "yuan" => Ok(EstimateStrategy::Yuan),
            "ista" => Ok(EstimateStrategy::Ista),
            other => Err(Error::InvalidParameter(format!("unknown estimate strategy '{other}'"))),
        }
    }
}

/// Cap on the number of ε reductions tried by [`epsilon_linesearch`].
pub const EPS_BACKTRACK_CAP: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateParams {
    /// ε of the estimate.
    pub epsilon: f64,
    /// Reduction factor for the adaptive ε search.
    pub theta: f64,
    /// Starting ε of the adaptive search.
    pub eps_bar: f64,
    /// Required decrease coefficient of the adaptive search.
    pub gamma: f64,
    pub strategy: EstimateStrategy,
}

impl Default for EstimateParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            theta: 0.5,
            eps_bar: 1e-2,
            gamma: 1e-6,
            strategy: EstimateStrategy::Ours,
        }
    }
}

impl EstimateParams {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        if !(self.eps_bar > 0.0 && self.eps_bar.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eps_bar must be positive, got {}",
                self.eps_bar
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Partition of `0..n` into estimated active and non-active indices, both
/// in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub active: Vec<usize>,
    pub nonactive: Vec<usize>,
    pub epsilon_used: f64,
}

impl EstimateResult {
    fn from_predicate(n: usize, epsilon_used: f64, mut is_active: impl FnMut(usize) -> bool) -> Self {
        let (active, nonactive) = (0..n).partition(|&i| is_active(i));
        Self {
            active,
            nonactive,
            epsilon_used,
        }
    }
}

/// `λ_i = g_i + τ`, `μ_i = τ − g_i`.
pub fn multiplier_values(inst: &Instance, x: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("multiplier_values x", inst.n(), x)?;
    check_len("multiplier_values g", inst.n(), g)?;
    let tau = inst.tau();
    Ok((
        g.iter().map(|gi| gi + tau).collect(),
        g.iter().map(|gi| tau - gi).collect(),
    ))
}

#[inline]
fn ours_active(x: f64, g: f64, tau: f64, eps: f64) -> bool {
    !(x.max(0.0) > eps * (tau + g) || (-x).max(0.0) > eps * (tau - g))
}

/// The active/non-active estimate at `x` with gradient `g`.
pub fn estimate(inst: &Instance, x: &[f64], g: &[f64], params: &EstimateParams) -> Result<EstimateResult> {
    check_len("estimate x", inst.n(), x)?;
    check_len("estimate g", inst.n(), g)?;
    estimate_at(inst.tau(), x, g, params.epsilon)
}

fn estimate_at(tau: f64, x: &[f64], g: &[f64], eps: f64) -> Result<EstimateResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }
    Ok(EstimateResult::from_predicate(x.len(), eps, |i| {
        ours_active(x[i], g[i], tau, eps)
    }))
}

/// Tolerance for the `g_i = ±τ` tests of the Byrd estimate.
pub fn byrd_equality_tol(tau: f64) -> f64 {
    1e-10 * (1.0 + tau)
}

/// Comparison estimates.
///
/// `aux` is the violation level `M ≥ 0` for [`EstimateStrategy::Yuan`] and
/// `ε` for [`EstimateStrategy::Ista`] and [`EstimateStrategy::Ours`]; it is
/// ignored by [`EstimateStrategy::Byrd`].
pub fn estimate_comparison(
    inst: &Instance,
    x: &[f64],
    g: &[f64],
    strategy: EstimateStrategy,
    aux: f64,
) -> Result<EstimateResult> {
    check_len("estimate_comparison x", inst.n(), x)?;
    check_len("estimate_comparison g", inst.n(), g)?;
    let tau = inst.tau();
    let n = inst.n();
    match strategy {
        EstimateStrategy::Ours => estimate_at(tau, x, g, aux),
        EstimateStrategy::Byrd => {
            let tol = byrd_equality_tol(tau);
            Ok(EstimateResult::from_predicate(n, 0.0, |i| {
                let (xi, gi) = (x[i], g[i]);
                if xi == 0.0 {
                    gi > -tau && gi < tau
                } else if xi < 0.0 {
                    (gi + tau).abs() <= tol
                } else {
                    (gi - tau).abs() <= tol
                }
            }))
        }
        EstimateStrategy::Yuan => {
            if !(aux >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "violation level M must be nonnegative, got {aux}"
                )));
            }
            Ok(EstimateResult::from_predicate(n, 0.0, |i| {
                x[i] == 0.0 && g[i] > -tau + aux && g[i] < tau - aux
            }))
        }
        EstimateStrategy::Ista => {
            if !(aux > 0.0) {
                return Err(Error::InvalidParameter(format!("epsilon must be positive, got {aux}")));
            }
            Ok(EstimateResult::from_predicate(n, aux, |i| {
                aux * (g[i] - tau) <= x[i] && x[i] <= aux * (tau + g[i])
            }))
        }
    }
}

/// Violation level `M = min(τ/2, max_i |Φ_i(x)|)` used by the Yuan estimate
/// at the following iterate; `τ/2` before the first iterate.
pub fn yuan_violation_level(inst: &Instance, prev: Option<(&[f64], &[f64])>) -> Result<f64> {
    let tau = inst.tau();
    let Some((x, g)) = prev else {
        return Ok(0.5 * tau);
    };
    check_len("yuan_violation_level x", inst.n(), x)?;
    check_len("yuan_violation_level g", inst.n(), g)?;
    let mut worst: f64 = 0.0;
    for i in 0..inst.n() {
        worst = worst.max(phi(x[i], g[i], inst.col_norms_sq()[i], tau)?.abs());
    }
    Ok(worst.min(0.5 * tau))
}

/// Zeroes the `active` coordinates of `state`.
pub fn set_active_to_zero(inst: &Instance, mut state: SolverState, active: &[usize]) -> Result<SolverState> {
    for &i in active {
        let xi = *state.x().get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            dim: inst.n(),
        })?;
        if xi != 0.0 {
            state.apply_coordinate_delta(inst, i, -xi)?;
        }
    }
    Ok(state)
}

/// Result of the adaptive ε search.
#[derive(Debug, Clone)]
pub struct EpsilonSearch {
    pub estimate: EstimateResult,
    pub state: SolverState,
    /// Number of reductions `h` in `ε = θ^h ε̃`.
    pub backtracks: u32,
    /// True when the cap was reached and zeroing fell back to a no-op.
    pub capped: bool,
}

/// Finds the smallest `h` such that zeroing the estimate at `ε = θ^h ε̃`
/// gives `f(y) ≤ f(x) − γ‖y − x‖²`.
///
/// After [`EPS_BACKTRACK_CAP`] reductions the active indices with `x_i ≠ 0`
/// are moved to the non-active set, so `y = x` and the inequality holds.
pub fn epsilon_linesearch(
    inst: &Instance,
    state: &SolverState,
    g: &[f64],
    params: &EstimateParams,
) -> Result<EpsilonSearch> {
    params.validate()?;
    check_len("epsilon_linesearch g", inst.n(), g)?;
    let f_x = state.f_uncached(inst);
    let mut eps = params.eps_bar;
    for h in 0..=EPS_BACKTRACK_CAP {
        let est = estimate_at(inst.tau(), state.x(), g, eps)?;
        let mut y = set_active_to_zero(inst, state.clone(), &est.active)?;
        let step_sq = dist_sq(y.x(), state.x());
        if step_sq == 0.0 || y.f(inst) <= f_x - params.gamma * step_sq {
            return Ok(EpsilonSearch {
                estimate: est,
                state: y,
                backtracks: h,
                capped: false,
            });
        }
        eps *= params.theta;
    }
    let est = estimate_at(inst.tau(), state.x(), g, eps)?;
    let x = state.x();
    let (active, moved): (Vec<usize>, Vec<usize>) = est.active.into_iter().partition(|&i| x[i] == 0.0);
    let mut nonactive = est.nonactive;
    nonactive.extend(moved);
    nonactive.sort_unstable();
    Ok(EpsilonSearch {
        estimate: EstimateResult {
            active,
            nonactive,
            epsilon_used: eps,
        },
        state: state.clone(),
        backtracks: EPS_BACKTRACK_CAP,
        capped: true,
    })
}

/// Splits the non-active set by gradient sign: `N⁺ = {g_i ≤ 0}`, `N⁻ = {g_i > 0}`.
pub fn split_nonactive_by_sign(g: &[f64], nonactive: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    if let Some(&bad) = nonactive.iter().find(|&&i| i >= g.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            dim: g.len(),
        });
    }
    Ok(nonactive.iter().partition(|&&i| g[i] <= 0.0))
}
