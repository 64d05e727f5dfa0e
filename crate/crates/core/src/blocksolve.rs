//! Exact minimizers for one- and two-variable ℓ1-regularized quadratic
//! blocks, plus per-coordinate optimality measures.
//!
//! A block subproblem at the running point `y` is
//! `min_w gᵀ(w − y) + ½(w − y)ᵀH(w − y) + τ‖w‖₁`.

use crate::error::{check_len, Error, Result};
use crate::linalg::dot;
use crate::problem::{Instance, SolverState};

/// Median of three reals.
#[inline]
pub fn mid(a: f64, b: f64, c: f64) -> f64 {
    a.min(b).max(a.max(b).min(c))
}

/// `Φ_i = −mid{(g−τ)/H, x, (g+τ)/H}`; zero exactly at coordinates that
/// satisfy the optimality conditions.
pub fn phi(x_i: f64, g_i: f64, h_ii: f64, tau: f64) -> Result<f64> {
    if !(h_ii > 0.0) {
        return Err(Error::AssumptionViolation(format!("H_ii must be positive, got {h_ii}")));
    }
    Ok(-mid((g_i - tau) / h_ii, x_i, (g_i + tau) / h_ii))
}

/// First-order violation: ignores how close `x_i` is to zero.
pub fn violation_first_order(x_i: f64, g_i: f64, tau: f64) -> f64 {
    if x_i > 0.0 {
        (g_i + tau).abs()
    } else if x_i < 0.0 {
        (g_i - tau).abs()
    } else {
        0.0f64.max(-(g_i + tau)).max(g_i - tau)
    }
}

/// Optimality violation of one coordinate.
#[inline]
pub fn kkt_violation(x_i: f64, g_i: f64, tau: f64) -> f64 {
    if x_i > 0.0 {
        (g_i + tau).abs()
    } else if x_i < 0.0 {
        (g_i - tau).abs()
    } else {
        (g_i.abs() - tau).max(0.0)
    }
}

/// Largest per-coordinate optimality violation; zero iff `x` is optimal.
pub fn kkt_max_violation(inst: &Instance, x: &[f64], g: &[f64]) -> Result<f64> {
    check_len("kkt_max_violation x", inst.n(), x)?;
    check_len("kkt_max_violation g", inst.n(), g)?;
    let tau = inst.tau();
    Ok(x.iter()
        .zip(g)
        .fold(0.0, |acc, (&xi, &gi)| acc.max(kkt_violation(xi, gi, tau))))
}

#[inline]
pub fn soft_threshold(u: f64, kappa: f64) -> f64 {
    u.signum() * (u.abs() - kappa).max(0.0)
}

/// One-variable block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block1 {
    pub g: f64,
    pub h: f64,
    pub y: f64,
    pub tau: f64,
}

/// Two-variable block; `h` must be symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block2 {
    pub g: [f64; 2],
    pub h: [[f64; 2]; 2],
    pub y: [f64; 2],
    pub tau: f64,
}

/// A block subproblem assembled at the current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockSubproblem {
    Single(Block1),
    Pair(Block2),
}

impl BlockSubproblem {
    /// Gathers `g_J = A_Jᵀ r`, `H_JJ` and `y_J` from the maintained residual.
    pub fn at(inst: &Instance, state: &SolverState, block: &[usize]) -> Result<Self> {
        let n = inst.n();
        if let Some(&bad) = block.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, dim: n });
        }
        let a = inst.a();
        let r = state.residual();
        let tau = inst.tau();
        match *block {
            [i] => Ok(BlockSubproblem::Single(Block1 {
                g: dot(a.col(i), r),
                h: inst.col_norms_sq()[i],
                y: state.x()[i],
                tau,
            })),
            [i, j] if i != j => {
                let off = dot(a.col(i), a.col(j));
                Ok(BlockSubproblem::Pair(Block2 {
                    g: [dot(a.col(i), r), dot(a.col(j), r)],
                    h: [[inst.col_norms_sq()[i], off], [off, inst.col_norms_sq()[j]]],
                    y: [state.x()[i], state.x()[j]],
                    tau,
                }))
            }
            _ => Err(Error::InvalidParameter(format!(
                "blocks must hold one or two distinct indices, got {block:?}"
            ))),
        }
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        match self {
            BlockSubproblem::Single(b) => solve_block_1d(b).map(|w| vec![w]),
            BlockSubproblem::Pair(b) => solve_block_2d(b).map(|w| w.to_vec()),
        }
    }

    /// Smallest eigenvalue of the block Hessian.
    pub fn lambda_min(&self) -> f64 {
        match self {
            BlockSubproblem::Single(b) => b.h,
            BlockSubproblem::Pair(b) => lambda_min_2x2(&b.h),
        }
    }
}

/// Soft-threshold closed form: `w = sign(u)·max(|u| − τ/H, 0)`, `u = y − g/H`.
pub fn solve_block_1d(p: &Block1) -> Result<f64> {
    if !(p.h > 0.0) {
        return Err(Error::AssumptionViolation(format!(
            "1D block curvature must be positive, got {}",
            p.h
        )));
    }
    Ok(soft_threshold(p.y - p.g / p.h, p.tau / p.h))
}

pub fn lambda_min_2x2(h: &[[f64; 2]; 2]) -> f64 {
    let (a, b, c) = (h[0][0], 0.5 * (h[0][1] + h[1][0]), h[1][1]);
    let half_trace = 0.5 * (a + c);
    let half_gap = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    half_trace - half_gap
}

/// Sign patterns in the order they are tried.
const PATTERNS: [[i8; 2]; 9] = [
    [0, 0],
    [1, 0],
    [-1, 0],
    [0, 1],
    [0, -1],
    [1, 1],
    [1, -1],
    [-1, 1],
    [-1, -1],
];

/// Exact minimizer of a two-variable block.
///
/// Enumerates the nine sign patterns of the solution. For each pattern the
/// stationarity system on the nonzero coordinates (with subgradient `τ·s`)
/// is solved; the pattern is accepted when the nonzero coordinates carry
/// their assumed signs and the zero coordinates satisfy `|∇_i| ≤ τ`. The
/// objective is strictly convex, so any accepted pattern gives the unique
/// minimizer. If rounding rejects every pattern at a sign boundary, the
/// sign-projected candidate with the lowest objective is returned.
pub fn solve_block_2d(p: &Block2) -> Result<[f64; 2]> {
    let h = [
        [p.h[0][0], 0.5 * (p.h[0][1] + p.h[1][0])],
        [0.5 * (p.h[0][1] + p.h[1][0]), p.h[1][1]],
    ];
    let trace = h[0][0] + h[1][1];
    let pd_tol = 1e-12 * trace.abs();
    let lmin = lambda_min_2x2(&h);
    if !(lmin > pd_tol) || !(h[0][0] > 0.0) || !(h[1][1] > 0.0) {
        return Err(Error::AssumptionViolation(format!(
            "2D block Hessian is not positive definite (λmin = {lmin:e}, tolerance {pd_tol:e})"
        )));
    }
    let tau = p.tau;
    let objective = |w: [f64; 2]| {
        let d = [w[0] - p.y[0], w[1] - p.y[1]];
        let hd = [h[0][0] * d[0] + h[0][1] * d[1], h[1][0] * d[0] + h[1][1] * d[1]];
        p.g[0] * d[0] + p.g[1] * d[1] + 0.5 * (d[0] * hd[0] + d[1] * hd[1]) + tau * (w[0].abs() + w[1].abs())
    };

    let mut fallback: Option<([f64; 2], f64)> = None;
    for s in PATTERNS {
        let sf = [f64::from(s[0]), f64::from(s[1])];
        let w = pattern_candidate(p, &h, sf);
        if pattern_verified(p, &h, sf, w) {
            return Ok(w);
        }
        let projected = [
            if sf[0] * w[0] < 0.0 { 0.0 } else { w[0] },
            if sf[1] * w[1] < 0.0 { 0.0 } else { w[1] },
        ];
        let val = objective(projected);
        if fallback.is_none_or(|(_, best)| val < best) {
            fallback = Some((projected, val));
        }
    }
    Ok(fallback.expect("nine candidates evaluated").0)
}

/// Solves stationarity `g + H(w − y) + τ s = 0` on the coordinates with
/// `s ≠ 0`, fixing `w_i = 0` where `s_i = 0`.
fn pattern_candidate(p: &Block2, h: &[[f64; 2]; 2], s: [f64; 2]) -> [f64; 2] {
    let tau = p.tau;
    match (s[0] != 0.0, s[1] != 0.0) {
        (false, false) => [0.0, 0.0],
        (true, false) => {
            let d1 = -p.y[1];
            let d0 = -(p.g[0] + tau * s[0] + h[0][1] * d1) / h[0][0];
            [p.y[0] + d0, 0.0]
        }
        (false, true) => {
            let d0 = -p.y[0];
            let d1 = -(p.g[1] + tau * s[1] + h[1][0] * d0) / h[1][1];
            [0.0, p.y[1] + d1]
        }
        (true, true) => {
            let rhs = [-(p.g[0] + tau * s[0]), -(p.g[1] + tau * s[1])];
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let d0 = (rhs[0] * h[1][1] - h[0][1] * rhs[1]) / det;
            let d1 = (h[0][0] * rhs[1] - h[1][0] * rhs[0]) / det;
            [p.y[0] + d0, p.y[1] + d1]
        }
    }
}

fn pattern_verified(p: &Block2, h: &[[f64; 2]; 2], s: [f64; 2], w: [f64; 2]) -> bool {
    let d = [w[0] - p.y[0], w[1] - p.y[1]];
    (0..2).all(|i| {
        if s[i] != 0.0 {
            s[i] * w[i] >= 0.0
        } else {
            let hd = h[i][0] * d[0] + h[i][1] * d[1];
            let grad = p.g[i] + hd;
            let slack = 1e-14 * (p.tau + p.g[i].abs() + h[i][0].abs() * d[0].abs() + h[i][1].abs() * d[1].abs());
            grad.abs() <= p.tau + slack
        }
    })
}
