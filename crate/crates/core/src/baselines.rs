//! ISTA and FISTA reference solvers.

use std::time::Instant;

use crate::blocksolve::{kkt_max_violation, soft_threshold};
use crate::driver::{relative_error, SolveFailure, TARGET_REL_SLACK};
use crate::error::{check_len, Error, Result};
use crate::linalg::gram_lambda_max;
use crate::problem::{gradient_q, objective_from_residual, Instance};
use crate::trace::{IterationRecord, RunTrace, Solution, Status};

#[derive(Debug, Clone, PartialEq)]
pub struct ProxConfig {
    /// Curvature `L` of the proximal model; `None` estimates `λmax(AᵀA)` by power iteration.
    pub step_coeff: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub power_tol: f64,
    pub power_max_iter: usize,
}

impl Default for ProxConfig {
    fn default() -> Self {
        Self {
            step_coeff: None,
            tol: 1e-6,
            max_iter: 1000,
            power_tol: 1e-10,
            power_max_iter: 10_000,
        }
    }
}

impl ProxConfig {
    fn lipschitz(&self, inst: &Instance) -> Result<f64> {
        match self.step_coeff {
            Some(l) if l > 0.0 && l.is_finite() => Ok(l),
            Some(l) => Err(Error::InvalidParameter(format!(
                "step coefficient must be positive, got {l}"
            ))),
            // The power-iteration estimate sits slightly below λmax.
            None => Ok(gram_lambda_max(inst.a(), self.power_tol, self.power_max_iter)? * (1.0 + 1e-6)),
        }
    }
}

/// `x⁺ = soft(x − g/L, τ/L)`
pub fn ista_step(inst: &Instance, x: &[f64], g: &[f64], lipschitz: f64) -> Result<Vec<f64>> {
    check_len("ista_step x", inst.n(), x)?;
    check_len("ista_step g", inst.n(), g)?;
    if !(lipschitz > 0.0) {
        return Err(Error::InvalidParameter(format!("L must be positive, got {lipschitz}")));
    }
    let kappa = inst.tau() / lipschitz;
    Ok(x.iter()
        .zip(g)
        .map(|(&xi, &gi)| soft_threshold(xi - gi / lipschitz, kappa))
        .collect())
}

pub fn ista_solve(inst: &Instance, cfg: &ProxConfig) -> Result<(Solution, RunTrace), SolveFailure> {
    run(inst, cfg, false, None)
}

pub fn fista_solve(inst: &Instance, cfg: &ProxConfig) -> Result<(Solution, RunTrace), SolveFailure> {
    run(inst, cfg, true, None)
}

pub fn ista_to_target(inst: &Instance, cfg: &ProxConfig, f_target: f64) -> Result<(Solution, RunTrace), SolveFailure> {
    run(inst, cfg, false, Some(f_target))
}

pub fn fista_to_target(inst: &Instance, cfg: &ProxConfig, f_target: f64) -> Result<(Solution, RunTrace), SolveFailure> {
    run(inst, cfg, true, Some(f_target))
}

fn run(
    inst: &Instance,
    cfg: &ProxConfig,
    accelerated: bool,
    target: Option<f64>,
) -> Result<(Solution, RunTrace), SolveFailure> {
    let mut trace = RunTrace::default();
    match run_inner(inst, cfg, accelerated, target, &mut trace) {
        Ok(sol) => Ok((sol, trace)),
        Err(error) => Err(SolveFailure { error, trace }),
    }
}

fn run_inner(
    inst: &Instance,
    cfg: &ProxConfig,
    accelerated: bool,
    target: Option<f64>,
    trace: &mut RunTrace,
) -> Result<Solution> {
    if let Some(t) = target {
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!("target must be finite, got {t}")));
        }
    }
    let start = Instant::now();
    let lipschitz = cfg.lipschitz(inst)?;
    let n = inst.n();
    let tau = inst.tau();

    let mut x = vec![0.0; n];
    let mut r = inst.residual(&x)?;
    let mut g = gradient_q(inst, &r)?;
    let mut y = x.clone();
    let mut g_y = g.clone();
    let mut t = 1.0f64;

    for k in 0.. {
        let f = objective_from_residual(tau, &x, &r);
        let kkt = kkt_max_violation(inst, &x, &g)?;
        let nnz = x.iter().filter(|v| **v != 0.0).count();
        trace.push(IterationRecord {
            iter: k,
            f,
            elapsed_s: start.elapsed().as_secs_f64(),
            n_nonactive: nnz,
            n_active: n - nnz,
            kkt_violation: kkt,
            epsilon: None,
            enhanced: false,
            rel_error: relative_error(inst, &x),
        });
        let status = match target {
            Some(tv) if f <= tv + TARGET_REL_SLACK * (1.0 + tv.abs()) => Some(Status::TargetReached),
            None if kkt <= cfg.tol => Some(Status::Optimal),
            _ if k >= cfg.max_iter => Some(Status::MaxIter),
            _ => None,
        };
        if let Some(status) = status {
            return Ok(Solution {
                x,
                f,
                status,
                iterations: k,
                kkt_violation: kkt,
            });
        }

        let x_new = ista_step(inst, &y, &g_y, lipschitz)?;
        let r_new = inst.residual(&x_new)?;
        let g_new = gradient_q(inst, &r_new)?;
        if accelerated {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_new;
            // The gradient is affine in the point, so g(y) follows from g(x) values.
            y = x_new.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
            g_y = g_new.iter().zip(&g).map(|(a, b)| (1.0 + beta) * a - beta * b).collect();
            t = t_new;
        } else {
            if target.is_some() && x_new == x {
                return Ok(Solution {
                    x,
                    f,
                    status: Status::MaxIter,
                    iterations: k,
                    kkt_violation: kkt,
                });
            }
            y = x_new.clone();
            g_y = g_new.clone();
        }
        x = x_new;
        r = r_new;
        g = g_new;
    }
    unreachable!("iteration loop only exits by returning")
}
