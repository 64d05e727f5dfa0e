//! Problem data, objective arithmetic and solver state for
//! `min ½‖Ax − b‖² + τ‖x‖₁`.

mod generate;
mod io;

pub use generate::{generate_instance, GeneratorKind, DEFAULT_DENSITY, DEFAULT_NOISE_VAR};
pub use io::{load_instance, read_instance, save_instance, write_instance, MAGIC};

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm1, norm_inf, DenseMatrix};

/// Generator provenance attached to an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMeta {
    pub kind: GeneratorKind,
    pub seed: u64,
    pub rho: f64,
    pub density: f64,
    pub noise_var: f64,
}

impl Default for InstanceMeta {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::Custom,
            seed: 0,
            rho: 0.0,
            density: 0.0,
            noise_var: 0.0,
        }
    }
}

/// Problem data `(A, b, τ)` plus an optional ground-truth signal.
///
/// Immutable after construction; every column of `A` has positive norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    a: DenseMatrix,
    b: Vec<f64>,
    tau: f64,
    x_true: Option<Vec<f64>>,
    meta: InstanceMeta,
    col_norms_sq: Vec<f64>,
}

impl Instance {
    pub fn new(a: DenseMatrix, b: Vec<f64>, tau: f64) -> Result<Self> {
        Self::with_parts(a, b, tau, None, InstanceMeta::default())
    }

    pub fn with_parts(
        a: DenseMatrix,
        b: Vec<f64>,
        tau: f64,
        x_true: Option<Vec<f64>>,
        meta: InstanceMeta,
    ) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!("empty design matrix {m}x{n}")));
        }
        check_len("Instance b", m, &b)?;
        if let Some(xt) = &x_true {
            check_len("Instance x_true", n, xt)?;
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive and finite, got {tau}"
            )));
        }
        let col_norms_sq: Vec<f64> = (0..n).map(|j| dot(a.col(j), a.col(j))).collect();
        if let Some(j) = col_norms_sq.iter().position(|&h| !(h > 0.0)) {
            return Err(Error::AssumptionViolation(format!("column {j} of A has zero norm")));
        }
        Ok(Self {
            a,
            b,
            tau,
            x_true,
            meta,
            col_norms_sq,
        })
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::with_parts(
            self.a.clone(),
            self.b.clone(),
            tau,
            self.x_true.clone(),
            self.meta.clone(),
        )
    }

    #[inline]
    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    #[inline]
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn x_true(&self) -> Option<&[f64]> {
        self.x_true.as_deref()
    }

    pub fn meta(&self) -> &InstanceMeta {
        &self.meta
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    /// `H_ii = ‖A_i‖²`
    #[inline]
    pub fn col_norms_sq(&self) -> &[f64] {
        &self.col_norms_sq
    }

    /// Number of nonzeros in the ground truth, when known.
    pub fn true_support_size(&self) -> Option<usize> {
        self.x_true.as_ref().map(|x| x.iter().filter(|v| **v != 0.0).count())
    }

    /// `Ax − b`
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("residual x", self.n(), x)?;
        let mut r = self.a.matvec(x)?;
        axpy(-1.0, &self.b, &mut r);
        Ok(r)
    }
}

/// `½‖Ax − b‖² + τ‖x‖₁`
pub fn objective(inst: &Instance, x: &[f64]) -> Result<f64> {
    let r = inst.residual(x)?;
    Ok(objective_from_residual(inst.tau(), x, &r))
}

#[inline]
pub(crate) fn objective_from_residual(tau: f64, x: &[f64], residual: &[f64]) -> f64 {
    0.5 * dot(residual, residual) + tau * norm1(x)
}

/// Gradient of the smooth part, `Aᵀ r` with `r = Ax − b`.
pub fn gradient_q(inst: &Instance, residual: &[f64]) -> Result<Vec<f64>> {
    check_len("gradient_q residual", inst.m(), residual)?;
    inst.a().tr_matvec(residual)
}

/// `(AᵀA)_JJ` as a dense symmetric `|J|×|J|` matrix.
pub fn hessian_block(inst: &Instance, block: &[usize]) -> Result<Vec<Vec<f64>>> {
    let n = inst.n();
    for (p, &i) in block.iter().enumerate() {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, dim: n });
        }
        if block[..p].contains(&i) {
            return Err(Error::InvalidParameter(format!("duplicate index {i} in block")));
        }
    }
    let k = block.len();
    let mut h = vec![vec![0.0; k]; k];
    for p in 0..k {
        h[p][p] = inst.col_norms_sq()[block[p]];
        for q in p + 1..k {
            let v = dot(inst.a().col(block[p]), inst.a().col(block[q]));
            h[p][q] = v;
            h[q][p] = v;
        }
    }
    Ok(h)
}

/// Current iterate with its maintained residual `Ax − b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub(crate) x: Vec<f64>,
    pub(crate) residual: Vec<f64>,
    pub(crate) col_norms_sq: Vec<f64>,
    f_value: Option<f64>,
    pub outer_iter: usize,
}

impl SolverState {
    pub fn new(inst: &Instance, x: Vec<f64>) -> Result<Self> {
        let residual = inst.residual(&x)?;
        Ok(Self {
            x,
            residual,
            col_norms_sq: inst.col_norms_sq().to_vec(),
            f_value: None,
            outer_iter: 0,
        })
    }

    pub fn zeros(inst: &Instance) -> Self {
        Self {
            x: vec![0.0; inst.n()],
            residual: inst.b().iter().map(|v| -v).collect(),
            col_norms_sq: inst.col_norms_sq().to_vec(),
            f_value: None,
            outer_iter: 0,
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn col_norms_sq(&self) -> &[f64] {
        &self.col_norms_sq
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }

    pub fn cached_f(&self) -> Option<f64> {
        self.f_value
    }

    /// Objective at the current iterate, cached until the next update.
    pub fn f(&mut self, inst: &Instance) -> f64 {
        match self.f_value {
            Some(f) => f,
            None => {
                let f = objective_from_residual(inst.tau(), &self.x, &self.residual);
                self.f_value = Some(f);
                f
            }
        }
    }

    /// Objective without touching the cache.
    pub fn f_uncached(&self, inst: &Instance) -> f64 {
        self.f_value
            .unwrap_or_else(|| objective_from_residual(inst.tau(), &self.x, &self.residual))
    }

    /// `x_i += delta` with the matching O(m) residual update.
    pub fn apply_coordinate_delta(&mut self, inst: &Instance, i: usize, delta: f64) -> Result<()> {
        if i >= self.x.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: self.x.len(),
            });
        }
        if delta == 0.0 {
            return Ok(());
        }
        self.x[i] += delta;
        axpy(delta, inst.a().col(i), &mut self.residual);
        self.f_value = None;
        Ok(())
    }

    /// Sets `x_i = value` (residual updated incrementally).
    pub fn set_coordinate(&mut self, inst: &Instance, i: usize, value: f64) -> Result<()> {
        let delta = value
            - self.x.get(i).copied().ok_or(Error::IndexOutOfRange {
                index: i,
                dim: self.x.len(),
            })?;
        if delta == 0.0 {
            return Ok(());
        }
        self.x[i] = value;
        axpy(delta, inst.a().col(i), &mut self.residual);
        self.f_value = None;
        Ok(())
    }

    /// Recomputes the residual from scratch, discarding accumulated drift.
    pub fn resync(&mut self, inst: &Instance) {
        self.residual = inst.residual(&self.x).expect("state dimensions match instance");
        self.f_value = None;
    }

    /// `‖residual − (Ax − b)‖∞`
    pub fn residual_drift(&self, inst: &Instance) -> f64 {
        let exact = inst.residual(&self.x).expect("state dimensions match instance");
        self.residual
            .iter()
            .zip(&exact)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// Stopping scale used by the residual invariant: `1e-10·(1 + ‖b‖∞)`.
pub fn residual_tolerance(inst: &Instance) -> f64 {
    1e-10 * (1.0 + norm_inf(inst.b()))
}
