use std::fmt;
use std::str::FromStr;

use super::{Instance, InstanceMeta};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm_inf, DenseMatrix};
use crate::rng::Stream;

pub const DEFAULT_DENSITY: f64 = 0.5;
pub const DEFAULT_NOISE_VAR: f64 = 1e-3;

/// How the design matrix was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GeneratorKind {
    /// Column-normalized i.i.d. standard Gaussian matrix.
    P1,
    /// Column-normalized random sparse matrix with uniform(0,1) nonzeros.
    P2,
    /// User supplied data.
    Custom,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::P1 => "P1",
            GeneratorKind::P2 => "P2",
            GeneratorKind::Custom => "custom",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(GeneratorKind::P1),
            "p2" => Ok(GeneratorKind::P2),
            "custom" => Ok(GeneratorKind::Custom),
            other => Err(Error::InvalidParameter(format!("unknown generator kind '{other}'"))),
        }
    }
}

/// Draws a synthetic sparse-recovery instance.
///
/// Draw order (all from one stream): matrix entries column by column, spike
/// positions, spike signs, then the noise vector. Columns are scaled to unit
/// ℓ2 norm; a P2 column that comes out empty is redrawn. `τ = 0.1‖Aᵀb‖∞`.
pub fn generate_instance(
    kind: GeneratorKind,
    n: usize,
    m: usize,
    rho: f64,
    density: f64,
    noise_var: f64,
    seed: u64,
) -> Result<Instance> {
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "generators need 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidParameter(format!("rho must lie in (0, 1], got {rho}")));
    }
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be >= 0, got {noise_var}"
        )));
    }
    let spikes = (rho * m as f64).round() as usize;
    if spikes == 0 {
        return Err(Error::InvalidParameter(format!(
            "round(rho*m) = 0 for rho={rho}, m={m}: no spikes to place"
        )));
    }

    let mut rng = Stream::new(seed);
    let mut a = DenseMatrix::zeros(m, n);
    match kind {
        GeneratorKind::P1 => {
            for j in 0..n {
                for v in a.col_mut(j).iter_mut() {
                    *v = rng.normal();
                }
            }
        }
        GeneratorKind::P2 => {
            if !(density > 0.0 && density <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "density must lie in (0, 1], got {density}"
                )));
            }
            for j in 0..n {
                loop {
                    let col = a.col_mut(j);
                    for v in col.iter_mut() {
                        let keep = rng.uniform() < density;
                        let value = rng.uniform();
                        *v = if keep { value } else { 0.0 };
                    }
                    if col.iter().any(|v| *v != 0.0) {
                        break;
                    }
                }
            }
        }
        GeneratorKind::Custom => {
            return Err(Error::InvalidParameter("cannot generate a custom instance".into()));
        }
    }
    for j in 0..n {
        let norm = dot(a.col(j), a.col(j)).sqrt();
        if norm == 0.0 {
            return Err(Error::AssumptionViolation(format!("generated column {j} is zero")));
        }
        a.col_mut(j).iter_mut().for_each(|v| *v /= norm);
    }

    let positions = rng.choose_distinct(n, spikes);
    let mut x_true = vec![0.0; n];
    for &p in &positions {
        x_true[p] = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
    }

    let sigma = noise_var.sqrt();
    let mut b = a.matvec(&x_true)?;
    let noise: Vec<f64> = (0..m).map(|_| sigma * rng.normal()).collect();
    axpy(1.0, &noise, &mut b);

    let tau = 0.1 * norm_inf(&a.tr_matvec(&b)?);
    let meta = InstanceMeta {
        kind,
        seed,
        rho,
        density: if kind == GeneratorKind::P2 { density } else { 0.0 },
        noise_var,
    };
    Instance::with_parts(a, b, tau, Some(x_true), meta)
}
