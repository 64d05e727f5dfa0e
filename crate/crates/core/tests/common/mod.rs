#![allow(dead_code)]

use fastbcd::linalg::DenseMatrix;
use fastbcd::rng::Stream;
use fastbcd::Instance;
use nalgebra::{DMatrix, SymmetricEigen};

/// Gaussian `m×n` instance with `τ = tau_scale·‖Aᵀb‖∞`.
pub fn gaussian_instance(rng: &mut Stream, m: usize, n: usize, tau_scale: f64) -> Instance {
    let data: Vec<f64> = (0..m * n).map(|_| rng.normal()).collect();
    let a = DenseMatrix::from_col_major(m, n, data).unwrap();
    let b: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
    let atb = a.tr_matvec(&b).unwrap();
    let tau = tau_scale * atb.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    Instance::new(a, b, tau.max(1e-3)).unwrap()
}

/// Random point with roughly `zero_frac` exact zeros.
pub fn random_point(rng: &mut Stream, n: usize, scale: f64, zero_frac: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.uniform() < zero_frac {
                0.0
            } else {
                scale * rng.normal()
            }
        })
        .collect()
}

pub fn to_nalgebra(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(a.rows(), a.cols(), a.as_col_major())
}

/// Eigenvalues of `AᵀA`, ascending, from a dense symmetric solver.
pub fn gram_eigenvalues(inst: &Instance) -> Vec<f64> {
    let a = to_nalgebra(inst.a());
    let mut ev: Vec<f64> = SymmetricEigen::new(a.transpose() * &a)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn lambda_max(inst: &Instance) -> f64 {
    *gram_eigenvalues(inst).last().unwrap()
}

/// `½‖Ax − b‖² + τ‖x‖₁` by explicit row sums.
pub fn objective_naive(inst: &Instance, x: &[f64]) -> f64 {
    let a = inst.a();
    let mut quad = 0.0;
    for i in 0..a.rows() {
        let mut ri = -inst.b()[i];
        for (j, xj) in x.iter().enumerate() {
            ri += a.get(i, j) * xj;
        }
        quad += ri * ri;
    }
    0.5 * quad + inst.tau() * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// `Aᵀ(Ax − b)` through nalgebra.
pub fn gradient_naive(inst: &Instance, x: &[f64]) -> Vec<f64> {
    let a = to_nalgebra(inst.a());
    let r = &a * DMatrix::from_column_slice(x.len(), 1, x) - DMatrix::from_column_slice(inst.m(), 1, inst.b());
    (a.transpose() * r).iter().copied().collect()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

use fastbcd::blocksolve::Block2;

/// `gᵀ(w − y) + ½(w − y)ᵀH(w − y) + τ‖w‖₁` for a two-variable block.
pub fn block2_objective(p: &Block2, w: [f64; 2]) -> f64 {
    let d = [w[0] - p.y[0], w[1] - p.y[1]];
    let quad = p.h[0][0] * d[0] * d[0] + 2.0 * p.h[0][1] * d[0] * d[1] + p.h[1][1] * d[1] * d[1];
    p.g[0] * d[0] + p.g[1] * d[1] + 0.5 * quad + p.tau * (w[0].abs() + w[1].abs())
}

/// Block KKT residual at `w`: subgradient mismatch of each coordinate.
pub fn block2_kkt_residual(p: &Block2, w: [f64; 2]) -> f64 {
    let d = [w[0] - p.y[0], w[1] - p.y[1]];
    (0..2)
        .map(|i| {
            let t = p.g[i] + p.h[i][0] * d[0] + p.h[i][1] * d[1];
            if w[i] > 0.0 {
                (t + p.tau).abs()
            } else if w[i] < 0.0 {
                (t - p.tau).abs()
            } else {
                (t.abs() - p.tau).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Well-conditioned random block whose minimizer lies well inside `[−3, 3]²`.
pub fn random_block2(rng: &mut Stream) -> Block2 {
    loop {
        let m: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let h00 = m[0] * m[0] + m[1] * m[1] + m[2] * m[2];
        let h11 = m[3] * m[3] + m[4] * m[4] + m[5] * m[5];
        let h01 = m[0] * m[3] + m[1] * m[4] + m[2] * m[5];
        let tr = h00 + h11;
        let lmin = 0.5 * (tr - ((h00 - h11).powi(2) + 4.0 * h01 * h01).sqrt());
        if lmin < 0.1 * tr {
            continue;
        }
        let p = Block2 {
            g: [rng.normal(), rng.normal()],
            h: [[h00, h01], [h01, h11]],
            y: [0.5 * rng.normal(), 0.5 * rng.normal()],
            tau: 0.05 + rng.uniform(),
        };
        if let Some(w) = grid_argmin_2d(&p, 201) {
            if w[0].abs() < 2.5 && w[1].abs() < 2.5 {
                return p;
            }
        }
    }
}

/// Brute-force minimizer: a `points²` grid on `[−3, 3]²`, then repeated
/// local grids around the incumbent. `None` if the coarse optimum sits on
/// the boundary.
pub fn grid_argmin_2d(p: &Block2, points: usize) -> Option<[f64; 2]> {
    let step = 6.0 / (points - 1) as f64;
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    let mut edge = false;
    for i in 0..points {
        let u = -3.0 + step * i as f64;
        for j in 0..points {
            let w = [u, -3.0 + step * j as f64];
            let v = block2_objective(p, w);
            if v < best.0 {
                best = (v, w);
                edge = i == 0 || j == 0 || i == points - 1 || j == points - 1;
            }
        }
    }
    if edge {
        return None;
    }
    let mut h = step;
    for _ in 0..14 {
        let c = best.1;
        for i in 0..=20 {
            for j in 0..=20 {
                let w = [c[0] + h * (i as f64 - 10.0) / 5.0, c[1] + h * (j as f64 - 10.0) / 5.0];
                let v = block2_objective(p, w);
                if v < best.0 {
                    best = (v, w);
                }
            }
        }
        // Also try snapping each coordinate onto the kink at zero.
        for w in [[0.0, best.1[1]], [best.1[0], 0.0], [0.0, 0.0]] {
            let v = block2_objective(p, w);
            if v <= best.0 {
                best = (v, w);
            }
        }
        h /= 5.0;
    }
    Some(best.1)
}
