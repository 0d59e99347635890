//! `kσ_k(D²u) = ∂ᵢ(L_{σ_k}^{ij} uⱼ)` with `L_{σ_k} = ∂σ_k/∂(D²u)`.

use rayon::prelude::*;

use super::HarnessError;
use crate::grid::{Grid, GridField};
use crate::solver::{discrete_hessian, ExactSolution};
use crate::spectral::{eigen_sym, elementary_symmetric, SymMatrix};

fn check_k(k: usize, n: usize) -> Result<(), HarnessError> {
    if k == 0 || k > n {
        return Err(HarnessError::BadK { k, n });
    }
    Ok(())
}

/// `∂σ_k/∂M = Q diag(σ_{k−1}(λ|i)) Qᵀ` together with `σ_k(M)`.
pub fn newton_tensor(m: &SymMatrix, k: usize) -> Result<(SymMatrix, f64), HarnessError> {
    let n = m.dim();
    check_k(k, n)?;
    let e = eigen_sym(m)?;
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let rest: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| e.values[j]).collect();
            elementary_symmetric(&rest)[k - 1]
        })
        .collect();
    let sigma = elementary_symmetric(&e.values)[k];
    Ok((SymMatrix::from_eigen(&diag, &e.vectors), sigma))
}

fn central_gradient(u: &GridField, p: usize) -> Vec<f64> {
    let g = &u.grid;
    (0..g.dim())
        .map(|i| {
            let s = g.stride(i);
            (u.data[p + s] - u.data[p - s]) / (2.0 * g.h()[i])
        })
        .collect()
}

/// Largest `|kσ_k(D²_h u) − div_h(L Du)|` over nodes at depth ≥ 2.
///
/// The divergence uses fluxes on the half-nodes `p + ½eᵢ`: the normal
/// derivative is the one-sided difference, tangential derivatives and `L` are
/// averaged from the two neighbours. For `k = 1` this reproduces the
/// five-point Laplacian.
pub fn divergence_identity_check(u: &GridField, k: usize) -> Result<f64, HarnessError> {
    let g = &u.grid;
    let n = g.dim();
    check_k(k, n)?;
    if g.points().iter().any(|&m| m < 5) {
        return Err(HarnessError::Coarse("need at least 5 points per axis".into()));
    }
    let interior = g.interior_nodes();
    let mut slot = vec![usize::MAX; g.len()];
    for (s, &p) in interior.iter().enumerate() {
        slot[p] = s;
    }
    let local: Vec<(SymMatrix, f64, Vec<f64>)> = interior
        .par_iter()
        .map(|&p| {
            let (l, sigma) = newton_tensor(&discrete_hessian(u, p)?, k)?;
            Ok((l, sigma, central_gradient(u, p)))
        })
        .collect::<Result<_, HarnessError>>()?;
    let h = g.h();
    let flux = |p: usize, q: usize, i: usize| -> f64 {
        let (lp, _, dp) = &local[slot[p]];
        let (lq, _, dq) = &local[slot[q]];
        (0..n)
            .map(|j| {
                let d = if j == i {
                    (u.data[q] - u.data[p]) / h[i]
                } else {
                    0.5 * (dp[j] + dq[j])
                };
                0.5 * (lp.get(i, j) + lq.get(i, j)) * d
            })
            .sum()
    };
    let deep: Vec<usize> = interior.iter().copied().filter(|&p| g.depth(p) >= 2).collect();
    let worst = deep
        .par_iter()
        .map(|&p| {
            let div: f64 = (0..n)
                .map(|i| {
                    let s = g.stride(i);
                    (flux(p, p + s, i) - flux(p - s, p, i)) / h[i]
                })
                .sum();
            (k as f64 * local[slot[p]].1 - div).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Same identity with the analytic flux `L(D²u)Du` and a central difference
/// of step `h` for the divergence, over the interior nodes of `grid`.
pub fn divergence_identity_analytic(exact: &ExactSolution, grid: &Grid, k: usize) -> Result<f64, HarnessError> {
    let n = grid.dim();
    check_k(k, n)?;
    let h = grid.h();
    let flux = |x: &[f64], i: usize| -> Result<f64, HarnessError> {
        let (l, _) = newton_tensor(&exact.hessian(x), k)?;
        let du = exact.gradient(x);
        Ok((0..n).map(|j| l.get(i, j) * du[j]).sum())
    };
    let vals: Vec<f64> = grid
        .interior_nodes()
        .par_iter()
        .map(|&p| {
            let x = grid.coord(p);
            let (_, sigma) = newton_tensor(&exact.hessian(&x), k)?;
            let mut div = 0.0;
            for i in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h[i];
                xm[i] -= h[i];
                div += (flux(&xp, i)? - flux(&xm, i)?) / (2.0 * h[i]);
            }
            Ok((k as f64 * sigma - div).abs())
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}
