//! Graph geometry, pointwise Jacobi inequalities and refinement monitors
//! evaluated on concrete solutions.
//!
//! Third and fourth derivatives always come from the analytic evaluators of
//! [`ExactSolution`]; grid fields only enter through second differences.

mod divergence;
mod study;

pub use divergence::{divergence_identity_analytic, divergence_identity_check, newton_tensor};
pub use study::{hessian_bound_study, HessianStudy, StudyRow};

use rayon::prelude::*;
use thiserror::Error;

use crate::forms::{FormConstants, MAX_A};
use crate::grid::{Grid, GridError, GridField};
use crate::solver::{discrete_hessian, ExactSolution, SolveError};
use crate::spectral::{critical_phase, eigen_sym, SpectralError, SymMatrix};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("node {node} is not convex (λ_min = {lambda_min}); use the supercritical inequality")]
    NotConvex { node: usize, lambda_min: f64 },
    #[error("node {node} has supercritical margin {margin} below θ = {theta}")]
    Margin { node: usize, margin: f64, theta: f64 },
    #[error("σ_k order k = {k} outside 1..={n}")]
    BadK { k: usize, n: usize },
    #[error("ball radius {radius} exceeds the admissible {max}")]
    Radius { radius: f64, max: f64 },
    #[error("shift A = {0} must be at least 3")]
    SmallA(f64),
    #[error("grid has too few points for this check: {0}")]
    Coarse(String),
    #[error("no shift A up to {cap:e} clears the inequality; worst margin {worst:e}")]
    Calibration { cap: f64, worst: f64 },
    #[error("refinement study needs at least two grids")]
    Refinements,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Induced metric of the graph `(x, Du)` and the objects built from it.
#[derive(Clone, Debug)]
pub struct GraphGeometry {
    pub g: SymMatrix,
    pub g_inv: SymMatrix,
    /// `V = √det g`.
    pub v: f64,
    /// `|H| = |∇_g φ|`.
    pub mean_curv_norm: f64,
    /// First-order part of `Δ_g`, `−g⁻¹D²u Dφ`, in the original coordinates.
    /// In the eigenframe its entries are `−gⁱⁱλᵢφᵢ`.
    pub beltrami_drift: Vec<f64>,
    /// Hessian eigenvalues, descending.
    pub lambda: Vec<f64>,
    /// Row-major eigenbasis, eigenvector `k` in column `k`.
    pub frame: Vec<f64>,
}

impl GraphGeometry {
    /// Components of `v` along the eigenframe.
    pub fn to_frame(&self, v: &[f64]) -> Vec<f64> {
        let n = self.lambda.len();
        (0..n)
            .map(|k| (0..n).map(|r| self.frame[r * n + k] * v[r]).sum())
            .collect()
    }

    /// `Δ_g f = gⁱʲf_ij + drift·Df` from the derivatives of `f`.
    pub fn beltrami(&self, grad: &[f64], hess: &SymMatrix) -> f64 {
        self.g_inv.frobenius_dot(hess) + dot(&self.beltrami_drift, grad)
    }

    /// `|∇_g f|² = Df·g⁻¹Df`.
    pub fn grad_norm_sq(&self, grad: &[f64]) -> f64 {
        self.g_inv.bilinear(grad, grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Metric quantities at one point, computed in the Hessian eigenbasis and
/// rotated back.
pub fn graph_geometry(hessian: &SymMatrix, grad_phi: &[f64]) -> Result<GraphGeometry, HarnessError> {
    let e = eigen_sym(hessian)?;
    let n = e.dim();
    let g = e.map(|l| 1.0 + l * l);
    let g_inv = e.map(|l| 1.0 / (1.0 + l * l));
    let v = e.values.iter().map(|l| 1.0_f64.hypot(*l)).product();
    let mut geo = GraphGeometry {
        g,
        g_inv,
        v,
        mean_curv_norm: 0.0,
        beltrami_drift: vec![0.0; n],
        lambda: e.values.clone(),
        frame: e.vectors.clone(),
    };
    let phi_f = geo.to_frame(grad_phi);
    let mut h2 = 0.0;
    let mut drift_f = vec![0.0; n];
    for i in 0..n {
        let l = e.values[i];
        h2 += phi_f[i] * phi_f[i] / (1.0 + l * l);
        drift_f[i] = -l * phi_f[i] / (1.0 + l * l);
    }
    geo.mean_curv_norm = h2.sqrt();
    geo.beltrami_drift = (0..n)
        .map(|r| (0..n).map(|k| e.vectors[r * n + k] * drift_f[k]).sum())
        .collect();
    Ok(geo)
}

/// Everything the pointwise inequalities need at one point of an analytic
/// solution.
#[derive(Clone, Debug)]
pub struct NodeJet {
    pub geo: GraphGeometry,
    /// `u_{ijγ}` in the eigenframe, index `(i·n + j)·n + γ`.
    pub third: Vec<f64>,
    pub laplacian: f64,
    /// `D(Δu)` in the original coordinates.
    pub grad_lap: Vec<f64>,
    pub hess_lap: SymMatrix,
    pub grad_phi: Vec<f64>,
    pub lap_phi: f64,
}

impl NodeJet {
    pub fn at(exact: &ExactSolution, x: &[f64]) -> Result<Self, HarnessError> {
        let n = exact.dim();
        let hess = exact.hessian(x);
        let grad_phi = exact.phase_gradient(x);
        let geo = graph_geometry(&hess, &grad_phi)?;
        let mut raw = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    raw[(a * n + b) * n + c] = exact.third(x, a, b, c);
                }
            }
        }
        let q = &geo.frame;
        let mut third = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            for c in 0..n {
                                s += raw[(a * n + b) * n + c] * q[a * n + i] * q[b * n + j] * q[c * n + k];
                            }
                        }
                    }
                    third[(i * n + j) * n + k] = s;
                }
            }
        }
        let grad_lap = (0..n)
            .map(|c| (0..n).map(|i| raw[(i * n + i) * n + c]).sum())
            .collect();
        let mut hess_lap = SymMatrix::zeros(n);
        for a in 0..n {
            for b in a..n {
                let v = (0..n).map(|i| exact.fourth(x, i, i, a, b)).sum();
                hess_lap.set(a, b, v);
                hess_lap.set(b, a, v);
            }
        }
        Ok(Self {
            laplacian: hess.trace(),
            geo,
            third,
            grad_lap,
            hess_lap,
            lap_phi: exact.phase_laplacian(x),
            grad_phi,
        })
    }

    pub fn dim(&self) -> usize {
        self.geo.lambda.len()
    }

    fn t(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.third[(i * n + j) * n + k]
    }

    fn gii(&self, i: usize) -> f64 {
        let l = self.geo.lambda[i];
        1.0 / (1.0 + l * l)
    }

    /// The good third-order terms
    /// `Σ 2λᵢ(gⁱⁱ)²u²ᵢᵢγ + Σ_γ Σ_{i≠t} (λᵢ+λₜ)gⁱⁱgᵗᵗu²ᵢₜγ`.
    pub fn good_terms(&self) -> f64 {
        let n = self.dim();
        let lam = &self.geo.lambda;
        let mut s = 0.0;
        for g in 0..n {
            for i in 0..n {
                let gi = self.gii(i);
                s += 2.0 * lam[i] * gi * gi * self.t(i, i, g).powi(2);
                for t in 0..n {
                    if t != i {
                        s += (lam[i] + lam[t]) * gi * self.gii(t) * self.t(i, t, g).powi(2);
                    }
                }
            }
        }
        s
    }

    /// `Σ |λᵢ|(gⁱⁱ)²u²ᵢᵢγ`.
    pub fn diagonal_terms(&self) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for g in 0..n {
            for i in 0..n {
                let gi = self.gii(i);
                s += self.geo.lambda[i].abs() * gi * gi * self.t(i, i, g).powi(2);
            }
        }
        s
    }

    /// `gⁱʲ∂ᵢⱼΔu`.
    pub fn trace_operator_lap(&self) -> f64 {
        self.geo.g_inv.frobenius_dot(&self.hess_lap)
    }

    pub fn grad_phi_sq(&self) -> f64 {
        self.grad_phi.iter().map(|v| v * v).sum()
    }

    pub fn lagrangian_angle(&self) -> f64 {
        self.geo.lambda.iter().map(|l| l.atan()).sum()
    }
}

/// Margin of `Δ_g ln w − ε|∇_g ln w|² ≥ δ[ ]/w + Δφ/w − C|Dφ|²` with
/// `w = A + Δu`, at a convex point.
pub fn jacobi_residual_convex(
    exact: &ExactSolution,
    constants: &FormConstants,
    x: &[f64],
) -> Result<f64, HarnessError> {
    jacobi_residual_convex_at(exact, constants, x, usize::MAX)
}

fn check_shift(constants: &FormConstants) -> Result<(), HarnessError> {
    if !(constants.a >= 3.0) {
        return Err(HarnessError::SmallA(constants.a));
    }
    Ok(())
}

fn jacobi_residual_convex_at(
    exact: &ExactSolution,
    k: &FormConstants,
    x: &[f64],
    node: usize,
) -> Result<f64, HarnessError> {
    check_shift(k)?;
    let jet = NodeJet::at(exact, x)?;
    let lmin = *jet.geo.lambda.last().expect("n ≥ 1");
    if lmin < 0.0 {
        return Err(HarnessError::NotConvex {
            node,
            lambda_min: lmin,
        });
    }
    Ok(convex_margin(&jet, k))
}

fn convex_margin(jet: &NodeJet, k: &FormConstants) -> f64 {
    let w = k.a + jet.laplacian;
    let grad_sq = jet.geo.grad_norm_sq(&jet.grad_lap);
    let lhs = jet.geo.beltrami(&jet.grad_lap, &jet.hess_lap) / w - (1.0 + k.eps) * grad_sq / (w * w);
    let rhs = k.delta * jet.good_terms() / w + jet.lap_phi / w - k.c_big * jet.grad_phi_sq();
    lhs - rhs
}

/// `ε̂(θ) = min(μ, ½sin²θ)`, the smaller of the two supercritical branch
/// coefficients.
pub fn eps_hat(k: &FormConstants) -> f64 {
    k.mu.min(0.5 * k.theta.sin().powi(2))
}

/// Margin of `Δ_g w − (1+ε)|∇_gΔu|²/w ≥ ε̂Σ|λᵢ|(gⁱⁱ)²u²ᵢᵢγ − Ĉw|Dφ|² + Δφ`
/// with `w = A + Δu`, at a point whose phase clears `(n−2)π/2 + θ`.
pub fn jacobi_residual_supercritical(
    exact: &ExactSolution,
    constants: &FormConstants,
    x: &[f64],
) -> Result<f64, HarnessError> {
    jacobi_residual_supercritical_at(exact, constants, x, usize::MAX)
}

fn jacobi_residual_supercritical_at(
    exact: &ExactSolution,
    k: &FormConstants,
    x: &[f64],
    node: usize,
) -> Result<f64, HarnessError> {
    check_shift(k)?;
    let jet = NodeJet::at(exact, x)?;
    let margin = jet.lagrangian_angle() - critical_phase(jet.dim());
    if !(k.theta > 0.0) || margin < k.theta {
        return Err(HarnessError::Margin {
            node,
            margin,
            theta: k.theta,
        });
    }
    Ok(supercritical_margin(&jet, k))
}

fn supercritical_margin(jet: &NodeJet, k: &FormConstants) -> f64 {
    let w = k.a + jet.laplacian;
    let grad_sq = jet.geo.grad_norm_sq(&jet.grad_lap);
    let lhs = jet.geo.beltrami(&jet.grad_lap, &jet.hess_lap) - (1.0 + k.eps) * grad_sq / w;
    let rhs = eps_hat(k) * jet.diagonal_terms() - k.c_big * w * jet.grad_phi_sq() + jet.lap_phi;
    lhs - rhs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobiVariant {
    Convex,
    Supercritical,
}

/// Outcome of a Jacobi inequality sweep over grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiReport {
    pub variant: JacobiVariant,
    pub nodes_checked: usize,
    pub min_margin: f64,
    /// Smallest `margin/(A + Δu)`.
    pub min_scaled_margin: f64,
    pub worst_node: usize,
    pub violation_count: usize,
    pub constants: FormConstants,
}

impl JacobiReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

/// Relative tolerance on the Jacobi margins, in units of `A + Δu`.
pub const JACOBI_TOL: f64 = 1e-8;

/// Evaluates the chosen inequality at every interior node of `grid`.
pub fn jacobi_sweep(
    exact: &ExactSolution,
    constants: &FormConstants,
    grid: &Grid,
    variant: JacobiVariant,
) -> Result<JacobiReport, HarnessError> {
    let nodes = grid.interior_nodes();
    let margins: Vec<(f64, f64)> = nodes
        .par_iter()
        .map(|&p| {
            let x = grid.coord(p);
            let m = match variant {
                JacobiVariant::Convex => jacobi_residual_convex_at(exact, constants, &x, p)?,
                JacobiVariant::Supercritical => jacobi_residual_supercritical_at(exact, constants, &x, p)?,
            };
            let w = constants.a + exact.hessian(&x).trace();
            Ok((m, m / w))
        })
        .collect::<Result<_, HarnessError>>()?;
    let mut rep = JacobiReport {
        variant,
        nodes_checked: nodes.len(),
        min_margin: f64::INFINITY,
        min_scaled_margin: f64::INFINITY,
        worst_node: usize::MAX,
        violation_count: 0,
        constants: *constants,
    };
    for (&p, &(m, s)) in nodes.iter().zip(&margins) {
        rep.min_margin = rep.min_margin.min(m);
        if s < rep.min_scaled_margin {
            rep.min_scaled_margin = s;
            rep.worst_node = p;
        }
        if s < -JACOBI_TOL {
            rep.violation_count += 1;
        }
    }
    Ok(rep)
}

/// Doubles `A` from `constants.a` until the sweep has no violation.
pub fn calibrate_jacobi_a(
    exact: &ExactSolution,
    constants: &FormConstants,
    grid: &Grid,
    variant: JacobiVariant,
) -> Result<JacobiReport, HarnessError> {
    let mut k = *constants;
    loop {
        let rep = jacobi_sweep(exact, &k, grid, variant)?;
        if rep.passed() {
            return Ok(rep);
        }
        if k.a * 2.0 > MAX_A {
            return Err(HarnessError::Calibration {
                cap: MAX_A,
                worst: rep.min_scaled_margin,
            });
        }
        k.a *= 2.0;
    }
}

/// Both sides of `|(Δ_g − gⁱʲ∂ᵢⱼ)Δu| ≤ (ε/2)|∇_gΔu|²/w + (C/ε)w|Dφ|²`.
pub fn drift_bound(exact: &ExactSolution, constants: &FormConstants, x: &[f64]) -> Result<(f64, f64), HarnessError> {
    let jet = NodeJet::at(exact, x)?;
    let w = constants.a + jet.laplacian;
    let lhs = dot(&jet.geo.beltrami_drift, &jet.grad_lap).abs();
    let rhs = 0.5 * constants.eps * jet.geo.grad_norm_sq(&jet.grad_lap) / w
        + constants.c_big / constants.eps * w * jet.grad_phi_sq();
    Ok((lhs, rhs))
}

/// Smallest slack over `γ` of the two phase-shift inequalities
///
/// `(Σuᵢᵢγ)² ≤ (1+δ)(Σuᵢᵢγ − φ_γ gₙₙ)² + (C/δ)|Dφ|²gₙₙ²` and
/// `u²ₙₙγ ≥ (1−δ)(uₙₙγ − φ_γ gₙₙ)² − (C/δ)|Dφ|²gₙₙ²`,
/// evaluated in the eigenframe with `n` the smallest eigenvalue.
pub fn phase_shift_slack(exact: &ExactSolution, constants: &FormConstants, x: &[f64]) -> Result<f64, HarnessError> {
    let jet = NodeJet::at(exact, x)?;
    let n = jet.dim();
    let d = constants.delta;
    let c = constants.c_big;
    let phi_f = jet.geo.to_frame(&jet.grad_phi);
    let gnn = 1.0 + jet.geo.lambda[n - 1].powi(2);
    let tail = c / d * jet.grad_phi_sq() * gnn * gnn;
    let mut worst = f64::INFINITY;
    for g in 0..n {
        let s: f64 = (0..n).map(|i| jet.t(i, i, g)).sum();
        let shift = phi_f[g] * gnn;
        let first = (1.0 + d) * (s - shift).powi(2) + tail - s * s;
        let unn = jet.t(n - 1, n - 1, g);
        let second = unn * unn - (1.0 - d) * (unn - shift).powi(2) + tail;
        worst = worst.min(first).min(second);
    }
    Ok(worst)
}

/// Mean-value monitor output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanValue {
    /// `ln(A + Δu)` at the center node.
    pub point_value: f64,
    /// `∫ ln(A+Δu) dv_g / ∫ dv_g` over the ball.
    pub ball_average: f64,
    pub ratio: f64,
    /// `∫ dv_g` over the ball.
    pub volume: f64,
    pub nodes: usize,
}

fn ball_nodes(grid: &Grid, radius: f64) -> Result<Vec<usize>, HarnessError> {
    let max = grid.inscribed_radius() - grid.h().iter().cloned().fold(0.0, f64::max);
    if !(radius > 0.0 && radius <= max) {
        return Err(HarnessError::Radius { radius, max });
    }
    let c = grid.center();
    Ok((0..grid.len())
        .filter(|&i| {
            let x = grid.coord(i);
            x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= radius * radius * (1.0 + 1e-12)
        })
        .collect())
}

/// Compares `ln(A+Δu)` at the center with its `dv_g`-weighted ball average,
/// using the discrete Hessian of `u`.
pub fn mean_value_monitor(u: &GridField, a: f64, radius: f64) -> Result<MeanValue, HarnessError> {
    if !(a >= 3.0) {
        return Err(HarnessError::SmallA(a));
    }
    let grid = &u.grid;
    let nodes = ball_nodes(grid, radius)?;
    let cell: f64 = grid.h().iter().product();
    let vals: Vec<(f64, f64)> = nodes
        .par_iter()
        .map(|&p| {
            let h = discrete_hessian(u, p)?;
            let e = eigen_sym(&h)?;
            let v: f64 = e.values.iter().map(|l| 1.0_f64.hypot(*l)).product();
            Ok(((a + h.trace()).ln(), v))
        })
        .collect::<Result<_, HarnessError>>()?;
    let mut num = 0.0;
    let mut vol = 0.0;
    for (f, v) in &vals {
        num += f * v * cell;
        vol += v * cell;
    }
    let point_value = (a + discrete_hessian(u, grid.center_node())?.trace()).ln();
    let ball_average = num / vol;
    Ok(MeanValue {
        point_value,
        ball_average,
        ratio: point_value / ball_average,
        volume: vol,
        nodes: nodes.len(),
    })
}

/// `∫ |∇_g ln(A+Δu)|² dv_g` over the centered ball, by nodal quadrature of the
/// analytic integrand.
pub fn gradient_integral(exact: &ExactSolution, a: f64, grid: &Grid, radius: f64) -> Result<f64, HarnessError> {
    if !(a >= 3.0) {
        return Err(HarnessError::SmallA(a));
    }
    let nodes = ball_nodes(grid, radius)?;
    let cell: f64 = grid.h().iter().product();
    let parts: Vec<f64> = nodes
        .par_iter()
        .map(|&p| {
            let jet = NodeJet::at(exact, &grid.coord(p))?;
            let w = a + jet.laplacian;
            Ok(jet.geo.grad_norm_sq(&jet.grad_lap) / (w * w) * jet.geo.v * cell)
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(parts.iter().sum())
}

#[cfg(test)]
mod tests;
