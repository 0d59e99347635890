//! Finite-difference Dirichlet solver for `Σ arctan λᵢ(D²u) = φ(x)`.

mod barrier;
pub mod linear;
mod manufactured;

pub use barrier::{barrier_constant, barrier_shift, sandwich_check, Sandwich};
pub use manufactured::{manufactured_problem, Catalog, ExactSolution, ManufacturedProblem};

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{Grid, GridError, GridField};
use crate::phase::{PhaseError, PhaseSpec};
use crate::spectral::{critical_phase, eigen_sym, max_phase, SpectralError, SymMatrix};
use linear::{gmres, lu_solve, Csr, DstPoisson, GmresOptions, LinearFailure};

/// Largest unknown count solved by sparse LU in two dimensions.
pub const DIRECT_LIMIT_2D: usize = 40_000;
/// Largest unknown count solved by sparse LU in three dimensions; 3-D fill-in
/// makes the factorization slow and memory hungry beyond this.
pub const DIRECT_LIMIT_3D: usize = 4_000;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("node {0} is on the boundary")]
    BoundaryNode(usize),
    #[error("phase rejected: {0}")]
    Phase(String),
    #[error("catalog entry rejected: {0}")]
    Catalog(String),
    #[error("no convergence after {iterations} iterations: residual {residual:e}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
        best: Box<GridField>,
    },
    #[error("linear solve failed at iteration {iteration} ({}): {}", .failure.method, .failure.detail)]
    Linear {
        iteration: usize,
        failure: LinearFailure,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    PhaseSpec(#[from] PhaseError),
}

/// Second-order central-difference Hessian at an interior node.
pub fn discrete_hessian(u: &GridField, node: usize) -> Result<SymMatrix, SolveError> {
    let g = &u.grid;
    if node >= g.len() || !g.is_interior(node) {
        return Err(SolveError::BoundaryNode(node));
    }
    Ok(hessian_at(g, &u.data, node))
}

fn hessian_at(g: &Grid, data: &[f64], p: usize) -> SymMatrix {
    let n = g.dim();
    let h = g.h();
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        let si = g.stride(i);
        m.set(i, i, (data[p + si] - 2.0 * data[p] + data[p - si]) / (h[i] * h[i]));
        for j in i + 1..n {
            let sj = g.stride(j);
            let v = data[p + si + sj] - data[p + si - sj] - data[p - si + sj] + data[p - si - sj];
            m.set(i, j, v / (4.0 * h[i] * h[j]));
        }
    }
    m
}

fn angle(m: &SymMatrix) -> f64 {
    eigen_sym(m)
        .expect("finite symmetric stencil")
        .values
        .iter()
        .map(|l| l.atan())
        .sum()
}

/// `F(D²_h u) − φ` at interior nodes, zero on the boundary.
pub fn residual(u: &GridField, phi: &PhaseSpec) -> GridField {
    let g = &u.grid;
    let data: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|p| {
            if g.is_interior(p) {
                angle(&hessian_at(g, &u.data, p)) - phi.eval(&g.coord(p))
            } else {
                0.0
            }
        })
        .collect();
    GridField {
        grid: g.clone(),
        data,
    }
}

/// Largest `max_{ij} |(D²_h u)_{ij}|` over the given nodes.
pub fn hessian_sup(u: &GridField, nodes: &[usize]) -> f64 {
    nodes
        .par_iter()
        .filter(|&&p| u.grid.is_interior(p))
        .map(|&p| hessian_at(&u.grid, &u.data, p).max_abs())
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    /// Phase range must sit inside `((n−2)π/2, nπ/2)`.
    Supercritical,
    /// No phase-range precondition; used for convex manufactured problems.
    ConvexInitialized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearMethod {
    Auto,
    Direct,
    Gmres,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub mode: SolveMode,
    pub linear: LinearMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 40,
            mode: SolveMode::Supercritical,
            linear: LinearMethod::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual_inf: f64,
    pub damping_events: usize,
    pub hessian_sup: f64,
    pub osc: f64,
    pub residual_history: Vec<f64>,
    pub wall_notes: String,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Interior unknown numbering and the phase sampled at interior nodes.
struct System<'a> {
    grid: &'a Grid,
    interior: Vec<usize>,
    slot: Vec<Option<usize>>,
    phi: Vec<f64>,
}

impl<'a> System<'a> {
    fn new(grid: &'a Grid, phi: &PhaseSpec) -> Self {
        let interior = grid.interior_nodes();
        let mut slot = vec![None; grid.len()];
        for (k, &p) in interior.iter().enumerate() {
            slot[p] = Some(k);
        }
        let phi = interior.par_iter().map(|&p| phi.eval(&grid.coord(p))).collect();
        Self {
            grid,
            interior,
            slot,
            phi,
        }
    }

    fn residual(&self, data: &[f64]) -> Vec<f64> {
        self.interior
            .par_iter()
            .zip(&self.phi)
            .map(|(&p, &f)| angle(&hessian_at(self.grid, data, p)) - f)
            .collect()
    }

    /// Residual and Jacobian rows `tr(G δH)` with `G = (I + H²)⁻¹`.
    fn linearize(&self, data: &[f64]) -> (Vec<f64>, Csr, Vec<f64>) {
        let g = self.grid;
        let n = g.dim();
        let h = g.h();
        let rows: Vec<(f64, Vec<(usize, f64)>, Vec<f64>)> = self
            .interior
            .par_iter()
            .zip(&self.phi)
            .map(|(&p, &f)| {
                let hm = hessian_at(g, data, p);
                let e = eigen_sym(&hm).expect("finite symmetric stencil");
                let r = e.values.iter().map(|l| l.atan()).sum::<f64>() - f;
                let gm = e.map(|l| 1.0 / (1.0 + l * l));
                let mut row = Vec::with_capacity(1 + 2 * n * n);
                let mut push = |q: usize, v: f64| {
                    if let Some(k) = self.slot[q] {
                        row.push((k, v));
                    }
                };
                let mut diag = 0.0;
                let mut gdiag = vec![0.0; n];
                for i in 0..n {
                    let si = g.stride(i);
                    let c = gm.get(i, i) / (h[i] * h[i]);
                    gdiag[i] = gm.get(i, i);
                    push(p + si, c);
                    push(p - si, c);
                    diag -= 2.0 * c;
                    for j in i + 1..n {
                        let sj = g.stride(j);
                        let c = gm.get(i, j) / (2.0 * h[i] * h[j]);
                        push(p + si + sj, c);
                        push(p - si - sj, c);
                        push(p + si - sj, -c);
                        push(p - si + sj, -c);
                    }
                }
                push(p, diag);
                (r, row, gdiag)
            })
            .collect();
        let mut res = Vec::with_capacity(rows.len());
        let mut mat = Vec::with_capacity(rows.len());
        let mut gbar = vec![0.0; n];
        for (r, row, gd) in rows {
            res.push(r);
            mat.push(row);
            gbar.iter_mut().zip(&gd).for_each(|(a, b)| *a += b);
        }
        let cnt = res.len().max(1) as f64;
        gbar.iter_mut().for_each(|a| *a /= cnt);
        (res, Csr::from_rows(mat), gbar)
    }

    fn interior_dims(&self) -> Vec<usize> {
        self.grid.points().iter().map(|p| p - 2).collect()
    }
}

/// Solves `Σ_d c_d ∂²_d u = f` with the boundary values of `boundary`,
/// exactly for the discrete five/seven-point operator.
pub fn poisson_with_boundary(
    boundary: &GridField,
    f: impl Fn(&[f64]) -> f64 + Sync,
    coeffs: &[f64],
) -> GridField {
    let g = &boundary.grid;
    let n = g.dim();
    let h = g.h();
    let interior = g.interior_nodes();
    let rhs: Vec<f64> = interior
        .par_iter()
        .map(|&p| {
            let mut r = f(&g.coord(p));
            for d in 0..n {
                let s = g.stride(d);
                for q in [p + s, p - s] {
                    if !g.is_interior(q) {
                        r -= coeffs[d] * boundary.data[q] / (h[d] * h[d]);
                    }
                }
            }
            r
        })
        .collect();
    let dims: Vec<usize> = g.points().iter().map(|p| p - 2).collect();
    let v = DstPoisson::new(&dims, h, coeffs).solve(&rhs);
    let mut out = boundary.clone();
    for (k, &p) in interior.iter().enumerate() {
        out.data[p] = v[k];
    }
    out
}

fn check_phase(phi: &PhaseSpec, mode: SolveMode) -> Result<(), SolveError> {
    let n = phi.dim();
    let (lo, hi) = phi.range();
    if hi >= max_phase(n) || lo <= -max_phase(n) {
        return Err(SolveError::Phase(format!(
            "range [{lo}, {hi}] outside (−nπ/2, nπ/2)"
        )));
    }
    if mode == SolveMode::Supercritical && !(lo > critical_phase(n)) {
        return Err(SolveError::Phase(format!(
            "range [{lo}, {hi}] is not supercritical: need φ > (n−2)π/2 = {}; \
             subcritical solving is not supported",
            critical_phase(n)
        )));
    }
    Ok(())
}

/// Damped Newton on the interior unknowns.
pub fn newton_solve(
    grid: &Grid,
    phi: &PhaseSpec,
    boundary: &GridField,
    opts: &SolveOptions,
) -> Result<(GridField, SolveReport), SolveError> {
    if !boundary.grid.same_as(grid) {
        return Err(GridError::Mismatch.into());
    }
    check_phase(phi, opts.mode)?;
    let n = grid.dim();
    let sys = System::new(grid, phi);
    let unknowns = sys.interior.len();
    let use_direct = match opts.linear {
        LinearMethod::Direct => true,
        LinearMethod::Gmres => false,
        LinearMethod::Auto => {
            unknowns <= if n == 2 { DIRECT_LIMIT_2D } else { DIRECT_LIMIT_3D }
        }
    };

    let (lo, hi) = phi.range();
    let mean = 0.5 * (lo + hi);
    let t = (mean / n as f64).tan();
    let mut u = poisson_with_boundary(boundary, |_| n as f64 * t, &vec![1.0; n]);

    let mut res = sys.residual(&u.data);
    let mut rnorm = inf_norm(&res);
    let mut history = vec![rnorm];
    let mut damping = 0;
    let mut iterations = 0;
    let mut linear_iters = 0;
    while rnorm > opts.tol {
        if iterations >= opts.max_iter {
            return Err(SolveError::NonConvergence {
                iterations,
                residual: rnorm,
                history,
                best: Box::new(u),
            });
        }
        iterations += 1;
        let (r, jac, gbar) = sys.linearize(&u.data);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = if use_direct {
            lu_solve(&jac, &rhs)
        } else {
            let pre = DstPoisson::new(&sys.interior_dims(), grid.h(), &gbar);
            gmres(&jac, &rhs, |v| pre.solve(v), GmresOptions::default()).map(|(x, k)| {
                linear_iters += k;
                x
            })
        }
        .map_err(|failure| SolveError::Linear {
            iteration: iterations,
            failure,
        })?;

        let mut alpha = 1.0;
        let mut accepted = None;
        for halving in 0..=opts.max_halvings {
            let mut trial = u.data.clone();
            for (k, &p) in sys.interior.iter().enumerate() {
                trial[p] += alpha * step[k];
            }
            let tr = sys.residual(&trial);
            let tn = inf_norm(&tr);
            if tn < rnorm {
                if halving > 0 {
                    damping += 1;
                }
                accepted = Some((trial, tr, tn));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, tr, tn)) => {
                u.data = trial;
                res = tr;
                rnorm = tn;
                history.push(rnorm);
            }
            None => {
                return Err(SolveError::NonConvergence {
                    iterations,
                    residual: rnorm,
                    history,
                    best: Box::new(u),
                })
            }
        }
    }
    debug_assert_eq!(res.len(), unknowns);
    let report = SolveReport {
        iterations,
        final_residual_inf: rnorm,
        damping_events: damping,
        hessian_sup: hessian_sup(&u, &sys.interior),
        osc: u.osc(),
        residual_history: history,
        wall_notes: if use_direct {
            format!("{unknowns} unknowns, sparse LU")
        } else {
            format!("{unknowns} unknowns, GMRES ({linear_iters} inner iterations)")
        },
    };
    Ok((u, report))
}
