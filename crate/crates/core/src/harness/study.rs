//! Mesh dependence of `|D²u(0)|` across refinements of one catalog problem.

use super::HarnessError;
use crate::grid::Grid;
use crate::solver::{discrete_hessian, manufactured_problem, newton_solve, Catalog, SolveOptions};
use crate::spectral::eigen_sym;

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub points: usize,
    pub h: f64,
    /// Spectral norm of the discrete Hessian at the center node.
    pub hess0: f64,
    pub osc: f64,
    pub lip: f64,
    pub theta: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Max nodal error against the exact solution.
    pub err_inf: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HessianStudy {
    pub family: char,
    pub n: usize,
    pub rows: Vec<StudyRow>,
}

impl HessianStudy {
    /// Relative change of `|D²u(0)|` between the two finest grids.
    pub fn spread(&self) -> f64 {
        let k = self.rows.len();
        let (a, b) = (self.rows[k - 2].hess0, self.rows[k - 1].hess0);
        let scale = a.abs().max(b.abs());
        if scale == 0.0 {
            0.0
        } else {
            (a - b).abs() / scale
        }
    }
}

/// Solves `choice` on `[−1,1]ⁿ` at each resolution in `points` (ascending).
pub fn hessian_bound_study(
    choice: &Catalog,
    n: usize,
    points: &[usize],
    opts: &SolveOptions,
) -> Result<HessianStudy, HarnessError> {
    if points.len() < 2 {
        return Err(HarnessError::Refinements);
    }
    let mut sorted = points.to_vec();
    sorted.sort_unstable();
    let mut rows = Vec::with_capacity(sorted.len());
    for &m in &sorted {
        let grid = Grid::cube(n, -1.0, 1.0, m)?;
        let prob = manufactured_problem(choice, &grid)?;
        let (u, rep) = newton_solve(&grid, &prob.phi, &prob.boundary, opts)?;
        let e = eigen_sym(&discrete_hessian(&u, grid.center_node())?)?;
        rows.push(StudyRow {
            points: m,
            h: grid.h()[0],
            hess0: e.values.iter().fold(0.0, |a, l| a.max(l.abs())),
            osc: u.osc(),
            lip: prob.phi.lipschitz(),
            theta: prob.phi.theta(),
            iterations: rep.iterations,
            residual: rep.final_residual_inf,
            err_inf: u.data.iter().zip(&prob.u_exact.data).fold(0.0, |a, (x, y)| a.max((x - y).abs())),
        });
    }
    Ok(HessianStudy {
        family: choice.id(),
        n,
        rows,
    })
}
