//! Manufactured solutions `u = ½Σcᵢxᵢ² + a·exp(b·x)` with `φ := F(D²u)`.

use std::sync::Arc;

use crate::grid::{Grid, GridField};
use crate::phase::PhaseSpec;
use crate::spectral::{critical_phase, eigen_sym, operator_derivative, SymMatrix};

use super::SolveError;

/// Catalog entries.
#[derive(Clone, Debug, PartialEq)]
pub enum Catalog {
    /// `½Σcᵢxᵢ²`.
    Quadratic { c: Vec<f64> },
    /// `½s|x|² + a·exp(b·x)`, required convex on the box.
    Convex { s: f64, a: f64, b: Vec<f64> },
    /// `½Σcᵢxᵢ² + a·exp(b·x)` with `Θ ≥ (n−2)π/2 + θ` on the box.
    Supercritical { c: Vec<f64>, a: f64, b: Vec<f64>, theta: f64 },
}

impl Catalog {
    pub fn quadratic(n: usize) -> Self {
        Catalog::Quadratic { c: vec![1.0; n] }
    }

    pub fn convex(n: usize) -> Self {
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        Catalog::Convex { s: 2.0, a: 0.1, b }
    }

    pub fn supercritical(n: usize) -> Self {
        let (c, b) = if n == 2 {
            (vec![2.0, -0.3], vec![0.8, -0.6])
        } else {
            (vec![2.0, 2.0, -0.3], vec![0.8, -0.6, 0.5])
        };
        Catalog::Supercritical {
            c,
            a: 0.05,
            b,
            theta: 0.2,
        }
    }

    /// Catalog letter: `a`, `b` or `c`.
    pub fn id(&self) -> char {
        match self {
            Catalog::Quadratic { .. } => 'a',
            Catalog::Convex { .. } => 'b',
            Catalog::Supercritical { .. } => 'c',
        }
    }

    pub fn by_id(id: char, n: usize) -> Option<Self> {
        match id {
            'a' => Some(Self::quadratic(n)),
            'b' => Some(Self::convex(n)),
            'c' => Some(Self::supercritical(n)),
            _ => None,
        }
    }

    fn solution(&self) -> ExactSolution {
        match self {
            Catalog::Quadratic { c } => ExactSolution {
                c: c.clone(),
                a: 0.0,
                b: vec![0.0; c.len()],
            },
            Catalog::Convex { s, a, b } => ExactSolution {
                c: vec![*s; b.len()],
                a: *a,
                b: b.clone(),
            },
            Catalog::Supercritical { c, a, b, .. } => ExactSolution {
                c: c.clone(),
                a: *a,
                b: b.clone(),
            },
        }
    }
}

/// Closed-form derivatives of `½Σcᵢxᵢ² + a·exp(b·x)` up to fourth order.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub c: Vec<f64>,
    pub a: f64,
    pub b: Vec<f64>,
}

impl ExactSolution {
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// `a·exp(b·x)`.
    fn w(&self, x: &[f64]) -> f64 {
        if self.a == 0.0 {
            return 0.0;
        }
        self.a * self.b.iter().zip(x).map(|(b, x)| b * x).sum::<f64>().exp()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.c.iter().zip(x).map(|(c, x)| c * x * x).sum::<f64>() + self.w(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let w = self.w(x);
        (0..self.dim()).map(|i| self.c[i] * x[i] + w * self.b[i]).collect()
    }

    pub fn hessian(&self, x: &[f64]) -> SymMatrix {
        let n = self.dim();
        let w = self.w(x);
        let mut h = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let d = if i == j { self.c[i] } else { 0.0 };
                h.set(i, j, d + w * self.b[i] * self.b[j]);
            }
        }
        h
    }

    /// `u_{ijk}`.
    pub fn third(&self, x: &[f64], i: usize, j: usize, k: usize) -> f64 {
        self.w(x) * self.b[i] * self.b[j] * self.b[k]
    }

    /// `u_{ijkl}`.
    pub fn fourth(&self, x: &[f64], i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.w(x) * self.b[i] * self.b[j] * self.b[k] * self.b[l]
    }

    /// `∂_k D²u`.
    pub fn hessian_derivative(&self, x: &[f64], k: usize) -> SymMatrix {
        let n = self.dim();
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, self.third(x, i, j, k));
            }
        }
        m
    }

    /// `φ = Σ arctan λᵢ(D²u)`.
    pub fn phase(&self, x: &[f64]) -> f64 {
        eigen_sym(&self.hessian(x))
            .expect("finite symmetric Hessian")
            .values
            .iter()
            .map(|l| l.atan())
            .sum()
    }

    /// `φ_k = tr(G ∂_kD²u)` with `G = (I + (D²u)²)⁻¹`.
    pub fn phase_gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = operator_derivative(&self.hessian(x)).expect("finite symmetric Hessian");
        (0..self.dim())
            .map(|k| g.frobenius_dot(&self.hessian_derivative(x, k)))
            .collect()
    }

    /// `φ_{kl} = tr(G H_{kl}) − tr(G(H_l H + H H_l)G H_k)`.
    pub fn phase_hessian(&self, x: &[f64]) -> SymMatrix {
        let n = self.dim();
        let h = self.hessian(x);
        let g = operator_derivative(&h).expect("finite symmetric Hessian");
        let hk: Vec<SymMatrix> = (0..n).map(|k| self.hessian_derivative(x, k)).collect();
        let mut out = SymMatrix::zeros(n);
        for k in 0..n {
            for l in k..n {
                let mut hkl = SymMatrix::zeros(n);
                for i in 0..n {
                    for j in i..n {
                        hkl.set(i, j, self.fourth(x, i, j, k, l));
                    }
                }
                let first = g.frobenius_dot(&hkl);
                let sym = hk[l].matmul(&h).add(&h.matmul(&hk[l]));
                let second = g.matmul(&sym).matmul(&g).frobenius_dot(&hk[k]);
                out.set(k, l, first - second);
            }
        }
        out
    }

    /// `Δφ`.
    pub fn phase_laplacian(&self, x: &[f64]) -> f64 {
        self.phase_hessian(x).trace()
    }
}

/// Manufactured Dirichlet problem on a grid.
#[derive(Clone, Debug)]
pub struct ManufacturedProblem {
    pub choice: Catalog,
    pub exact: ExactSolution,
    pub u_exact: GridField,
    pub phi: PhaseSpec,
    pub boundary: GridField,
}

/// Builds a catalog problem on `grid`, validating its regime at every node.
pub fn manufactured_problem(choice: &Catalog, grid: &Grid) -> Result<ManufacturedProblem, SolveError> {
    let n = grid.dim();
    let exact = choice.solution();
    let (len_ok, len_got) = match choice {
        Catalog::Quadratic { c } => (c.len() == n, c.len()),
        Catalog::Convex { b, .. } => (b.len() == n, b.len()),
        Catalog::Supercritical { c, b, .. } => (c.len() == n && b.len() == n, c.len().max(b.len())),
    };
    if !len_ok {
        return Err(SolveError::Catalog(format!(
            "catalog entry has length {len_got}, grid dimension is {n}"
        )));
    }
    let mut max_grad = 0.0_f64;
    for idx in 0..grid.len() {
        let x = grid.coord(idx);
        let e = eigen_sym(&exact.hessian(&x))?;
        match choice {
            Catalog::Convex { .. } => {
                let lmin = *e.values.last().expect("n ≥ 2");
                if !(lmin > 0.0) {
                    return Err(SolveError::Catalog(format!(
                        "entry (b) not convex at node {idx} {x:?}: λ_min = {lmin}"
                    )));
                }
            }
            Catalog::Supercritical { theta, .. } => {
                let angle: f64 = e.values.iter().map(|l| l.atan()).sum();
                let need = critical_phase(n) + theta;
                if angle < need {
                    return Err(SolveError::Catalog(format!(
                        "entry (c) phase {angle} below {need} at node {idx} {x:?}"
                    )));
                }
            }
            Catalog::Quadratic { .. } => {}
        }
        if exact.a != 0.0 {
            let g = exact.phase_gradient(&x);
            max_grad = max_grad.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    let ex = exact.clone();
    let exg = exact.clone();
    let label = format!("manufactured ({})", choice.id());
    let phi = if exact.a == 0.0 {
        let c0 = exact.phase(&grid.center());
        PhaseSpec::constant(n, c0)?.with_label(label)
    } else {
        PhaseSpec::from_fn(grid, Arc::new(move |x: &[f64]| ex.phase(x)), 1.05 * max_grad, label)?
            .with_gradient(Arc::new(move |x: &[f64]| exg.phase_gradient(x)))
    };
    let u_exact = GridField::from_fn(grid, |x| exact.value(x));
    let boundary = u_exact.clone();
    Ok(ManufacturedProblem {
        choice: choice.clone(),
        exact,
        u_exact,
        phi,
        boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn fd_check(e: &ExactSolution, x: &[f64]) {
        let n = e.dim();
        let h = 1e-5;
        let g = e.phase_gradient(x);
        let hs = e.phase_hessian(x);
        for k in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let fd = (e.phase(&xp) - e.phase(&xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "dφ_{k}: {fd} vs {}", g[k]);
            let gp = e.phase_gradient(&xp);
            let gm = e.phase_gradient(&xm);
            for l in 0..n {
                let fd2 = (gp[l] - gm[l]) / (2.0 * h);
                assert!((fd2 - hs.get(k, l)).abs() < 1e-7, "φ_{k}{l}: {fd2} vs {}", hs.get(k, l));
            }
            let dh = e.hessian_derivative(x, k);
            let fdh = e.hessian(&xp).sub(&e.hessian(&xm)).scale(0.5 / h);
            assert!(dh.sub(&fdh).max_abs() < 1e-8);
        }
    }

    #[test]
    fn phase_derivatives_match_finite_differences() {
        for n in [2, 3] {
            for c in [Catalog::convex(n), Catalog::supercritical(n)] {
                let e = c.solution();
                fd_check(&e, &vec![0.3; n]);
                fd_check(&e, &vec![-0.7; n]);
            }
        }
    }

    #[test]
    fn quadratic_entry_has_constant_phase() {
        let g = Grid::cube(3, -1.0, 1.0, 9).unwrap();
        let p = manufactured_problem(&Catalog::quadratic(3), &g).unwrap();
        assert!((p.phi.eval(&[0.2, 0.1, -0.5]) - 3.0 * FRAC_PI_4).abs() < 1e-15);
        assert_eq!(p.phi.lipschitz(), 0.0);
    }

    #[test]
    fn convex_entry_is_validated_nodewise() {
        let g = Grid::cube(3, -1.0, 1.0, 9).unwrap();
        let p = manufactured_problem(&Catalog::convex(3), &g).unwrap();
        for idx in 0..g.len() {
            let x = g.coord(idx);
            let l = eigen_sym(&p.exact.hessian(&x)).unwrap().values;
            assert!(l[2] >= 2.0 - 0.1 * x[0].exp() - 1e-12);
            assert!(l[2] > 0.0);
        }
        let bad = Catalog::Convex {
            s: 0.1,
            a: -0.5,
            b: vec![1.0, 0.0, 0.0],
        };
        assert!(matches!(manufactured_problem(&bad, &g), Err(SolveError::Catalog(_))));
    }

    #[test]
    fn supercritical_entry_keeps_its_margin() {
        let g = Grid::cube(3, -1.0, 1.0, 9).unwrap();
        let p = manufactured_problem(&Catalog::supercritical(3), &g).unwrap();
        for idx in 0..g.len() {
            assert!(p.phi.eval(&g.coord(idx)) >= FRAC_PI_2 + 0.2);
        }
        assert!(p.phi.regime().is_supercritical());
        assert!(p.phi.lipschitz_holds(&g));
    }
}
