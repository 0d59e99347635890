use lagmc_core::grid::Grid;
use lagmc_core::solver::{manufactured_problem, newton_solve, residual, Catalog, SolveOptions};
use lagmc_core::spectral::{lagrangian_operator, SymMatrix};
use proptest::prelude::*;

#[test]
fn supercritical_catalog_solve_end_to_end() {
    let g = Grid::cube(2, -1.0, 1.0, 33).unwrap();
    let p = manufactured_problem(&Catalog::by_id('c', 2).unwrap(), &g).unwrap();
    let (u, rep) = newton_solve(&g, &p.phi, &p.boundary, &SolveOptions::default()).unwrap();
    assert!(rep.final_residual_inf <= 1e-10);
    assert!(residual(&u, &p.phi).max_abs() <= 1e-10);
    let err = u.max_diff(&p.u_exact, None).unwrap();
    assert!(err < 1e-3, "{err}");
}

/// `I − 2vvᵀ/|v|²`, symmetric and orthogonal.
fn householder(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let s: f64 = v.iter().map(|x| x * x).sum();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = f64::from(u8::from(i == j)) - 2.0 * v[i] * v[j] / s;
        }
    }
    q
}

proptest! {
    #[test]
    fn operator_is_invariant_under_rotation(
        lam in prop::collection::vec(-50.0f64..50.0, 2..=5),
        seed in prop::collection::vec(0.1f64..1.0, 5),
    ) {
        let n = lam.len();
        let q = householder(&seed[..n]);
        let m = SymMatrix::from_eigen(&lam, &q);
        let direct: f64 = lam.iter().map(|l| l.atan()).sum();
        let f = lagrangian_operator(&m).unwrap();
        prop_assert!((f - direct).abs() <= 1e-10, "{} vs {}", f, direct);
    }
}
