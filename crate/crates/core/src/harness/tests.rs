use super::*;
use crate::forms::{certified_a, FormConstants};
use crate::solver::{manufactured_problem, Catalog, SolveOptions};
use crate::spectral::elementary_symmetric;
use proptest::prelude::*;

fn exact_of(choice: &Catalog, n: usize) -> ExactSolution {
    let g = Grid::cube(n, -1.0, 1.0, 5).unwrap();
    manufactured_problem(choice, &g).unwrap().exact
}

fn convex_constants(n: usize) -> FormConstants {
    FormConstants::convex(n, certified_a(n).unwrap())
}

fn super_constants(n: usize) -> FormConstants {
    FormConstants::supercritical(n, 0.2, certified_a(n).unwrap())
}

/// Gaussian elimination with partial pivoting: determinant and `M⁻¹b`.
fn gauss(m: &SymMatrix, b: &[f64]) -> (f64, Vec<f64>) {
    let n = m.dim();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r: Vec<f64> = (0..n).map(|j| m.get(i, j)).collect();
            r.push(b[i]);
            r
        })
        .collect();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..=n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    (det, x)
}

#[test]
fn flat_graph_geometry() {
    let geo = graph_geometry(&SymMatrix::zeros(3), &[0.3, -0.4, 1.2]).unwrap();
    assert!(geo.g.sub(&SymMatrix::identity(3)).max_abs() < 1e-15);
    assert!((geo.v - 1.0).abs() < 1e-15);
    assert!((geo.mean_curv_norm - 1.3).abs() < 1e-14);
    assert!(geo.beltrami_drift.iter().all(|d| d.abs() < 1e-15));
}

#[test]
fn unit_hessian_geometry() {
    let geo = graph_geometry(&SymMatrix::identity(2), &[1.0, 0.0]).unwrap();
    assert!(geo.g.sub(&SymMatrix::from_diagonal(&[2.0, 2.0])).max_abs() < 1e-14);
    assert!((geo.mean_curv_norm.powi(2) - 0.5).abs() < 1e-14);
    assert!((geo.beltrami_drift[0] + 0.5).abs() < 1e-14);
}

proptest! {
    #[test]
    fn geometry_matches_direct_linear_algebra(
        n in 2usize..6,
        entries in prop::collection::vec(-4.0f64..4.0, 36),
        p in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let mut h = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                h.set(i, j, entries[i * 6 + j]);
                h.set(j, i, entries[i * 6 + j]);
            }
        }
        let geo = graph_geometry(&h, &p[..n]).unwrap();
        let g = SymMatrix::identity(n).add(&h.matmul(&h));
        prop_assert!(geo.g.sub(&g).max_abs() <= 1e-10 * g.max_abs());
        let id = geo.g_inv.matmul(&g);
        prop_assert!(id.sub(&SymMatrix::identity(n)).max_abs() <= 1e-10);
        let (det, sol) = gauss(&g, &p[..n]);
        prop_assert!((geo.v * geo.v - det).abs() <= 1e-10 * det);
        let h2: f64 = sol.iter().zip(&p[..n]).map(|(a, b)| a * b).sum();
        prop_assert!((geo.mean_curv_norm.powi(2) - h2).abs() <= 1e-10 * (1.0 + h2));
    }
}

/// `(1/V)∂ⱼ(V gⁱʲ ∂ᵢf)` by central differences of the analytic metric.
fn divergence_form_laplacian(
    exact: &ExactSolution,
    x: &[f64],
    df: &dyn Fn(&[f64]) -> Vec<f64>,
) -> f64 {
    let n = x.len();
    let step = 1e-4;
    let field = |y: &[f64], j: usize| -> f64 {
        let geo = graph_geometry(&exact.hessian(y), &exact.phase_gradient(y)).unwrap();
        let d = df(y);
        geo.v * (0..n).map(|i| geo.g_inv.get(i, j) * d[i]).sum::<f64>()
    };
    let v0 = graph_geometry(&exact.hessian(x), &exact.phase_gradient(x)).unwrap().v;
    let mut s = 0.0;
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += step;
        xm[j] -= step;
        s += (field(&xp, j) - field(&xm, j)) / (2.0 * step);
    }
    s / v0
}

#[test]
fn beltrami_drift_matches_divergence_form() {
    let df = |y: &[f64]| vec![y[0].cos() + y[1] * y[1], 2.0 * y[0] * y[1], 0.0];
    let d2f = |y: &[f64]| {
        SymMatrix::from_rows(&[&[-y[0].sin(), 2.0 * y[1], 0.0], &[2.0 * y[1], 2.0 * y[0], 0.0], &[0.0, 0.0, 0.0]])
    };
    for choice in [Catalog::convex(3), Catalog::supercritical(3)] {
        let exact = exact_of(&choice, 3);
        for x in [[0.1, -0.2, 0.3], [-0.5, 0.4, 0.7], [0.8, 0.8, -0.6]] {
            let geo = graph_geometry(&exact.hessian(&x), &exact.phase_gradient(&x)).unwrap();
            let formula = geo.beltrami(&df(&x), &d2f(&x));
            let oracle = divergence_form_laplacian(&exact, &x, &df);
            assert!((formula - oracle).abs() < 1e-6, "{choice:?} at {x:?}: {formula} vs {oracle}");
        }
    }
}

#[test]
fn twice_differentiated_equation_holds() {
    for (choice, n) in [
        (Catalog::convex(2), 2),
        (Catalog::convex(3), 3),
        (Catalog::supercritical(2), 2),
        (Catalog::supercritical(3), 3),
    ] {
        let exact = exact_of(&choice, n);
        for s in [-0.7, -0.1, 0.35, 0.9] {
            let x: Vec<f64> = (0..n).map(|d| s * (1.0 - 0.3 * d as f64)).collect();
            let jet = NodeJet::at(&exact, &x).unwrap();
            let lhs = jet.trace_operator_lap();
            let rhs = jet.good_terms() + jet.lap_phi;
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{choice:?} {x:?}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn quadratic_margins_vanish() {
    let q = exact_of(&Catalog::quadratic(3), 3);
    assert_eq!(jacobi_residual_convex(&q, &convex_constants(3), &[0.2, 0.1, -0.4]).unwrap(), 0.0);
    let sq = ExactSolution {
        c: vec![2.0, 2.0, -0.3],
        a: 0.0,
        b: vec![0.0; 3],
    };
    assert_eq!(jacobi_residual_supercritical(&sq, &super_constants(3), &[0.5, -0.5, 0.0]).unwrap(), 0.0);
}

#[test]
fn convex_center_margin_is_nonnegative() {
    for n in [2, 3] {
        let exact = exact_of(&Catalog::convex(n), n);
        let m = jacobi_residual_convex(&exact, &convex_constants(n), &vec![0.0; n]).unwrap();
        assert!(m >= 0.0, "n={n}: {m}");
    }
}

#[test]
fn convex_catalog_sweeps_pass() {
    for n in [2, 3] {
        let grid = Grid::cube(n, -1.0, 1.0, if n == 2 { 33 } else { 13 }).unwrap();
        for choice in [Catalog::quadratic(n), Catalog::convex(n)] {
            let exact = exact_of(&choice, n);
            let rep = jacobi_sweep(&exact, &convex_constants(n), &grid, JacobiVariant::Convex).unwrap();
            assert!(rep.passed(), "{choice:?}: {rep:?}");
            assert_eq!(rep.nodes_checked, grid.interior_nodes().len());
        }
    }
}

#[test]
fn supercritical_catalog_sweeps_pass() {
    for n in [2, 3] {
        let grid = Grid::cube(n, -1.0, 1.0, if n == 2 { 33 } else { 13 }).unwrap();
        let exact = exact_of(&Catalog::supercritical(n), n);
        let rep = jacobi_sweep(&exact, &super_constants(n), &grid, JacobiVariant::Supercritical).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.min_margin.is_finite());
    }
}

#[test]
fn weak_constants_probe_reports_a_margin() {
    let steep = ExactSolution {
        c: vec![0.5, 0.5],
        a: 1.0,
        b: vec![3.0, 0.0],
    };
    let broken = FormConstants {
        a: 3.0,
        c_big: 0.0,
        ..convex_constants(2)
    };
    let m = jacobi_residual_convex(&steep, &broken, &[0.9, 0.0]).unwrap();
    assert!(m.is_finite());
}

#[test]
fn preconditions_are_enforced() {
    let exact = exact_of(&Catalog::supercritical(3), 3);
    let x = [0.0, 0.0, 0.0];
    assert!(matches!(
        jacobi_residual_convex(&exact, &convex_constants(3), &x),
        Err(HarnessError::NotConvex { .. })
    ));
    let greedy = FormConstants::supercritical(3, 1.0, 137.0);
    assert!(matches!(
        jacobi_residual_supercritical(&exact, &greedy, &x),
        Err(HarnessError::Margin { .. })
    ));
    let small = FormConstants {
        a: 1.0,
        ..super_constants(3)
    };
    assert!(matches!(
        jacobi_residual_supercritical(&exact, &small, &x),
        Err(HarnessError::SmallA(_))
    ));
}

#[test]
fn calibration_keeps_a_passing_shift() {
    let grid = Grid::cube(2, -1.0, 1.0, 17).unwrap();
    let exact = exact_of(&Catalog::convex(2), 2);
    let rep = calibrate_jacobi_a(&exact, &convex_constants(2), &grid, JacobiVariant::Convex).unwrap();
    assert!(rep.passed());
    assert_eq!(rep.constants.a, 41.0);
}

#[test]
fn drift_and_phase_shift_bounds_hold() {
    for (choice, k) in [
        (Catalog::convex(3), convex_constants(3)),
        (Catalog::supercritical(3), super_constants(3)),
    ] {
        let exact = exact_of(&choice, 3);
        let grid = Grid::cube(3, -1.0, 1.0, 9).unwrap();
        for p in grid.interior_nodes() {
            let x = grid.coord(p);
            let (lhs, rhs) = drift_bound(&exact, &k, &x).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12), "{choice:?} {x:?}: {lhs} > {rhs}");
            assert!(phase_shift_slack(&exact, &k, &x).unwrap() >= -1e-12);
        }
    }
}

/// `∂σ_k/∂M` via the recursion `T₀ = I`, `Tⱼ = σⱼI − M Tⱼ₋₁`.
fn newton_recursion(m: &SymMatrix, k: usize) -> SymMatrix {
    let e = eigen_sym(m).unwrap();
    let s = elementary_symmetric(&e.values);
    let n = m.dim();
    let mut t = SymMatrix::identity(n);
    for j in 1..k {
        t = SymMatrix::identity(n).scale(s[j]).sub(&m.matmul(&t));
    }
    t
}

proptest! {
    #[test]
    fn newton_tensor_matches_recursion(
        n in 2usize..6,
        k in 1usize..6,
        entries in prop::collection::vec(-2.0f64..2.0, 36),
    ) {
        prop_assume!(k <= n);
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, entries[i * 6 + j]);
                m.set(j, i, entries[i * 6 + j]);
            }
        }
        let (l, _) = newton_tensor(&m, k).unwrap();
        let r = newton_recursion(&m, k);
        prop_assert!(l.sub(&r).max_abs() <= 1e-9 * (1.0 + r.max_abs()));
    }
}

#[test]
fn newton_tensor_is_the_derivative_of_sigma_k() {
    let m = SymMatrix::from_rows(&[&[1.0, 0.3, -0.2], &[0.3, -0.5, 0.7], &[-0.2, 0.7, 2.0]]);
    let (l, _) = newton_tensor(&m, 2).unwrap();
    let step = 1e-6;
    for i in 0..3 {
        for j in 0..3 {
            let bump = |s: f64| {
                let mut p = m.clone();
                p.set(i, j, p.get(i, j) + s);
                newton_tensor(&p, 2).unwrap().1
            };
            let fd = (bump(step) - bump(-step)) / (2.0 * step);
            let want = if i == j { l.get(i, i) } else { 2.0 * l.get(i, j) };
            assert!((fd - want).abs() < 1e-7, "({i},{j}) {fd} vs {want}");
        }
    }
}

#[test]
fn divergence_identity_is_exact_for_k_one() {
    for (choice, n, m) in [(Catalog::convex(3), 3, 17), (Catalog::supercritical(2), 2, 33)] {
        let g = Grid::cube(n, -1.0, 1.0, m).unwrap();
        let u = manufactured_problem(&choice, &g).unwrap().u_exact;
        let r = divergence_identity_check(&u, 1).unwrap();
        assert!(r <= 1e-12, "{choice:?}: {r}");
    }
}

#[test]
fn divergence_identity_is_second_order() {
    let tilted = Catalog::Convex {
        s: 2.0,
        a: 0.1,
        b: vec![0.6, -0.5, 0.4],
    };
    for choice in [tilted, Catalog::supercritical(3)] {
        for k in [2, 3] {
            let r: Vec<f64> = [9, 17, 33]
                .iter()
                .map(|&m| {
                    let g = Grid::cube(3, -1.0, 1.0, m).unwrap();
                    let u = manufactured_problem(&choice, &g).unwrap().u_exact;
                    divergence_identity_check(&u, k).unwrap()
                })
                .collect();
            let order = (r[1] / r[2]).log2();
            assert!((order - 2.0).abs() <= 0.3, "{choice:?} k={k}: {r:?}");
        }
    }
}

#[test]
fn divergence_identity_on_quadratics_and_bad_k() {
    let g = Grid::cube(3, -1.0, 1.0, 9).unwrap();
    let u = GridField::from_fn(&g, |x| 0.5 * x[0] * x[0] + 1.5 * x[1] * x[1] - 0.2 * x[2] * x[2] + 0.3 * x[0] * x[2]);
    for k in 1..=3 {
        assert!(divergence_identity_check(&u, k).unwrap() <= 1e-11);
    }
    assert!(matches!(divergence_identity_check(&u, 0), Err(HarnessError::BadK { .. })));
    assert!(matches!(divergence_identity_check(&u, 4), Err(HarnessError::BadK { .. })));
}

#[test]
fn analytic_divergence_converges() {
    let exact = exact_of(&Catalog::supercritical(3), 3);
    let r: Vec<f64> = [17, 33]
        .iter()
        .map(|&m| divergence_identity_analytic(&exact, &Grid::cube(3, -1.0, 1.0, m).unwrap(), 2).unwrap())
        .collect();
    let order = (r[0] / r[1]).log2();
    assert!((order - 2.0).abs() <= 0.3, "{r:?}");
}

#[test]
fn mean_value_on_quadratic_is_exact() {
    let g = Grid::cube(2, -1.0, 1.0, 17).unwrap();
    let u = GridField::from_fn(&g, |x| 0.7 * x[0] * x[0] + 0.2 * x[1] * x[1]);
    let mv = mean_value_monitor(&u, 3.0, 0.5).unwrap();
    assert!((mv.ratio - 1.0).abs() < 1e-13);
    assert!(matches!(mean_value_monitor(&u, 3.0, 1.0), Err(HarnessError::Radius { .. })));
    assert!(matches!(mean_value_monitor(&u, 2.0, 0.5), Err(HarnessError::SmallA(_))));
}

#[test]
fn mean_value_ratio_is_stable_and_flattens_with_a() {
    let ratio = |m: usize, a: f64| {
        let g = Grid::cube(2, -1.0, 1.0, m).unwrap();
        let p = manufactured_problem(&Catalog::convex(2), &g).unwrap();
        mean_value_monitor(&p.u_exact, a, 0.75).unwrap().ratio
    };
    let (r1, r2) = (ratio(33, 3.0), ratio(65, 3.0));
    assert!((r1 - r2).abs() <= 0.02 * r2, "{r1} {r2}");
    let mut last = f64::INFINITY;
    for a in [3.0, 30.0, 300.0, 3000.0] {
        let d = (ratio(33, a) - 1.0).abs();
        assert!(d < last, "A={a}: {d} vs {last}");
        last = d;
    }
}

#[test]
fn gradient_integral_monitor() {
    let g = Grid::cube(2, -1.0, 1.0, 33).unwrap();
    let q = exact_of(&Catalog::quadratic(2), 2);
    assert_eq!(gradient_integral(&q, 3.0, &g, 0.5).unwrap(), 0.0);
    let b = exact_of(&Catalog::convex(2), 2);
    assert!(gradient_integral(&b, 3.0, &g, 0.5).unwrap() > 0.0);
}

#[test]
fn quadratic_study_is_exact() {
    let s = hessian_bound_study(&Catalog::quadratic(2), 2, &[9, 17], &SolveOptions::default()).unwrap();
    assert_eq!(s.rows.len(), 2);
    for r in &s.rows {
        assert!((r.hess0 - 1.0).abs() < 1e-9, "{r:?}");
    }
    assert!(s.spread() < 1e-9);
    assert!(matches!(
        hessian_bound_study(&Catalog::quadratic(2), 2, &[9], &SolveOptions::default()),
        Err(HarnessError::Refinements)
    ));
}

#[test]
fn supercritical_study_is_mesh_independent() {
    let s = hessian_bound_study(&Catalog::supercritical(2), 2, &[17, 33, 65], &SolveOptions::default()).unwrap();
    assert_eq!(s.rows.len(), 3);
    assert!(s.spread() <= 0.01, "{s:?}");
    let steeper = Catalog::Supercritical {
        c: vec![2.0, -0.3],
        a: 0.1,
        b: vec![0.8, -0.6],
        theta: 0.2,
    };
    let t = hessian_bound_study(&steeper, 2, &[17, 33], &SolveOptions::default()).unwrap();
    assert!(t.rows[1].lip > s.rows[1].lip);
    assert!(t.rows[1].hess0 != s.rows[1].hess0);
}
