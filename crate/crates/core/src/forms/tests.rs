use super::*;
use crate::sampling::SampleStream;
use proptest::prelude::*;
use rand::Rng;

fn spec(v: &[f64]) -> Spectrum {
    Spectrum::new(v.to_vec()).unwrap()
}

#[test]
fn lambda_matrix_examples() {
    let m = build_lambda_matrix(&[5.0, 5.0, 5.0], 1.25).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 3.75 } else { -1.25 };
            assert!((m.get(i, j) - want).abs() < 1e-15);
        }
    }
    let m = build_lambda_matrix(&[2.0], 0.5).unwrap();
    assert_eq!(m.dim(), 1);
    assert!((m.get(0, 0) - 1.5).abs() < 1e-15);
    assert!(matches!(
        build_lambda_matrix(&[1.0, -1.0], 1.0),
        Err(FormError::NonPositive { index: 1, .. })
    ));
}

#[test]
fn lambda_matrix_equals_rank_one_update() {
    let stream = SampleStream::new(5);
    for idx in 0..200 {
        let mut rng = stream.rng(idx);
        let a: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..100.0)).collect();
        let c = rng.random_range(0.0..3.0);
        let eq6 = build_lambda_matrix(&a, c).unwrap();
        let direct = rank_one_matrix(&a, c);
        assert!(eq6.sub(&direct).max_abs() <= 1e-12 * 100.0);
    }
}

#[test]
fn rank_one_examples() {
    let c = rank_one_psd(&[5.0, 5.0, 5.0], 1.25).unwrap();
    assert!(c.psd && c.oracle_agrees);
    assert!((c.criterion_value - 0.75).abs() < 1e-15);
    assert!(c.min_eigenvalue >= 0.0);

    let c = rank_one_psd(&[1.0, 1.0, 1.0], 1.25).unwrap();
    assert!(!c.psd && c.oracle_agrees);
    assert!(c.min_eigenvalue < 0.0);

    let c = rank_one_psd(&[3.75, 3.75, 3.75], 1.25).unwrap();
    assert!(c.psd && c.oracle_agrees);
    assert!((c.criterion_value - 1.0).abs() < 1e-15);
    assert!(c.min_eigenvalue.abs() < 1e-9);

    assert!(matches!(rank_one_psd(&[1.0, 0.0], 1.0), Err(FormError::NonPositive { .. })));
}

#[test]
fn qform_min_eig_examples() {
    assert!((qform_min_eig(&[1.0, 1.0], 0.0).unwrap() - 1.0).abs() < 1e-15);
    assert!(qform_min_eig(&[3.75, 3.75, 3.75], 1.25).unwrap().abs() < 1e-9);
    let crit = 1.25 * (0.5 + 1.0 / 3.0 + 0.25);
    assert!(crit > 1.0);
    assert!(qform_min_eig(&[2.0, 3.0, 4.0], 1.25).unwrap() < 0.0);
}

#[test]
fn tie_nudge_makes_maximum_strict() {
    let mut a = vec![2.0, 5.0, 5.0, 1.0];
    tie_nudge(&mut a);
    assert_eq!(a[1], 5.0);
    assert!(a[2] < 5.0 && a[2] > 5.0 * (1.0 - 2e-9));
    assert_eq!(a[3], 1.0);
}

fn a3() -> f64 {
    certified_a(3).unwrap()
}

#[test]
fn convex_dispatch_examples() {
    let k = FormConstants::convex(3, a3());
    let s = spec(&[2.0, 2.0, 2.0]);
    let case = convex_case_coefficients(&s, 6.0, &k).unwrap();
    assert_eq!(case.case_id, CaseId::Convex1);
    assert_eq!(case.a.len(), 3);
    let cert = case.certify().unwrap();
    assert!(cert.psd && cert.oracle_agrees);

    let s = spec(&[10.0, 1.0, 1e-6]);
    let case = convex_case_coefficients(&s, s.trace(), &k).unwrap();
    assert_eq!(case.case_id, CaseId::Convex2);
    // split after λ₂ = 1 ≥ c(3); the appended entry is 2n²
    assert_eq!(case.a.len(), 3);
    assert_eq!(case.a[2], 18.0);
    assert!(case.certify().unwrap().psd);

    let s = spec(&[1e-4, 1e-5, 0.0]);
    let case = convex_case_coefficients(&s, s.trace(), &k).unwrap();
    assert_eq!(case.case_id, CaseId::Convex3);
    assert_eq!(case.a.len(), 2);
    assert!(case.certify().unwrap().psd);

    // the degenerate form also dominates the direct Cauchy–Schwarz bound
    let v = s.values();
    for &l in v {
        let lhs = 3.0 * l.powi(4) / (1.0 + l * l).powi(2);
        let rhs = a3() * l / (1.0 + l * l);
        assert!(lhs <= rhs);
    }

    assert!(matches!(
        convex_case_coefficients(&spec(&[1.0, -0.1]), 0.9, &FormConstants::convex(2, 41.0)),
        Err(FormError::NotConvex { .. })
    ));
}

#[test]
fn all_zero_spectrum_gives_empty_trivial_form() {
    let k = FormConstants::convex(3, a3());
    let case = convex_case_coefficients(&spec(&[0.0, 0.0, 0.0]), 0.0, &k).unwrap();
    assert_eq!(case.case_id, CaseId::Convex3);
    assert!(case.a.is_empty());
    assert!(case.certify().unwrap().psd);
}

#[test]
fn supercritical_dispatch_examples() {
    let k = FormConstants::supercritical(3, 0.3, a3());
    let s = spec(&[5.0, 2.0, -0.4]);
    let case = supercritical_case_coefficients(&s, &k, 3).unwrap();
    assert_eq!(case.case_id, CaseId::SuperClusteredGammaN);
    assert!(case.certify().unwrap().psd);
    let case = supercritical_case_coefficients(&s, &k, 1).unwrap();
    assert_eq!(case.case_id, CaseId::SuperClusteredGammaLtN);
    assert!(case.bounds.unwrap().tau.is_some());

    let s = spec(&[1e4, 1e4, -1e-6]);
    let case = supercritical_case_coefficients(&s, &k, 3).unwrap();
    assert_eq!(case.case_id, CaseId::SuperSeparated);
    assert!(case.certify().unwrap().psd);

    assert!(matches!(
        supercritical_case_coefficients(&spec(&[5.0, 2.0, 0.1]), &k, 3),
        Err(FormError::ConvexPath { .. })
    ));
    assert!(matches!(
        supercritical_case_coefficients(&spec(&[1.0, 0.5, -0.4]), &k, 3),
        Err(FormError::Subcritical { .. })
    ));
    let bad = FormConstants::supercritical(3, 0.0, a3());
    assert!(matches!(
        supercritical_case_coefficients(&spec(&[5.0, 2.0, -0.4]), &bad, 3),
        Err(FormError::BadTheta(_))
    ));
}

#[test]
fn clustered_branch_with_large_eigenvalue() {
    let theta = 0.3;
    let k = FormConstants::supercritical(3, theta, a3());
    let c_theta = supercritical_threshold(3, theta, MU);
    assert!(c_theta > 1e7 && c_theta < 2e7);
    let s = spec(&[1e8, 2.0, -0.4]);
    let case = supercritical_case_coefficients(&s, &k, 1).unwrap();
    let b = case.bounds.unwrap();
    assert!(!b.separated);
    assert_eq!(b.m, 1);
    // κ = μ/2 branch: τ exceeds half of tanθ/λ_{n−1}
    let tau = b.tau.unwrap();
    assert!(tau > 0.5 * theta.tan() / 2.0);
    assert!(case.certify().unwrap().psd);
}

#[test]
fn eps_hat_from_kappa_choice() {
    for theta in [0.05f64, 0.3, 0.7, 1.2] {
        let t2 = theta.tan().powi(2);
        let kappa = 1.0 + 0.5 * t2;
        let coef = (t2 - (kappa - 1.0)) / (t2 + 1.0);
        assert!((coef - 0.5 * theta.sin().powi(2)).abs() < 1e-14);
        assert!((kappa - 1.0) >= coef);
    }
}

#[test]
fn dim2_examples() {
    let k = FormConstants::dim2(DIM2_A, 0.0);
    let t = 2.5;
    let m = dim2_jacobi_margin(&spec(&[t, t]), &k, Dim2Regime::Convex).unwrap();
    assert!((m - (4.0 * t - 0.5 * t)).abs() < 1e-12);
    assert!(dim2_jacobi_margin(&spec(&[1.0, 0.5]), &k, Dim2Regime::Convex).unwrap() >= 0.0);
    assert!(matches!(
        dim2_jacobi_margin(&spec(&[1.0, -0.5]), &k, Dim2Regime::Convex),
        Err(FormError::NotConvex { .. })
    ));
    assert!(matches!(
        dim2_jacobi_margin(&spec(&[1.0, 0.5, 0.1]), &k, Dim2Regime::Convex),
        Err(FormError::Dimension { .. })
    ));
}

#[test]
fn dim2_convex_sweep() {
    let k = FormConstants::dim2(DIM2_A, 0.0);
    let mut worst = f64::INFINITY;
    for i in 0..=240 {
        let l1 = if i == 0 { 0.0 } else { 10f64.powf(-6.0 + 12.0 * (i - 1) as f64 / 239.0) };
        for j in 0..=60 {
            let l2 = l1 * j as f64 / 60.0;
            let m = dim2_jacobi_margin(&spec(&[l1, l2]), &k, Dim2Regime::Convex).unwrap();
            worst = worst.min(m / (1.0 + l1));
        }
    }
    assert!(worst >= 0.0, "worst {worst}");
}

/// `c(θ)` against a brute-force scan of `(λ₁+λ₂)/(2λ₁)` on the phase boundary.
#[test]
fn dim2_slope_is_sharp() {
    for theta in [0.1f64, 0.3, 0.8, 1.3] {
        let mut best = f64::INFINITY;
        for i in 1..20000 {
            let alpha = theta + (std::f64::consts::FRAC_PI_2 - theta) * i as f64 / 20000.0;
            let (l1, l2) = (alpha.tan(), (theta - alpha).tan());
            if l1 >= l2 {
                best = best.min((l1 + l2) / (2.0 * l1));
            }
        }
        let c = dim2_supercritical_slope(theta);
        assert!(best >= c - 1e-12);
        assert!(best - c < 1e-6, "theta {theta}: scan {best} closed form {c}");
    }
}

#[test]
fn hyperplane_form_on_simple_case() {
    // Σx = 0 plane with d = (1,1): x = (t,−t) gives 2t² and no rank-one term
    let m = hyperplane_qform_min_eig(&[1.0, 1.0], 5.0, &[1.0, 1.0]).unwrap();
    assert!((m - 1.0).abs() < 1e-14);
    // plane x₁ = 0 leaves d₂ − c
    let m = hyperplane_qform_min_eig(&[7.0, 2.0], 0.5, &[1.0, 0.0]).unwrap();
    assert!((m - 1.5).abs() < 1e-14);
}

#[test]
fn certification_examples() {
    let stream = SampleStream::new(99);
    let out = certify_constants(3, CaseId::Convex1, 20_000, a3(), 0.3, &stream).unwrap();
    assert!(out.ok, "{out:?}");
    assert_eq!(out.oracle_disagreements, 0);
    assert!(out.hyperplane_margin.unwrap() >= -1e-9);

    let out = certify_constants(3, CaseId::Convex1, 20_000, 3.0, 0.3, &stream).unwrap();
    assert!(!out.ok);
    assert!(out.worst_margin < 0.0);
    // the witness is itself a failing spectrum
    let k = FormConstants::convex(3, 3.0);
    let w = &out.witness;
    assert!(convex_case_coefficients(w, w.trace(), &k).unwrap().margin() < 0.0);

    for fam in [
        CaseId::Convex1,
        CaseId::Convex2,
        CaseId::Convex3,
        CaseId::SuperSeparated,
        CaseId::SuperClusteredGammaN,
        CaseId::SuperClusteredGammaLtN,
    ] {
        let out = certify_constants(2, fam, 5_000, certified_a(2).unwrap(), 0.3, &stream).unwrap();
        assert!(out.ok, "{fam:?} {out:?}");
    }
    let out = certify_constants(2, CaseId::Dim2Convex, 20_000, DIM2_A, 0.0, &stream).unwrap();
    assert!(out.ok, "{out:?}");
    let out = certify_constants(2, CaseId::Dim2Super, 20_000, DIM2_A, 0.3, &stream).unwrap();
    assert!(out.ok, "{out:?}");
}

#[test]
fn find_min_a_contract() {
    let stream = SampleStream::new(7);
    for (n, fam) in [(3, CaseId::Convex3), (3, CaseId::Convex1), (2, CaseId::Dim2Convex)] {
        let a = find_min_a(n, fam, 10_000, 0.3, &stream).unwrap();
        assert!(a >= MIN_A);
        let ok = certify_constants(n, fam, 10_000, a, 0.3, &stream).unwrap();
        assert!(ok.ok);
        let twice = certify_constants(n, fam, 10_000, 2.0 * a, 0.3, &stream).unwrap();
        assert!(twice.ok);
        if a > MIN_A {
            let below = certify_constants(n, fam, 10_000, a / 1.02, 0.3, &stream).unwrap();
            assert!(!below.ok);
        }
    }
}

#[test]
fn find_min_a_is_deterministic() {
    let a = find_min_a(3, CaseId::Convex2, 5_000, 0.3, &SampleStream::new(1)).unwrap();
    let b = find_min_a(3, CaseId::Convex2, 5_000, 0.3, &SampleStream::new(1)).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn sampled_dispatch_is_total_and_exclusive() {
    let stream = SampleStream::new(13);
    for n in 2..=5 {
        let c = c_small(n);
        let k = FormConstants::convex(n, 100.0);
        for idx in 0..2000u64 {
            let mut rng = stream.rng(idx);
            let v: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-4.0..3.0))).collect();
            let s = spec(&v);
            let case = convex_case_coefficients(&s, s.trace(), &k).unwrap();
            let expected = if s.min() >= c {
                CaseId::Convex1
            } else if s.max() >= c {
                CaseId::Convex2
            } else {
                CaseId::Convex3
            };
            assert_eq!(case.case_id, expected);
        }
    }
}

fn positive_vec() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=6).prop_flat_map(|n| prop::collection::vec(-2.0f64..3.0, n))
        .prop_map(|e| e.into_iter().map(|x| 10f64.powf(x)).collect())
}

proptest! {
    #[test]
    fn criterion_matches_oracle(a in positive_vec(), pick in any::<bool>()) {
        let coeff = if pick { CONVEX_COEFF } else { SUPER_COEFF };
        let crit = coeff * a.iter().map(|x| 1.0 / x).sum::<f64>();
        let min = qform_min_eig(&a, coeff).unwrap();
        if (1.0 - crit).abs() > 1e-7 {
            prop_assert_eq!(crit < 1.0, min >= 0.0);
        }
    }

    #[test]
    fn psd_certificates_are_nonnegative_forms(a in positive_vec(), stretch in 1.0f64..3.0, seed in any::<u64>()) {
        // rescale onto the psd side of the criterion
        let crit = CONVEX_COEFF * a.iter().map(|x| 1.0 / x).sum::<f64>();
        let a: Vec<f64> = a.iter().map(|x| x * crit * stretch).collect();
        let cert = rank_one_psd(&a, CONVEX_COEFF).unwrap();
        prop_assert!(cert.psd && cert.oracle_agrees);
        let amax = a.iter().cloned().fold(0.0, f64::max);
        let mut rng = SampleStream::new(seed).rng(0);
        for _ in 0..1000 {
            let x: Vec<f64> = a.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let sum: f64 = x.iter().sum();
            let q: f64 = a.iter().zip(&x).map(|(ai, xi)| ai * xi * xi).sum::<f64>() - CONVEX_COEFF * sum * sum;
            let norm2: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!(q >= -1e-9 * norm2 * amax);
        }
    }

    #[test]
    fn scaling_up_preserves_psd(a in positive_vec(), t in 1.0f64..100.0) {
        let cert = rank_one_psd(&a, CONVEX_COEFF).unwrap();
        let scaled: Vec<f64> = a.iter().map(|x| x * t).collect();
        let c2 = rank_one_psd(&scaled, CONVEX_COEFF).unwrap();
        prop_assert!(c2.criterion_value <= cert.criterion_value * (1.0 + 1e-15));
        if cert.psd {
            prop_assert!(c2.psd);
        }
    }
}
