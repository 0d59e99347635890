use super::{
    eps_n, laplacian, CaseId, FormCase, FormConstants, FormError, CONVEX_COEFF, SUPER_COEFF,
};
use crate::spectral::{critical_phase, eigen_sym, lagrangian_angle, SymMatrix, Spectrum};
use crate::tolerance;

/// Phase-dependent data reported by the supercritical constructions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuperBounds {
    pub separated: bool,
    /// Coefficient of the retained `Σ|λᵢ|gⁱⁱgⁱⁱu²ᵢᵢγ` term.
    pub eps_hat: f64,
    /// `τ = tanθ/λ_{n−1} − (κ⁻¹−1)cotθ/λ_γ` for γ < n in the clustered branch.
    pub tau: Option<f64>,
    /// Number of eigenvalues above `C(θ)`.
    pub m: usize,
    pub c_theta: f64,
}

/// Shared convex construction on a nonnegative descending list.
///
/// `weight` scales every `2λ(A+Δ)/(1+λ²)` entry.
fn convex_machinery(
    lam: &[f64],
    delta_u: f64,
    a_shift: f64,
    c: f64,
    weight: f64,
    coeff: f64,
    id_for: impl Fn(u8) -> CaseId,
) -> FormCase {
    let n = lam.len();
    let big = a_shift + delta_u;
    let base = |l: f64| 2.0 * weight * l * big / (1.0 + l * l);
    let last = lam[n - 1];
    if last >= c {
        let a = lam.iter().map(|&l| base(l)).collect();
        return FormCase::new(id_for(1), a, coeff, None);
    }
    if lam[0] >= c {
        let n2 = (n * n) as f64;
        let mut a: Vec<f64> = lam
            .iter()
            .take_while(|&&l| l >= c)
            .map(|&l| ((1.0 - c) * base(l)).min(2.0 * n2 - 1.0))
            .collect();
        a.push(2.0 * n2);
        return FormCase::new(id_for(2), a, coeff, None);
    }
    // On Σ xᵢ/(1+λᵢ²) = 0 the sum Σxᵢ equals Σ λᵢ²xᵢ/(1+λᵢ²); substituting
    // yᵢ = λᵢ²xᵢ/(1+λᵢ²) gives the diagonal 2(A+Δ)(1+λᵢ²)/λᵢ³.
    let a = lam
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| 2.0 * weight * big * (1.0 + l * l) / (l * l * l))
        .collect();
    FormCase::new(id_for(3), a, coeff, None)
}

pub fn convex_case_coefficients(
    s: &Spectrum,
    delta_u: f64,
    k: &FormConstants,
) -> Result<FormCase, FormError> {
    if s.min() < 0.0 {
        return Err(FormError::NotConvex {
            lambda_min: s.min(),
        });
    }
    k.validate()?;
    Ok(convex_machinery(
        s.values(),
        delta_u,
        k.a,
        k.c_small,
        1.0,
        CONVEX_COEFF,
        |c| match c {
            1 => CaseId::Convex1,
            2 => CaseId::Convex2,
            _ => CaseId::Convex3,
        },
    ))
}

/// `C(θ) = max(8n cotθ/μ, 8n(2/μ − 1)cot³θ/μ)`.
///
/// The second term makes `(2/μ − 1)cotθ/λ_γ < tanθ/(2λ_{n−1})` whenever
/// `λ_γ > C(θ)` and `λ_{n−1} ≤ 4n cotθ/μ`.
pub fn supercritical_threshold(n: usize, theta: f64, mu: f64) -> f64 {
    let cot = 1.0 / theta.tan();
    let nf = n as f64;
    (2.0 * 4.0 * nf * cot / mu).max(8.0 * nf * (2.0 / mu - 1.0) * cot.powi(3) / mu)
}

/// `gamma` is the 1-based derivative direction; it selects between the
/// γ = n and γ < n clustered branches and is ignored when separated.
pub fn supercritical_case_coefficients(
    s: &Spectrum,
    k: &FormConstants,
    gamma: usize,
) -> Result<FormCase, FormError> {
    let n = s.len();
    let theta = k.theta;
    if !(theta > 0.0) {
        return Err(FormError::BadTheta(theta));
    }
    if s.min() >= 0.0 {
        return Err(FormError::ConvexPath {
            lambda_min: s.min(),
        });
    }
    let angle = lagrangian_angle(s);
    let required = critical_phase(n) + theta;
    if angle < required - tolerance::scaled(tolerance::PHASE_CRITICAL, required) {
        return Err(FormError::Subcritical { angle, required });
    }
    if gamma == 0 || gamma > n {
        return Err(FormError::Gamma { gamma, n });
    }
    k.validate()?;
    let lam = s.values();
    let (tan, cot) = (theta.tan(), 1.0 / theta.tan());
    let nf = n as f64;
    let mu = k.mu;
    let eps = eps_n(n);
    let delta_u = laplacian(s);
    let c_theta = supercritical_threshold(n, theta, mu);

    let lam_n = lam[n - 1].abs();
    let separated = lam_n < mu * tan / (4.0 * nf) || lam[n - 2] > 4.0 * nf * cot / mu;
    if separated {
        let abs = s.abs();
        let mut case = convex_machinery(
            abs.values(),
            delta_u,
            k.a,
            k.c_small,
            (1.0 - mu) * (1.0 - eps),
            SUPER_COEFF,
            |_| CaseId::SuperSeparated,
        );
        case.bounds = Some(SuperBounds {
            separated: true,
            eps_hat: mu,
            tau: None,
            m: 0,
            c_theta,
        });
        return Ok(case);
    }

    let m = lam.iter().take_while(|&&l| l > c_theta).count();
    let big = k.a + delta_u;
    let n4 = nf.powi(4);
    let a: Vec<f64> = lam
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if i < m {
                (2.0 * (1.0 - eps) * l * big / (1.0 + l * l)).min(n4)
            } else {
                n4 + (i + 1) as f64
            }
        })
        .collect();
    let eps_hat = 0.5 * theta.sin().powi(2);
    let (id, tau) = if gamma == n {
        (CaseId::SuperClusteredGammaN, None)
    } else {
        let kappa = if gamma <= m { 0.5 * mu } else { 1.0 };
        let tau = tan / lam[n - 2] - (1.0 / kappa - 1.0) * cot / lam[gamma - 1];
        (CaseId::SuperClusteredGammaLtN, Some(tau))
    };
    Ok(FormCase::new(
        id,
        a,
        SUPER_COEFF,
        Some(SuperBounds {
            separated: false,
            eps_hat,
            tau,
            m,
            c_theta,
        }),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dim2Regime {
    Convex,
    Supercritical,
}

/// `c(θ) = sinθ/(1 + sinθ)`, the largest constant with
/// `λ₁ + λ₂ ≥ 2c(θ)λ₁` whenever `arctan λ₁ + arctan λ₂ ≥ θ`.
pub fn dim2_supercritical_slope(theta: f64) -> f64 {
    theta.sin() / (1.0 + theta.sin())
}

/// `2(λ₁+λ₂) − (1+ε+2δ)(λ₁²−λ₂²)²/((A+Δu)(1+λ₁²)) − target`.
pub fn dim2_jacobi_margin(
    s: &Spectrum,
    k: &FormConstants,
    regime: Dim2Regime,
) -> Result<f64, FormError> {
    if s.len() != 2 {
        return Err(FormError::Dimension {
            expected: 2,
            got: s.len(),
        });
    }
    let (l1, l2) = (s.values()[0], s.values()[1]);
    let target = match regime {
        Dim2Regime::Convex => {
            if l2 < 0.0 {
                return Err(FormError::NotConvex { lambda_min: l2 });
            }
            0.5 * l1
        }
        Dim2Regime::Supercritical => {
            if !(k.theta > 0.0) {
                return Err(FormError::BadTheta(k.theta));
            }
            let angle = lagrangian_angle(s);
            if angle < k.theta {
                return Err(FormError::Subcritical {
                    angle,
                    required: k.theta,
                });
            }
            dim2_supercritical_slope(k.theta) * l1
        }
    };
    let delta_u = l1 + l2;
    let diff = (l1 - l2) * (l1 + l2);
    let sub = (1.0 + k.eps + 2.0 * k.delta) * diff * diff / ((k.a + delta_u) * (1.0 + l1 * l1));
    Ok(2.0 * delta_u - sub - target)
}

/// Smallest eigenvalue of `diag(d) − coeff·𝟙𝟙ᵀ` restricted to the hyperplane
/// orthogonal to `normal`.
pub fn hyperplane_qform_min_eig(d: &[f64], coeff: f64, normal: &[f64]) -> Result<f64, FormError> {
    let n = d.len();
    assert_eq!(normal.len(), n);
    if n < 2 {
        return Ok(f64::INFINITY);
    }
    let norm = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut v: Vec<f64> = normal.iter().map(|x| x / norm).collect();
    // Householder reflection taking the unit normal to ±e_n
    let sign = if v[n - 1] >= 0.0 { 1.0 } else { -1.0 };
    v[n - 1] += sign;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = if i == j { 1.0 } else { 0.0 } - 2.0 * v[i] * v[j] / vv;
        }
    }
    let mut q = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            q.set(i, j, if i == j { d[i] - coeff } else { -coeff });
        }
    }
    let full = q.congruence_t(&h);
    let mut sub = SymMatrix::zeros(n - 1);
    for i in 0..n - 1 {
        for j in i..n - 1 {
            sub.set(i, j, full.get(i, j));
        }
    }
    let e = eigen_sym(&sub)?;
    Ok(*e.values.last().expect("non-empty"))
}
