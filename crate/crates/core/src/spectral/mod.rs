//! Finite-dimensional mathematics of the operator `F(D²u) = Σ arctan λᵢ`.
//!
//! Everything here acts on a single symmetric matrix or its eigenvalue list:
//! eigen-decomposition, the Lagrangian angle, elementary symmetric
//! polynomials, the volume element and the level-set identities that tie
//! them together.

mod eigen;
mod matrix;

pub use eigen::{eigen_sym, SymEigen};
pub use matrix::SymMatrix;

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::tolerance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix is not symmetric: max |a_ij - a_ji| = {max_asymmetry:e} exceeds {tolerance:e}")]
    NotSymmetric { max_asymmetry: f64, tolerance: f64 },
    #[error("matrix or spectrum contains non-finite entries")]
    NonFinite,
    #[error("a spectrum needs at least two eigenvalues, got {len}")]
    TooShort { len: usize },
    #[error("eigenvalues are not sorted in descending order")]
    Unsorted,
    #[error("sigma_k order k={k} outside 0..={n}")]
    SigmaOrder { k: usize, n: usize },
    #[error("phase {value} is outside the attainable range (-{n}π/2, {n}π/2)")]
    PhaseOutOfRange { value: f64, n: usize },
    #[error("Jacobi sweeps did not converge after {sweeps} sweeps (off-diagonal {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },
}

/// Eigenvalues `λ₁ ≥ … ≥ λₙ` of a symmetric Hessian, `n ≥ 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    /// Sorts `values` in descending order.
    pub fn new(mut values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite);
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Self::from_sorted(values)
    }

    pub fn from_sorted(values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() < 2 {
            return Err(SpectralError::TooShort { len: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite);
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(SpectralError::Unsorted);
        }
        Ok(Self(values))
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// `λ₁`.
    pub fn max(&self) -> f64 {
        self.0[0]
    }

    /// `λₙ`.
    pub fn min(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// `Δu = σ₁`.
    pub fn trace(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Spectral norm `max |λᵢ|`.
    pub fn norm(&self) -> f64 {
        self.max().abs().max(self.min().abs())
    }

    pub fn abs(&self) -> Spectrum {
        Spectrum::new(self.0.iter().map(|v| v.abs()).collect()).expect("finite by invariant")
    }
}

/// Critical phase `(n−2)π/2`.
#[inline]
pub fn critical_phase(n: usize) -> f64 {
    (n as f64 - 2.0) * FRAC_PI_2
}

/// Upper end `nπ/2` of the attainable phase range.
#[inline]
pub fn max_phase(n: usize) -> f64 {
    n as f64 * FRAC_PI_2
}

/// `Θ = Σ arctan λᵢ`.
pub fn lagrangian_angle(s: &Spectrum) -> f64 {
    s.values().iter().map(|l| l.atan()).sum()
}

/// `(cos Θ, sin Θ)` from the unit factors `(1 + iλⱼ)/|1 + iλⱼ|`.
///
/// Keeps relative accuracy in the small component when `Θ` sits near a
/// multiple of `π/2`, where `cos(Θ)` of the summed angle would not.
pub fn phase_factor(s: &Spectrum) -> (f64, f64) {
    let mut re = 1.0;
    let mut im = 0.0;
    for &l in s.values() {
        let r = 1.0_f64.hypot(l);
        let (c, sn) = (1.0 / r, l / r);
        let nre = re * c - im * sn;
        let nim = re * sn + im * c;
        re = nre;
        im = nim;
    }
    (re, im)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegimeTag {
    Subcritical,
    Critical,
    Supercritical,
}

/// Phase regime with the supercritical margin `θ = |φ| − (n−2)π/2` (zero otherwise).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseRegime {
    pub tag: RegimeTag,
    pub margin: f64,
}

impl PhaseRegime {
    pub fn is_supercritical(&self) -> bool {
        self.tag == RegimeTag::Supercritical
    }
}

pub fn phase_classify(theta_value: f64, n: usize) -> Result<PhaseRegime, SpectralError> {
    if !theta_value.is_finite() || theta_value.abs() >= max_phase(n) {
        return Err(SpectralError::PhaseOutOfRange {
            value: theta_value,
            n,
        });
    }
    let crit = critical_phase(n);
    let gap = theta_value.abs() - crit;
    let band = tolerance::scaled(tolerance::PHASE_CRITICAL, crit);
    let regime = if gap.abs() <= band {
        PhaseRegime {
            tag: RegimeTag::Critical,
            margin: 0.0,
        }
    } else if gap > 0.0 {
        PhaseRegime {
            tag: RegimeTag::Supercritical,
            margin: gap,
        }
    } else {
        PhaseRegime {
            tag: RegimeTag::Subcritical,
            margin: 0.0,
        }
    };
    Ok(regime)
}

/// All elementary symmetric polynomials `σ₀ … σₙ` of `values`.
///
/// Uses `e_k(λ₁..λ_m) = e_k(λ₁..λ_{m−1}) + λ_m e_{k−1}(λ₁..λ_{m−1})`.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for (m, &l) in values.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            e[k] += l * e[k - 1];
        }
    }
    e
}

pub fn sigma_k(s: &Spectrum, k: usize) -> Result<f64, SpectralError> {
    let n = s.len();
    if k > n {
        return Err(SpectralError::SigmaOrder { k, n });
    }
    Ok(elementary_symmetric(s.values())[k])
}

/// `V = Π √(1+λᵢ²)`.
pub fn volume_element(s: &Spectrum) -> f64 {
    s.values().iter().map(|l| 1.0_f64.hypot(*l)).product()
}

/// Residuals of `Π(1 + iλⱼ) = V e^{iΘ}` split into real and imaginary parts.
#[derive(Clone, Copy, Debug)]
pub struct ProductIdentity {
    pub residual_cos: f64,
    pub residual_sin: f64,
    pub volume: f64,
}

impl ProductIdentity {
    pub fn holds(&self) -> bool {
        let bound = tolerance::PRODUCT_IDENTITY * self.volume;
        self.residual_cos <= bound && self.residual_sin <= bound
    }
}

pub fn complex_product_identity(s: &Spectrum) -> ProductIdentity {
    let sig = elementary_symmetric(s.values());
    let theta = lagrangian_angle(s);
    let v = volume_element(s);
    let mut even = 0.0;
    let mut odd = 0.0;
    for (k, &sk) in sig.iter().enumerate() {
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            even += sign * sk;
        } else {
            odd += sign * sk;
        }
    }
    ProductIdentity {
        residual_cos: (v * theta.cos() - even).abs(),
        residual_sin: (v * theta.sin() - odd).abs(),
        volume: v,
    }
}

/// Two sides of `Σᵢ V/(1+λᵢ²) = Σ_{k<n} c_k σ_k` with `c_k = (n−k) cos(kπ/2 − Θ)`.
#[derive(Clone, Debug)]
pub struct TraceExpansion {
    pub lhs: f64,
    pub rhs: f64,
    pub coefficients: Vec<f64>,
}

impl TraceExpansion {
    pub fn relative_residual(&self) -> f64 {
        (self.lhs - self.rhs).abs() / (1.0 + self.lhs.abs())
    }
}

pub fn inverse_metric_trace_expansion(s: &Spectrum) -> TraceExpansion {
    let n = s.len();
    let v = volume_element(s);
    let lhs: f64 = s.values().iter().map(|l| v / (1.0 + l * l)).sum();
    let sig = elementary_symmetric(s.values());
    let (cos_t, sin_t) = phase_factor(s);
    // Re(i^k e^{-iΘ}) = cos(kπ/2 − Θ)
    let coefficients: Vec<f64> = (0..n)
        .map(|k| {
            let re = match k % 4 {
                0 => cos_t,
                1 => sin_t,
                2 => -cos_t,
                _ => -sin_t,
            };
            (n - k) as f64 * re
        })
        .collect();
    let rhs = coefficients.iter().zip(&sig).map(|(c, s)| c * s).sum();
    TraceExpansion {
        lhs,
        rhs,
        coefficients,
    }
}

/// Sign structure of a spectrum on critical and supercritical phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructureReport {
    pub applies: bool,
    /// `λ_{n−1} ≥ |λₙ|`; `None` when the phase is subcritical.
    pub ordered: Option<bool>,
    /// `σ_k ≥ 0` for `1 ≤ k ≤ n−1`; `None` when the phase is subcritical.
    pub sigmas_nonneg: Option<bool>,
}

pub fn supercritical_structure_check(s: &Spectrum) -> StructureReport {
    let n = s.len();
    let applies = lagrangian_angle(s) >= critical_phase(n);
    if !applies {
        return StructureReport {
            applies,
            ordered: None,
            sigmas_nonneg: None,
        };
    }
    let v = s.values();
    let last = v[n - 1].abs();
    let ordered = v[n - 2] >= last - tolerance::ORDERING * (1.0 + last);
    let sig = elementary_symmetric(v);
    let abs_vals: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let sig_abs = elementary_symmetric(&abs_vals);
    let sigmas_nonneg = (1..n).all(|k| sig[k] >= -tolerance::SIGMA_SIGN * sig_abs[k]);
    StructureReport {
        applies,
        ordered: Some(ordered),
        sigmas_nonneg: Some(sigmas_nonneg),
    }
}

/// `F(M) = Σ arctan λᵢ(M)`.
pub fn lagrangian_operator(m: &SymMatrix) -> Result<f64, SpectralError> {
    Ok(eigen_sym(m)?.values.iter().map(|l| l.atan()).sum())
}

/// Derivative of `F` at `M`: `(I + M²)⁻¹`.
pub fn operator_derivative(m: &SymMatrix) -> Result<SymMatrix, SpectralError> {
    Ok(eigen_sym(m)?.map(|l| 1.0 / (1.0 + l * l)))
}
