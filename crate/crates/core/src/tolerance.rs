//! Tolerance table.
//!
//! Every comparison threshold used by the library lives here. Unless noted
//! otherwise a tolerance is absolute below scale 1 and relative above it,
//! see [`scaled`].

/// Symmetry check on input matrices, relative to the largest entry.
pub const SYMMETRY: f64 = 1e-12;

/// Eigen-decomposition reconstruction bound `‖QΛQᵀ − M‖ ≤ RECONSTRUCTION·(1+‖M‖)`.
pub const RECONSTRUCTION: f64 = 1e-10;

/// Off-diagonal stopping threshold for the Jacobi sweeps, relative to `‖M‖_F`.
pub const JACOBI_OFF_DIAGONAL: f64 = 1e-15;

/// Sweep budget for cyclic Jacobi. Quadratic convergence makes this generous.
pub const JACOBI_MAX_SWEEPS: usize = 60;

/// Critical-phase detection band for `phase_classify`.
pub const PHASE_CRITICAL: f64 = 1e-12;

/// Structure-lemma ordering slack, `λ_{n−1} ≥ |λₙ| − ORDERING·(1+|λₙ|)`.
pub const ORDERING: f64 = 1e-12;

/// Structure-lemma sign slack on `σ_k`, relative to `σ_k(|λ|)`.
pub const SIGMA_SIGN: f64 = 1e-10;

/// Level-set identity residual bound, relative to `V`.
pub const PRODUCT_IDENTITY: f64 = 1e-10;

/// Trace-expansion residual bound, relative to `1 + lhs`.
pub const TRACE_EXPANSION: f64 = 1e-9;

/// Certificate band: `psd ⇔ criterion ≤ 1 + CERTIFICATE` and
/// `min_eig ≥ −CERTIFICATE·max(aᵢ)`.
pub const CERTIFICATE: f64 = 1e-9;

/// Nodewise slack of the comparison sandwich, relative to `1 + ‖mid‖∞`.
pub const SANDWICH: f64 = 1e-8;

/// Difference-quotient slack when checking a phase against its Lipschitz constant.
pub const LIPSCHITZ: f64 = 1e-6;

/// Absolute-below-one, relative-above-one scaling.
#[inline]
pub fn scaled(tol: f64, scale: f64) -> f64 {
    tol * scale.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_is_absolute_below_one() {
        assert_eq!(scaled(1e-12, 0.25), 1e-12);
        assert_eq!(scaled(1e-12, -4.0), 4e-12);
    }
}
