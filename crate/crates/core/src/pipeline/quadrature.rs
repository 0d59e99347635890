//! Gauss–Legendre rules and the bump mollifier built on them.

use crate::spectral::{eigen_sym, SpectralError, SymMatrix};

/// Nodes and weights of the `order`-point Gauss–Legendre rule on `[−1, 1]`
/// from the Golub–Welsch eigenproblem of the Legendre Jacobi matrix.
pub fn gauss_legendre(order: usize) -> Result<(Vec<f64>, Vec<f64>), SpectralError> {
    let mut j = SymMatrix::zeros(order);
    for k in 1..order {
        let kf = k as f64;
        j.set(k - 1, k, kf / (4.0 * kf * kf - 1.0).sqrt());
    }
    let e = eigen_sym(&j)?;
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| {
            let v0 = e.vector(k)[0];
            (e.values[k], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// `exp(1/(|y|² − 1))` on the open unit ball, zero outside.
pub fn bump(y: &[f64]) -> f64 {
    let r2: f64 = y.iter().map(|v| v * v).sum();
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 / (r2 - 1.0)).exp()
    }
}

/// Tensor Gauss points in the unit ball with positive weights `wⱼ·bump(yⱼ)`
/// normalised to sum to one.
#[derive(Clone, Debug)]
pub struct MollifierStencil {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl MollifierStencil {
    pub fn new(n: usize, order: usize) -> Result<Self, SpectralError> {
        let (x, w) = gauss_legendre(order)?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let total = order.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let mut y = Vec::with_capacity(n);
            let mut wt = 1.0;
            for _ in 0..n {
                y.push(x[c % order]);
                wt *= w[c % order];
                c /= order;
            }
            let b = bump(&y);
            if b > 0.0 {
                points.push(y);
                weights.push(wt * b);
            }
        }
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|v| *v /= s);
        Ok(Self { points, weights })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8).unwrap();
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        for deg in 0..16 {
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-12, "degree {deg}: {q} vs {exact}");
        }
        // the largest node of the 8-point rule
        assert!((x[7] - 0.960_289_856_497_536_3).abs() < 1e-13);
    }

    #[test]
    fn stencil_is_a_probability_in_the_ball() {
        for n in [2, 3] {
            let s = MollifierStencil::new(n, 8).unwrap();
            assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(s.weights.iter().all(|&w| w > 0.0));
            assert!(s.points.iter().all(|y| y.iter().map(|v| v * v).sum::<f64>() < 1.0));
            // symmetric stencil: the first moment vanishes
            for d in 0..n {
                let m: f64 = s.points.iter().zip(&s.weights).map(|(y, w)| w * y[d]).sum();
                assert!(m.abs() < 1e-14);
            }
        }
    }
}
