use super::{SpectralError, Spectrum, SymMatrix};
use crate::tolerance;

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
///
/// `vectors` is row-major with eigenvector `k` stored in column `k`, so that
/// `M = Q diag(values) Qᵀ`.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl SymEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Column `k` of the eigenbasis.
    pub fn vector(&self, k: usize) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|r| self.vectors[r * n + k]).collect()
    }

    pub fn spectrum(&self) -> Result<Spectrum, SpectralError> {
        Spectrum::from_sorted(self.values.clone())
    }

    /// `Q diag(f(λ)) Qᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        SymMatrix::from_eigen(&mapped, &self.vectors)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::from_eigen(&self.values, &self.vectors)
    }
}

/// Cyclic Jacobi eigen-solver for small symmetric matrices.
///
/// Rotations are applied in the fixed row-by-row order `(0,1), (0,2), …,
/// (n−2,n−1)`, so the output is bit-reproducible for a given input.
pub fn eigen_sym(m: &SymMatrix) -> Result<SymEigen, SpectralError> {
    let n = m.dim();
    if !m.is_finite() {
        return Err(SpectralError::NonFinite);
    }
    let scale = m.max_abs();
    let asym = m.max_asymmetry();
    let tol = tolerance::SYMMETRY * scale;
    if asym > tol {
        return Err(SpectralError::NotSymmetric {
            max_asymmetry: asym,
            tolerance: tol,
        });
    }

    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m.get(i, j) + m.get(j, i));
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut converged = n < 2 || frob == 0.0;
    let mut sweeps = 0;
    while !converged && sweeps < tolerance::JACOBI_MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                // theta·theta can overflow even when theta is finite
                let t = if t.is_finite() { t } else { 0.5 / theta };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        converged = off <= tolerance::JACOBI_OFF_DIAGONAL * frob;
    }
    if !converged {
        let off = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].abs())
            .fold(0.0, f64::max);
        return Err(SpectralError::NoConvergence { sweeps, off_diagonal: off });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&k| a[k * n + k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &k) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + col] = v[r * n + k];
        }
    }
    Ok(SymEigen { values, vectors })
}
