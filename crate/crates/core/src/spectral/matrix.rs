use std::fmt;

/// Small dense square matrix stored row-major, intended to hold symmetric data.
///
/// Symmetry is not enforced at construction so that callers can hand over raw
/// data and let [`eigen_sym`](super::eigen_sym) reject it with a diagnostic.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Panics if `data.len() != n * n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "expected {} entries, got {}", n * n, data.len());
        Self { n, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "row length must equal the number of rows");
            data.extend_from_slice(r);
        }
        Self { n, data }
    }

    /// `Σ dᵢ qᵢ qᵢᵀ` where `qᵢ` is column `i` of the row-major `basis`.
    pub fn from_eigen(values: &[f64], basis: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n);
        for r in 0..n {
            for c in r..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += basis[r * n + k] * values[k] * basis[c * n + k];
                }
                m.data[r * n + c] = s;
                m.data[c * n + r] = s;
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Plain matrix product; the result is symmetric only when the factors commute.
    pub fn matmul(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        SymMatrix { n, data: out }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `xᵀ M y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let my = self.mul_vec(y);
        x.iter().zip(&my).map(|(a, b)| a * b).sum()
    }

    /// Frobenius inner product `tr(AᵀB)`.
    pub fn frobenius_dot(&self, other: &SymMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// `M + s·I`.
    pub fn shift_diagonal(&self, s: f64) -> SymMatrix {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i] += s;
        }
        m
    }

    /// `QᵀMQ` for a row-major orthogonal `q`.
    pub fn congruence_t(&self, q: &[f64]) -> SymMatrix {
        let n = self.n;
        let mut out = SymMatrix::zeros(n);
        for a in 0..n {
            for b in a..n {
                let mut s = 0.0;
                for i in 0..n {
                    let qia = q[i * n + a];
                    if qia == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        s += qia * self.data[i * n + j] * q[j * n + b];
                    }
                }
                out.set(a, b, s);
            }
        }
        out
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.n.max(1)).collect();
        f.debug_struct("SymMatrix").field("n", &self.n).field("rows", &rows).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn congruence_with_permutation_swaps_entries() {
        let m = SymMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 5.0]]);
        let swap = [0.0, 1.0, 1.0, 0.0];
        let p = m.congruence_t(&swap);
        assert_eq!(p.get(0, 0), 5.0);
        assert_eq!(p.get(1, 1), 1.0);
        assert_eq!(p.get(0, 1), 2.0);
    }

    #[test]
    fn asymmetry_reports_largest_gap() {
        let m = SymMatrix::from_row_major(2, vec![1.0, 2.0, 2.5, 1.0]);
        assert_eq!(m.max_asymmetry(), 0.5);
    }
}
