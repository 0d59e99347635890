//! Sparse linear algebra for the Newton steps.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Rows given as `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().expect("entry") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.vals[k] * x[self.cols[k]])
                    .sum()
            })
            .collect()
    }

    fn triplets(&self) -> Vec<Triplet<usize, usize, f64>> {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                t.push(Triplet::new(r, self.cols[k], self.vals[k]));
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFailure {
    pub method: &'static str,
    pub detail: String,
}

/// Direct sparse LU solve.
pub fn lu_solve(a: &Csr, b: &[f64]) -> Result<Vec<f64>, LinearFailure> {
    let fail = |detail: String| LinearFailure {
        method: "sparse-lu",
        detail,
    };
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &a.triplets())
        .map_err(|e| fail(format!("{e:?}")))?;
    // a parallel factorization sums in a thread-count dependent order
    faer::set_global_parallelism(Par::Seq);
    let lu = m.sp_lu().map_err(|e| fail(format!("{e:?}")))?;
    let rhs = Mat::<f64>::from_fn(a.n, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..a.n).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(fail("non-finite solution (singular factor)".into()));
    }
    Ok(out)
}

/// Solver for `Σ_d c_d ∂²_d v = f` on the interior of a box with zero
/// Dirichlet data, by diagonalising each second difference with a DST-I.
pub struct DstPoisson {
    dims: Vec<usize>,
    eig: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    plans: Vec<Arc<dyn Fft<f64>>>,
}

impl DstPoisson {
    /// `dims` are interior counts per axis, `h` the spacings.
    pub fn new(dims: &[usize], h: &[f64], coeffs: &[f64]) -> Self {
        let mut planner = FftPlanner::new();
        let plans = dims.iter().map(|&m| planner.plan_fft_forward(2 * (m + 1))).collect();
        let eig = dims
            .iter()
            .zip(h)
            .map(|(&m, &hd)| {
                (1..=m)
                    .map(|k| {
                        let s = (k as f64 * std::f64::consts::PI / (2.0 * (m + 1) as f64)).sin();
                        -4.0 * s * s / (hd * hd)
                    })
                    .collect()
            })
            .collect();
        Self {
            dims: dims.to_vec(),
            eig,
            coeffs: coeffs.to_vec(),
            plans,
        }
    }

    fn len(&self) -> usize {
        self.dims.iter().product()
    }

    fn stride(&self, axis: usize) -> usize {
        self.dims[axis + 1..].iter().product()
    }

    /// Unnormalised DST-I along `axis`.
    fn dst_axis(&self, data: &mut [f64], axis: usize) {
        let m = self.dims[axis];
        let stride = self.stride(axis);
        let total = self.len();
        let outer = total / (m * stride);
        let plan = &self.plans[axis];
        let l = 2 * (m + 1);
        let starts: Vec<usize> = (0..outer)
            .flat_map(|o| (0..stride).map(move |s| o * m * stride + s))
            .collect();
        let lines: Vec<(usize, Vec<f64>)> = starts
            .par_iter()
            .map(|&start| {
                let mut buf = vec![Complex::new(0.0, 0.0); l];
                for j in 0..m {
                    let v = data[start + j * stride];
                    buf[j + 1].re = v;
                    buf[l - 1 - j].re = -v;
                }
                plan.process(&mut buf);
                (start, (1..=m).map(|k| -0.5 * buf[k].im).collect())
            })
            .collect();
        for (start, line) in lines {
            for (j, v) in line.into_iter().enumerate() {
                data[start + j * stride] = v;
            }
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut v = rhs.to_vec();
        for axis in 0..self.dims.len() {
            self.dst_axis(&mut v, axis);
        }
        let n = self.dims.len();
        let mut idx = vec![0usize; n];
        for item in v.iter_mut() {
            let lam: f64 = (0..n).map(|d| self.coeffs[d] * self.eig[d][idx[d]]).sum();
            *item /= lam;
            for d in (0..n).rev() {
                idx[d] += 1;
                if idx[d] < self.dims[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        let norm: f64 = self.dims.iter().map(|&m| 2.0 / (m + 1) as f64).product();
        for axis in 0..n {
            self.dst_axis(&mut v, axis);
        }
        v.iter_mut().for_each(|x| *x *= norm);
        v
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 60,
            max_iter: 600,
            rel_tol: 1e-12,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Restarted GMRES with right preconditioner `precond ≈ A⁻¹`.
/// Returns the solution and the iteration count.
pub fn gmres(
    a: &Csr,
    b: &[f64],
    precond: impl Fn(&[f64]) -> Vec<f64>,
    opts: GmresOptions,
) -> Result<(Vec<f64>, usize), LinearFailure> {
    let n = a.dim();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let target = opts.rel_tol * bnorm;
    let mut total = 0;
    let mut last_res = bnorm;
    while total < opts.max_iter {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        last_res = beta;
        if beta <= target {
            return Ok((x, total));
        }
        let m = opts.restart;
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut hm = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let zk = precond(&v[k]);
            let mut w = a.mul_vec(&zk);
            z.push(zk);
            // modified Gram-Schmidt
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(&w, vi);
                hm[i][k] = hik;
                w.iter_mut().zip(vi).for_each(|(wj, vj)| *wj -= hik * vj);
            }
            let hn = norm2(&w);
            hm[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * hm[i][k] + sn[i] * hm[i + 1][k];
                hm[i + 1][k] = -sn[i] * hm[i][k] + cs[i] * hm[i + 1][k];
                hm[i][k] = t;
            }
            let d = hm[k][k].hypot(hm[k + 1][k]);
            if d == 0.0 {
                return Err(LinearFailure {
                    method: "gmres",
                    detail: format!("breakdown at inner step {k}"),
                });
            }
            cs[k] = hm[k][k] / d;
            sn[k] = hm[k + 1][k] / d;
            hm[k][k] = d;
            hm[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if g[k + 1].abs() <= target || hn == 0.0 || total >= opts.max_iter {
                break;
            }
            v.push(w.iter().map(|wj| wj / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| hm[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hm[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            x.iter_mut().zip(zi).for_each(|(xj, zj)| *xj += yi * zj);
        }
    }
    let ax = a.mul_vec(&x);
    let res = norm2(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
    if res <= target {
        return Ok((x, total));
    }
    Err(LinearFailure {
        method: "gmres",
        detail: format!(
            "no convergence in {} iterations: relative residual {:e} (previous restart {:e})",
            total,
            res / bnorm,
            last_res / bnorm
        ),
    })
}
