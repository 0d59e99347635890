//! Approximation of a Lipschitz phase by mollified phases `φ_k`, the
//! Dirichlet solves for each `φ_k`, and the comparison sandwich between
//! consecutive solutions.

mod quadrature;

pub use quadrature::{bump, gauss_legendre, MollifierStencil};

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{Grid, GridError, GridField};
use crate::phase::{PhaseError, PhaseSpec};
use crate::solver::{
    barrier_shift, hessian_sup, newton_solve, sandwich_check, SolveError, SolveOptions,
};
use crate::spectral::{critical_phase, eigen_sym, max_phase};

/// Tensor Gauss order of the mollifier quadrature.
pub const QUADRATURE_ORDER: usize = 8;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("k = {0} must be at least 1")]
    BadK(i64),
    #[error("K = {0} must be at least 2")]
    BadSchedule(usize),
    #[error("Hölder exponent {0} outside (0, 1)")]
    Alpha(f64),
    #[error("pipeline needs a supercritical phase: {0}")]
    NotSupercritical(String),
    #[error("barrier calibration failed at k = {k}: gap {gap} not reachable")]
    Calibration { k: usize, gap: f64 },
    #[error("solve failed at k = {k}: {source}")]
    Solve {
        k: usize,
        #[source]
        source: SolveError,
        partial: Box<PipelineReport>,
    },
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Identity on `[lo + w, hi − w]`, saturating smoothly (C²) into `(lo, hi)`.
pub fn smooth_clamp(v: f64, lo: f64, hi: f64, w: f64) -> f64 {
    if v > hi - w {
        hi - w + w * ((v - (hi - w)) / w).tanh()
    } else if v < lo + w {
        lo + w + w * ((v - (lo + w)) / w).tanh()
    } else {
        v
    }
}

/// Mollifier radius `r_k = 1/(k·max(Lip φ, 1))`.
pub fn mollifier_radius(phi: &PhaseSpec, k: usize) -> f64 {
    1.0 / (k as f64 * phi.lipschitz().max(1.0))
}

/// `φ_k = clamp(φ ∗ ρ_{r_k})` with the bump `ρ` and range clamp
/// `[(n−2)π/2 + θ − 1/(4k), nπ/2 − 1/(4k)]`.
pub fn mollify_phase(phi: &PhaseSpec, k: i64) -> Result<PhaseSpec, PipelineError> {
    if k < 1 {
        return Err(PipelineError::BadK(k));
    }
    let ku = k as usize;
    if phi.is_constant() {
        return Ok(phi.clone().with_label(format!("{} (k={k})", phi.label())));
    }
    let n = phi.dim();
    let r = mollifier_radius(phi, ku);
    let stencil = MollifierStencil::new(n, QUADRATURE_ORDER).map_err(PhaseError::from)?;
    let quarter = 0.25 / k as f64;
    let lo = if phi.regime().is_supercritical() {
        critical_phase(n) + phi.theta() - quarter
    } else {
        f64::NEG_INFINITY
    };
    let hi = max_phase(n) - quarter;
    let w = 0.5 * quarter;
    let base = phi.evaluator();
    let value = Arc::new(move |x: &[f64]| {
        let mut y = vec![0.0; x.len()];
        let mut acc = 0.0;
        for (p, wt) in stencil.points.iter().zip(&stencil.weights) {
            for d in 0..x.len() {
                y[d] = x[d] - r * p[d];
            }
            acc += wt * base(&y);
        }
        smooth_clamp(acc, lo, hi, w)
    });
    let lip = phi.lipschitz();
    let (inf, sup) = phi.range();
    let range = ((inf - lip * r).max(lo), (sup + lip * r).min(hi));
    Ok(PhaseSpec::with_bounds(n, value, lip, range, format!("{} (k={k})", phi.label()))?)
}

/// Dense sampling grid with twice the resolution of `grid`.
pub fn refined(grid: &Grid) -> Grid {
    Grid::new(
        grid.extent().to_vec(),
        grid.points().iter().map(|p| 2 * p - 1).collect(),
    )
    .expect("refinement of a valid grid")
}

/// `max |φ_k − φ|` over the nodes of `sample`.
pub fn sup_distance(a: &PhaseSpec, b: &PhaseSpec, sample: &Grid) -> f64 {
    (0..sample.len())
        .into_par_iter()
        .map(|i| {
            let x = sample.coord(i);
            (a.eval(&x) - b.eval(&x)).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Largest per-axis count for which `holder_quotient` uses every node pair.
pub const HOLDER_FULL_LIMIT: usize = 33;

/// `max ‖D²u(x) − D²u(y)‖∞/|x − y|^α` over interior node pairs of the
/// centered half-box (entrywise max norm).
pub fn holder_quotient(u: &GridField, alpha: f64) -> Result<f64, PipelineError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PipelineError::Alpha(alpha));
    }
    let g = &u.grid;
    let maxp = *g.points().iter().max().expect("n ≥ 2");
    let stride = if maxp <= HOLDER_FULL_LIMIT {
        1
    } else {
        (maxp - 1).div_ceil(HOLDER_FULL_LIMIT - 1)
    };
    let center = g.multi_index(g.center_node());
    let nodes: Vec<usize> = g
        .inner_nodes(0.5)
        .into_iter()
        .filter(|&p| g.is_interior(p))
        .filter(|&p| {
            g.multi_index(p)
                .iter()
                .zip(&center)
                .all(|(a, c)| a.abs_diff(*c) % stride == 0)
        })
        .collect();
    let hs: Vec<(Vec<f64>, Vec<f64>)> = nodes
        .par_iter()
        .map(|&p| {
            let h = crate::solver::discrete_hessian(u, p).expect("interior node");
            (g.coord(p), h.as_slice().to_vec())
        })
        .collect();
    let best = (0..hs.len())
        .into_par_iter()
        .map(|i| {
            let (xi, hi) = &hs[i];
            let mut m = 0.0_f64;
            for (xj, hj) in &hs[i + 1..] {
                let dist = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let diff = hi.iter().zip(hj).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                m = m.max(diff / dist.powf(alpha));
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions {
    pub solve: SolveOptions,
    pub alpha: f64,
    /// Half-width fraction of the inner box used for `hess_sup`.
    pub inner_fraction: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            alpha: 0.5,
            inner_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineRow {
    pub k: usize,
    pub phik_err: f64,
    pub lip: f64,
    pub iters: usize,
    pub hess_sup: f64,
    /// Sandwich between `u_k` and `u_{2k}`; `None` on the finest row.
    pub sandwich_ok: Option<bool>,
    pub sandwich_violation: Option<f64>,
    pub delta: Option<f64>,
    pub diff_to_ref: f64,
    pub holder: f64,
    pub final_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineReport {
    pub rows: Vec<PipelineRow>,
    /// `δ_k = c_cmp/k` for every consecutive pair.
    pub c_cmp: f64,
    /// `‖u_k − u_{2k}‖∞` per consecutive pair.
    pub cauchy: Vec<f64>,
    pub barrier_radius: f64,
}

pub const CSV_HEADER: &str = "k,phik_err,lip,iters,hess_sup,sandwich_ok,diff_to_ref,holder";

impl PipelineReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let sw = match r.sandwich_ok {
                Some(true) => "true",
                Some(false) => "false",
                None => "NA",
            };
            writeln!(
                s,
                "{},{:.16e},{:.16e},{},{:.16e},{},{:.16e},{:.16e}",
                r.k, r.phik_err, r.lip, r.iters, r.hess_sup, sw, r.diff_to_ref, r.holder
            )
            .expect("string write");
        }
        s
    }

    pub fn mollification_ok(&self) -> bool {
        self.rows.iter().all(|r| r.phik_err <= 1.0 / r.k as f64)
    }

    pub fn sandwich_ok(&self) -> bool {
        self.rows.iter().all(|r| r.sandwich_ok != Some(false))
    }

    /// `(max − min)/max` of `hess_sup` over rows with `k ≥ k_min`.
    pub fn hess_spread(&self, k_min: usize) -> f64 {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.k >= k_min).map(|r| r.hess_sup).collect();
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        if v.is_empty() || hi <= 0.0 {
            0.0
        } else {
            (hi - lo) / hi
        }
    }

    pub fn diff_nonincreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].diff_to_ref <= w[0].diff_to_ref)
    }

    pub fn cauchy_nonincreasing(&self) -> bool {
        self.cauchy.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Dyadic schedule `2, 4, …, 2^⌈log₂K⌉`.
pub fn k_schedule(big_k: usize) -> Vec<usize> {
    let mut ks = vec![2];
    while *ks.last().expect("non-empty") < big_k {
        let next = ks.last().expect("non-empty") * 2;
        ks.push(next);
    }
    ks
}

/// Smallest `δ` (to 0.1%) with `F(D²u ± 2δI) − F(D²u) ≥ gap` (resp. `≤ −gap`)
/// at every interior node. The discrete Hessian of `δ(|x|² − r²)` is `2δI`,
/// so only the eigenvalues of `D²_h u` are needed.
fn calibrate_delta(u: &GridField, gap: f64) -> Option<f64> {
    let spectra: Vec<Vec<f64>> = u
        .grid
        .interior_nodes()
        .par_iter()
        .map(|&p| {
            let h = crate::solver::discrete_hessian(u, p).expect("interior node");
            eigen_sym(&h).expect("finite stencil").values
        })
        .collect();
    let lift = |delta: f64| -> f64 {
        spectra
            .par_iter()
            .map(|l| {
                let up: f64 = l.iter().map(|v| (v + 2.0 * delta).atan() - v.atan()).sum();
                let down: f64 = l.iter().map(|v| v.atan() - (v - 2.0 * delta).atan()).sum();
                up.min(down)
            })
            .reduce(|| f64::INFINITY, f64::min)
    };
    let mut hi = gap;
    while lift(hi) < gap {
        hi *= 2.0;
        if hi > 1e6 {
            return None;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if lift(mid) >= gap {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Runs the mollify → solve → compare sequence over the dyadic schedule.
pub fn run_pipeline(
    phi: &PhaseSpec,
    grid: &Grid,
    big_k: usize,
    boundary: &GridField,
    opts: &PipelineOptions,
) -> Result<PipelineReport, PipelineError> {
    if big_k < 2 {
        return Err(PipelineError::BadSchedule(big_k));
    }
    if !phi.regime().is_supercritical() {
        return Err(PipelineError::NotSupercritical(format!(
            "{} has range {:?}",
            phi.label(),
            phi.range()
        )));
    }
    if !boundary.grid.same_as(grid) {
        return Err(GridError::Mismatch.into());
    }
    let ks = k_schedule(big_k);
    let dense = refined(grid);
    let inner: Vec<usize> = grid
        .inner_nodes(opts.inner_fraction)
        .into_iter()
        .filter(|&p| grid.is_interior(p))
        .collect();
    let radius = grid.circumradius();
    let mut report = PipelineReport {
        barrier_radius: radius,
        ..Default::default()
    };
    let mut sols: Vec<(PhaseSpec, GridField)> = Vec::new();
    for &k in &ks {
        let phik = mollify_phase(phi, k as i64)?;
        let phik_err = sup_distance(&phik, phi, &dense);
        let lip = phik.max_difference_quotient(&dense);
        let (u, rep) = match newton_solve(grid, &phik, boundary, &opts.solve) {
            Ok(v) => v,
            Err(source) => {
                return Err(PipelineError::Solve {
                    k,
                    source,
                    partial: Box::new(report),
                })
            }
        };
        report.rows.push(PipelineRow {
            k,
            phik_err,
            lip,
            iters: rep.iterations,
            hess_sup: hessian_sup(&u, &inner),
            sandwich_ok: None,
            sandwich_violation: None,
            delta: None,
            diff_to_ref: 0.0,
            holder: holder_quotient(&u, opts.alpha)?,
            final_residual: rep.final_residual_inf,
        });
        sols.push((phik, u));
    }

    // δ_k large enough that the shifted u_k are sub/super-solutions for φ_{2k}
    let mut c_cmp = 0.0_f64;
    for (i, &k) in ks.iter().enumerate().take(ks.len() - 1) {
        let gap = 1.0 / k as f64 + 1.0 / (2 * k) as f64;
        let d = calibrate_delta(&sols[i].1, gap).ok_or(PipelineError::Calibration { k, gap })?;
        c_cmp = c_cmp.max(d * k as f64);
    }
    report.c_cmp = c_cmp;
    let u_ref = &sols.last().expect("non-empty schedule").1;
    for i in 0..ks.len() {
        report.rows[i].diff_to_ref = sols[i].1.max_diff(u_ref, None)?;
        if i + 1 < ks.len() {
            let delta = c_cmp / ks[i] as f64;
            let (_, u) = &sols[i];
            let next = &sols[i + 1].1;
            let lower = barrier_shift(u, delta, radius);
            let upper = barrier_shift(u, -delta, radius);
            let s = sandwich_check(&lower, next, &upper)?;
            report.rows[i].sandwich_ok = Some(s.ok);
            report.rows[i].sandwich_violation = Some(s.worst_violation);
            report.rows[i].delta = Some(delta);
            report.cauchy.push(u.max_diff(next, None)?);
        }
    }
    Ok(report)
}
