//! Phase functions `φ(x)` with their Lipschitz constant and regime.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::Grid;
use crate::spectral::{max_phase, phase_classify, PhaseRegime, SpectralError};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("phase range [{inf}, {sup}] leaves (−nπ/2, nπ/2) for n = {n}")]
    Range { inf: f64, sup: f64, n: usize },
    #[error("Lipschitz constant {0} must be finite and nonnegative")]
    Lipschitz(f64),
    #[error("phase is not finite at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("mollification index k = {0} must be at least 1")]
    BadK(i64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Clone)]
pub struct PhaseSpec {
    n: usize,
    value: ScalarFn,
    gradient: Option<VectorFn>,
    lipschitz: f64,
    range: (f64, f64),
    regime: PhaseRegime,
    label: String,
}

impl fmt::Debug for PhaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseSpec")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("lipschitz", &self.lipschitz)
            .field("range", &self.range)
            .field("regime", &self.regime)
            .finish()
    }
}

impl PhaseSpec {
    pub fn constant(n: usize, c: f64) -> Result<Self, PhaseError> {
        Self::assemble(n, Arc::new(move |_| c), None, 0.0, (c, c), format!("constant {c}"))
            .map(|mut p| {
                p.gradient = Some(Arc::new(move |_: &[f64]| vec![0.0; n]));
                p
            })
    }

    /// Range is taken as the min and max over the nodes of `grid`.
    pub fn from_fn(
        grid: &Grid,
        value: ScalarFn,
        lipschitz: f64,
        label: impl Into<String>,
    ) -> Result<Self, PhaseError> {
        let mut inf = f64::INFINITY;
        let mut sup = f64::NEG_INFINITY;
        for idx in 0..grid.len() {
            let x = grid.coord(idx);
            let v = value(&x);
            if !v.is_finite() {
                return Err(PhaseError::NonFinite(x));
            }
            inf = inf.min(v);
            sup = sup.max(v);
        }
        Self::assemble(grid.dim(), value, None, lipschitz, (inf, sup), label.into())
    }

    /// Phase with a caller-supplied range bound.
    pub fn with_bounds(
        n: usize,
        value: ScalarFn,
        lipschitz: f64,
        range: (f64, f64),
        label: impl Into<String>,
    ) -> Result<Self, PhaseError> {
        Self::assemble(n, value, None, lipschitz, range, label.into())
    }

    fn assemble(
        n: usize,
        value: ScalarFn,
        gradient: Option<VectorFn>,
        lipschitz: f64,
        range: (f64, f64),
        label: String,
    ) -> Result<Self, PhaseError> {
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(PhaseError::Lipschitz(lipschitz));
        }
        let top = max_phase(n);
        if !(range.0 > -top && range.1 < top) {
            return Err(PhaseError::Range {
                inf: range.0,
                sup: range.1,
                n,
            });
        }
        // the regime is governed by the smallest |φ| on the box
        let closest = if range.0 <= 0.0 && range.1 >= 0.0 {
            0.0
        } else {
            range.0.abs().min(range.1.abs())
        };
        let regime = phase_classify(closest, n)?;
        Ok(Self {
            n,
            value,
            gradient,
            lipschitz,
            range,
            regime,
            label,
        })
    }

    pub fn with_gradient(mut self, gradient: VectorFn) -> Self {
        self.gradient = Some(gradient);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn evaluator(&self) -> ScalarFn {
        Arc::clone(&self.value)
    }

    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn regime(&self) -> PhaseRegime {
        self.regime
    }

    /// Supercritical margin θ, zero outside the supercritical regime.
    pub fn theta(&self) -> f64 {
        self.regime.margin
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_constant(&self) -> bool {
        self.range.0 == self.range.1 && self.lipschitz == 0.0
    }

    /// Largest difference quotient `|φ(x) − φ(y)|/|x − y|` over neighbouring
    /// node pairs of `grid` (axis and diagonal neighbours).
    pub fn max_difference_quotient(&self, grid: &Grid) -> f64 {
        let n = grid.dim();
        let offsets = neighbour_offsets(n);
        let vals: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| self.eval(&grid.coord(i)))
            .collect();
        let mut worst = 0.0_f64;
        for idx in 0..grid.len() {
            let m = grid.multi_index(idx);
            for off in &offsets {
                let mut other = m.clone();
                let mut ok = true;
                for d in 0..n {
                    let v = m[d] as isize + off[d];
                    if v < 0 || v >= grid.points()[d] as isize {
                        ok = false;
                        break;
                    }
                    other[d] = v as usize;
                }
                if !ok {
                    continue;
                }
                let j = grid.flat_index(&other);
                let (x, y) = (grid.coord(idx), grid.coord(j));
                let dist = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                worst = worst.max((vals[idx] - vals[j]).abs() / dist);
            }
        }
        worst
    }

    /// Whether sampled difference quotients respect the declared constant.
    pub fn lipschitz_holds(&self, grid: &Grid) -> bool {
        self.max_difference_quotient(grid) <= self.lipschitz * (1.0 + crate::tolerance::LIPSCHITZ)
    }
}

/// Half of the `3ⁿ − 1` neighbour offsets (one of each ± pair).
fn neighbour_offsets(n: usize) -> Vec<Vec<isize>> {
    let total = 3_usize.pow(n as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let off: Vec<isize> = (0..n)
            .map(|_| {
                let d = (c % 3) as isize - 1;
                c /= 3;
                d
            })
            .collect();
        if let Some(first) = off.iter().find(|&&d| d != 0) {
            if *first > 0 {
                out.push(off);
            }
        }
    }
    out
}
