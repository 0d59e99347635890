//! Barrier shifts `u + δ(|x|² − r²)` and the comparison sandwich.

use crate::grid::{GridError, GridField};
use crate::phase::PhaseSpec;
use crate::tolerance;

use super::residual;

/// `u + δ(|x − x₀|² − r²)` with `x₀` the box center.
pub fn barrier_shift(u: &GridField, delta: f64, r: f64) -> GridField {
    let g = &u.grid;
    let c = g.center();
    let mut out = u.clone();
    for (idx, v) in out.data.iter_mut().enumerate() {
        let x = g.coord(idx);
        let d2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        *v += delta * (d2 - r * r);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sandwich {
    pub ok: bool,
    pub worst_violation: f64,
    pub node: Option<usize>,
}

/// `lower ≤ mid ≤ upper` nodewise with slack `1e-8·(1 + ‖mid‖∞)`.
pub fn sandwich_check(lower: &GridField, mid: &GridField, upper: &GridField) -> Result<Sandwich, GridError> {
    if !lower.grid.same_as(&mid.grid) || !upper.grid.same_as(&mid.grid) {
        return Err(GridError::Mismatch);
    }
    let slack = tolerance::SANDWICH * (1.0 + mid.max_abs());
    let mut worst = 0.0_f64;
    let mut node = None;
    for i in 0..mid.data.len() {
        let v = (lower.data[i] - mid.data[i]).max(mid.data[i] - upper.data[i]);
        if v > worst {
            worst = v;
            node = Some(i);
        }
    }
    Ok(Sandwich {
        ok: worst <= slack,
        worst_violation: worst,
        node: if worst > slack { node } else { None },
    })
}

/// Measured `C` in `residual(u + δ(|x|²−r²)) ≥ residual(u) + Cδ`: the
/// smallest interior ratio of the residual increase to `δ`.
pub fn barrier_constant(u: &GridField, phi: &PhaseSpec, delta: f64, r: f64) -> f64 {
    let base = residual(u, phi);
    let shifted = residual(&barrier_shift(u, delta, r), phi);
    u.grid
        .interior_nodes()
        .into_iter()
        .map(|p| (shifted.data[p] - base.data[p]) / delta)
        .fold(f64::INFINITY, f64::min)
}
