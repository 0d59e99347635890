use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rayon::prelude::*;

use super::{
    c_small, convex_case_coefficients, dim2_jacobi_margin, hyperplane_qform_min_eig,
    supercritical_case_coefficients, CaseId, Dim2Regime, FormConstants, FormError, CONVEX_COEFF,
    MU,
};
use crate::sampling::SampleStream;
use crate::spectral::{critical_phase, lagrangian_angle, Spectrum};
use crate::tolerance;

/// The regimes that can be sampled and certified.
pub type CaseFamily = CaseId;

/// Floor of the shift `A`; `ln(A + Δu) > 1` needs `A ≥ 3`.
pub const MIN_A: f64 = 3.0;
/// Cap of the search for `A`.
pub const MAX_A: f64 = 1e8;

const MAX_PROPOSALS: usize = 100_000;

#[derive(Clone, Debug)]
struct Sample {
    spectrum: Spectrum,
    gamma: usize,
}

#[derive(Clone, Debug)]
pub struct CertifyOutcome {
    pub ok: bool,
    pub worst_margin: f64,
    /// Spectrum attaining `worst_margin`; reported as the failing witness when `!ok`.
    pub witness: Spectrum,
    pub samples: usize,
    /// Samples whose eigen oracle disagrees with the rank-one criterion.
    pub oracle_disagreements: usize,
    /// Convex families only: min over samples of the smallest eigenvalue of the
    /// unreduced form on the constraint hyperplane, relative to its largest
    /// diagonal entry.
    pub hyperplane_margin: Option<f64>,
}

fn log_above(c: f64, rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random();
    c * 10f64.powf(9.0 * u * u * u)
}

fn below(c: f64, rng: &mut impl Rng) -> f64 {
    let r: f64 = rng.random();
    let u: f64 = rng.random();
    let v = if r < 0.1 {
        0.0
    } else if r < 0.55 {
        c * (1.0 - u)
    } else {
        c * 10f64.powf(-8.0 * u - 1e-3)
    };
    if v < c {
        v
    } else {
        0.0
    }
}

/// Supercritical proposal: `λₙ < 0` and the remaining angles chosen so that
/// `Θ ≥ (n−2)π/2 + θ`.
fn super_proposal(n: usize, theta: f64, rng: &mut impl Rng) -> Option<Vec<f64>> {
    let cot = 1.0 / theta.tan();
    let ln = -cot * 10f64.powf(-8.0 * rng.random::<f64>());
    let slack = FRAC_PI_2 - theta - ln.atan().abs();
    if slack <= 0.0 {
        return None;
    }
    let fractions: Vec<f64> = (0..n - 1)
        .map(|_| {
            let u: f64 = rng.random();
            10f64.powf(-9.0 * u) * rng.random::<f64>()
        })
        .collect();
    let total: f64 = fractions.iter().sum();
    if total >= 1.0 {
        return None;
    }
    let mut v: Vec<f64> = fractions
        .iter()
        .map(|f| 1.0 / (slack * f).max(f64::MIN_POSITIVE).tan())
        .collect();
    v.push(ln);
    Some(v)
}

/// One proposal for `family`; `None` when rejected.
///
/// Returns the spectrum and the derivative direction `γ` (1-based) used by the
/// clustered supercritical branches.
pub fn sample_spectrum(
    family: CaseFamily,
    n: usize,
    theta: f64,
    rng: &mut impl Rng,
) -> Option<(Spectrum, usize)> {
    let c = c_small(n);
    let values: Vec<f64> = match family {
        CaseId::Convex1 => (0..n).map(|_| log_above(c, rng)).collect(),
        CaseId::Convex2 => {
            let k = rng.random_range(1..n);
            (0..n)
                .map(|i| if i < k { log_above(c, rng) } else { below(c, rng) })
                .collect()
        }
        CaseId::Convex3 => (0..n).map(|_| below(c, rng)).collect(),
        CaseId::SuperSeparated | CaseId::SuperClusteredGammaN | CaseId::SuperClusteredGammaLtN => {
            super_proposal(n, theta, rng)?
        }
        CaseId::Dim2Convex => {
            let l1 = 10f64.powf(rng.random_range(-6.0..6.0));
            let u: f64 = rng.random();
            let l2 = if u < 0.05 { 0.0 } else { l1 * u.powi(3) };
            vec![l1, l2]
        }
        CaseId::Dim2Super => {
            if rng.random::<bool>() {
                super_proposal(2, theta, rng)?
            } else {
                let l2 = 10f64.powf(rng.random_range(-6.0..6.0));
                let floor = (theta - l2.atan()).max(0.0).tan().max(l2);
                vec![floor * 10f64.powf(rng.random_range(0.0..6.0)), l2]
            }
        }
    };
    if values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let s = Spectrum::new(values).ok()?;
    let angle = lagrangian_angle(&s);
    let gamma = match family {
        CaseId::SuperClusteredGammaLtN => rng.random_range(1..n),
        _ => n,
    };
    let accept = match family {
        CaseId::Convex1 => s.min() >= c,
        CaseId::Convex2 => s.max() >= c && s.min() < c && s.min() >= 0.0,
        CaseId::Convex3 => s.max() < c && s.min() >= 0.0,
        CaseId::SuperSeparated | CaseId::SuperClusteredGammaN | CaseId::SuperClusteredGammaLtN => {
            let v = s.values();
            let (tan, cot) = (theta.tan(), 1.0 / theta.tan());
            let nf = n as f64;
            let sep = v[n - 1].abs() < MU * tan / (4.0 * nf) || v[n - 2] > 4.0 * nf * cot / MU;
            let in_phase = angle >= critical_phase(n) + theta && s.min() < 0.0;
            in_phase && (sep == (family == CaseId::SuperSeparated))
        }
        CaseId::Dim2Convex => n == 2 && s.min() >= 0.0,
        CaseId::Dim2Super => n == 2 && angle >= theta,
    };
    accept.then_some((s, gamma))
}

fn draw(family: CaseFamily, n: usize, theta: f64, samples: usize, stream: &SampleStream) -> Vec<Sample> {
    let stream = stream.fork(&format!("{}-{n}", family.name()));
    stream.map(samples as u64, |i, rng| {
        for _ in 0..MAX_PROPOSALS {
            if let Some((spectrum, gamma)) = sample_spectrum(family, n, theta, rng) {
                return Sample { spectrum, gamma };
            }
        }
        panic!("no accepted proposal for {} n={n} sample {i}", family.name());
    })
}

fn is_dim2(family: CaseFamily) -> bool {
    matches!(family, CaseId::Dim2Convex | CaseId::Dim2Super)
}

fn constants(family: CaseFamily, n: usize, a: f64, theta: f64) -> FormConstants {
    match family {
        CaseId::Convex1 | CaseId::Convex2 | CaseId::Convex3 => FormConstants::convex(n, a),
        CaseId::Dim2Convex | CaseId::Dim2Super => FormConstants::dim2(a, theta),
        _ => FormConstants::supercritical(n, theta, a),
    }
}

/// Certification margin of one sample: `1 − coeff·Σ1/aᵢ`, or for the
/// two-dimensional families the inequality margin over `1 + λ₁`.
fn margin(family: CaseFamily, k: &FormConstants, s: &Sample) -> Result<f64, FormError> {
    match family {
        CaseId::Convex1 | CaseId::Convex2 | CaseId::Convex3 => {
            Ok(convex_case_coefficients(&s.spectrum, s.spectrum.trace(), k)?.margin())
        }
        CaseId::Dim2Convex | CaseId::Dim2Super => {
            let regime = if family == CaseId::Dim2Convex {
                Dim2Regime::Convex
            } else {
                Dim2Regime::Supercritical
            };
            Ok(dim2_jacobi_margin(&s.spectrum, k, regime)? / (1.0 + s.spectrum.max()))
        }
        _ => Ok(supercritical_case_coefficients(&s.spectrum, k, s.gamma)?.margin()),
    }
}

fn worst(margins: &[f64]) -> (usize, f64) {
    margins
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bm), (i, &m)| if m < bm { (i, m) } else { (bi, bm) })
}

fn margins_at(family: CaseFamily, n: usize, a: f64, theta: f64, samples: &[Sample]) -> Result<Vec<f64>, FormError> {
    let k = constants(family, n, a, theta);
    samples.par_iter().map(|s| margin(family, &k, s)).collect()
}

fn certify_on(
    family: CaseFamily,
    n: usize,
    a: f64,
    theta: f64,
    samples: &[Sample],
) -> Result<CertifyOutcome, FormError> {
    let k = constants(family, n, a, theta);
    let margins = margins_at(family, n, a, theta, samples)?;
    let (wi, wm) = worst(&margins);
    let convex = matches!(family, CaseId::Convex1 | CaseId::Convex2 | CaseId::Convex3);

    let (oracle_disagreements, hyperplane) = if is_dim2(family) {
        (0, None)
    } else {
        let per: Vec<(bool, f64)> = samples
            .par_iter()
            .map(|s| -> Result<(bool, f64), FormError> {
                let case = if convex {
                    convex_case_coefficients(&s.spectrum, s.spectrum.trace(), &k)?
                } else {
                    supercritical_case_coefficients(&s.spectrum, &k, s.gamma)?
                };
                let agrees = if case.a.is_empty() { true } else { case.certify()?.oracle_agrees };
                let h = if convex {
                    let big = a + s.spectrum.trace();
                    let d: Vec<f64> =
                        s.spectrum.values().iter().map(|l| 2.0 * l * big / (1.0 + l * l)).collect();
                    let normal: Vec<f64> = s.spectrum.values().iter().map(|l| 1.0 / (1.0 + l * l)).collect();
                    let dmax = d.iter().fold(0.0_f64, |m, &x| m.max(x)).max(CONVEX_COEFF);
                    hyperplane_qform_min_eig(&d, CONVEX_COEFF, &normal)? / dmax
                } else {
                    f64::INFINITY
                };
                Ok((agrees, h))
            })
            .collect::<Result<_, _>>()?;
        let dis = per.iter().filter(|(ag, _)| !ag).count();
        let h = per.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        (dis, convex.then_some(h))
    };

    let ok = wm >= -tolerance::CERTIFICATE && oracle_disagreements == 0;
    Ok(CertifyOutcome {
        ok,
        worst_margin: wm,
        witness: samples[wi].spectrum.clone(),
        samples: samples.len(),
        oracle_disagreements,
        hyperplane_margin: hyperplane,
    })
}

/// Samples `samples` spectra of `family` and certifies the reduced form at
/// `a_candidate`. `theta` is only read by the supercritical families.
pub fn certify_constants(
    n: usize,
    family: CaseFamily,
    samples: usize,
    a_candidate: f64,
    theta: f64,
    stream: &SampleStream,
) -> Result<CertifyOutcome, FormError> {
    let samples = draw(family, n, theta, samples.max(1), stream);
    certify_on(family, n, a_candidate, theta, &samples)
}

/// Smallest `A` in `[3, 10⁸]` certifying `family`, to 1% relative resolution.
///
/// The same samples serve every candidate and each margin is nondecreasing in
/// `A`, so the search is a plain geometric bisection.
pub fn find_min_a(
    n: usize,
    family: CaseFamily,
    samples: usize,
    theta: f64,
    stream: &SampleStream,
) -> Result<f64, FormError> {
    let samples = draw(family, n, theta, samples.max(1), stream);
    let passes = |a: f64| -> Result<bool, FormError> {
        let m = margins_at(family, n, a, theta, &samples)?;
        Ok(worst(&m).1 >= -tolerance::CERTIFICATE)
    };
    if passes(MIN_A)? {
        return Ok(MIN_A);
    }
    if !passes(MAX_A)? {
        let m = margins_at(family, n, MAX_A, theta, &samples)?;
        let (wi, wm) = worst(&m);
        return Err(FormError::NoAdmissibleA {
            cap: MAX_A,
            worst_margin: wm,
            witness: samples[wi].spectrum.values().to_vec(),
        });
    }
    let (mut lo, mut hi) = (MIN_A, MAX_A);
    while hi / lo > 1.01 {
        let mid = (lo * hi).sqrt();
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
