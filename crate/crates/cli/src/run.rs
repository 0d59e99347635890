//! Dispatch of a parsed configuration to its suites.

use thiserror::Error;

use lagmc_core::forms::{FormConstants, FormError};
use lagmc_core::grid::{Grid, GridField};
use lagmc_core::harness::HarnessError;
use lagmc_core::phase::{PhaseError, PhaseSpec};
use lagmc_core::pipeline::{PipelineError, PipelineOptions};
use lagmc_core::sampling::SampleStream;
use lagmc_core::solver::{manufactured_problem, Catalog, LinearMethod, SolveError, SolveMode, SolveOptions};

use crate::config::{emit_config, Command, PhaseSource, RunConfig};
use crate::expr;
use crate::report::{Provenance, ReportBundle};
use crate::suites;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_THETA: f64 = 0.3;
pub const DEFAULT_KMAX: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("{0}")]
    Failure(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::NonConvergence(_) => EXIT_NONCONVERGENCE,
            RunError::Failure(_) => EXIT_ASSERTION,
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            RunError::Config(s) => RunError::Config(format!("{what}: {s}")),
            RunError::NonConvergence(s) => RunError::NonConvergence(format!("{what}: {s}")),
            RunError::Failure(s) => RunError::Failure(format!("{what}: {s}")),
        }
    }
}

impl From<SolveError> for RunError {
    fn from(e: SolveError) -> Self {
        let s = e.to_string();
        match e {
            SolveError::NonConvergence { .. } | SolveError::Linear { .. } => RunError::NonConvergence(s),
            SolveError::Phase(_) | SolveError::Catalog(_) | SolveError::PhaseSpec(_) | SolveError::Grid(_) => {
                RunError::Config(s)
            }
            SolveError::BoundaryNode(_) | SolveError::Spectral(_) => RunError::Failure(s),
        }
    }
}

impl From<HarnessError> for RunError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Solve(s) => s.into(),
            HarnessError::Calibration { .. } | HarnessError::Spectral(_) => RunError::Failure(e.to_string()),
            _ => RunError::Config(e.to_string()),
        }
    }
}

impl From<PipelineError> for RunError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Solve { source, .. } => source.into(),
            PipelineError::Calibration { .. } => RunError::Failure(e.to_string()),
            _ => RunError::Config(e.to_string()),
        }
    }
}

impl From<PhaseError> for RunError {
    fn from(e: PhaseError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<FormError> for RunError {
    fn from(e: FormError) -> Self {
        RunError::Failure(e.to_string())
    }
}

/// Result of one run: the bundle, marked partial when `error` is set.
#[derive(Debug)]
pub struct Outcome {
    pub bundle: ReportBundle,
    pub error: Option<RunError>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match &self.error {
            Some(e) => e.exit_code(),
            None if self.bundle.all_passed() => EXIT_PASS,
            None => EXIT_ASSERTION,
        }
    }
}

pub fn solve_options(cfg: &RunConfig) -> SolveOptions {
    let mut o = SolveOptions::default();
    if let Some(t) = cfg.solve.tol {
        o.tol = t;
    }
    if let Some(m) = cfg.solve.max_iter {
        o.max_iter = m;
    }
    o.linear = match cfg.solve.linear.as_deref() {
        Some("direct") => LinearMethod::Direct,
        Some("gmres") => LinearMethod::Gmres,
        _ => LinearMethod::Auto,
    };
    o.mode = SolveMode::Supercritical;
    o
}

fn grid_of(cfg: &RunConfig) -> Result<Grid, RunError> {
    let points = cfg.grid.points.ok_or_else(|| RunError::Config("grid.points is required".into()))?;
    Grid::cube(cfg.n, cfg.grid.lo.unwrap_or(-1.0), cfg.grid.hi.unwrap_or(1.0), points)
        .map_err(|e| RunError::Config(e.to_string()))
}

fn catalog_of(cfg: &RunConfig) -> Result<Catalog, RunError> {
    match &cfg.phase {
        Some(PhaseSource::Catalog(c)) => {
            Catalog::by_id(*c, cfg.n).ok_or_else(|| RunError::Config(format!("unknown catalog entry {c}")))
        }
        _ => Err(RunError::Config("a catalog phase is required".into())),
    }
}

/// Phase, boundary data and (for catalog problems) the exact field.
fn problem_of(
    cfg: &RunConfig,
    grid: &Grid,
    boundary: Option<&str>,
) -> Result<(PhaseSpec, GridField, Option<GridField>), RunError> {
    let phase = cfg.phase.as_ref().ok_or_else(|| RunError::Config("a phase is required".into()))?;
    let phi = match phase {
        PhaseSource::Catalog(_) => {
            let p = manufactured_problem(&catalog_of(cfg)?, grid)?;
            return Ok((p.phi, p.boundary, Some(p.u_exact)));
        }
        PhaseSource::Constant(c) => PhaseSpec::constant(cfg.n, *c)?,
        PhaseSource::Expr { text, lipschitz } => {
            let f = expr::compile(text, cfg.n).map_err(RunError::Config)?;
            PhaseSpec::from_fn(grid, f, *lipschitz, text.clone())?
        }
    };
    let text = boundary.ok_or_else(|| RunError::Config("boundary expression is required".into()))?;
    let g = expr::compile(text, cfg.n).map_err(RunError::Config)?;
    let b = GridField::from_fn(grid, |x| g(x));
    if b.data.iter().any(|v| !v.is_finite()) {
        return Err(RunError::Config(format!("boundary expression `{text}` is not finite on the grid")));
    }
    Ok((phi, b, None))
}

fn constants_for(cfg: &RunConfig, base: FormConstants) -> FormConstants {
    let c = &cfg.constants;
    FormConstants {
        a: c.a.unwrap_or(base.a),
        theta: c.theta.unwrap_or(base.theta),
        eps: c.eps.unwrap_or(base.eps),
        delta: c.delta.unwrap_or(base.delta),
        c_big: c.c_big.unwrap_or(base.c_big),
        kappa: match c.theta {
            Some(t) if base.theta > 0.0 => 1.0 + 0.5 * t.tan().powi(2),
            _ => base.kappa,
        },
        ..base
    }
}

fn dispatch(cfg: &RunConfig, b: &mut ReportBundle) -> Result<(), RunError> {
    let stream = SampleStream::new(cfg.seed_or_default());
    let n = cfg.n;
    match cfg.command {
        Command::VerifyForms => {
            let samples = cfg.forms.samples.unwrap_or(DEFAULT_SAMPLES);
            let theta = cfg.constants.theta.unwrap_or(DEFAULT_THETA);
            suites::rank_one_oracle(b, &[n], samples, &stream.fork("rank-one"))?;
            suites::case_certification(b, n, samples, cfg.constants.a, theta, &stream.fork("certify"))
        }
        Command::Identities => {
            let samples = cfg.identities.samples.unwrap_or(DEFAULT_SAMPLES);
            suites::structure_lemma(b, &[n], samples, &stream.fork("structure"))?;
            suites::level_set_identities(b, &[n], samples, &stream.fork("identities"))?;
            match (&cfg.identities.grids, n <= 3) {
                (Some(g), true) => suites::divergence_identity(b, n, g),
                (Some(_), false) => {
                    b.notes.push(format!("divergence identity skipped: grids are limited to n ≤ 3 (n = {n})"));
                    Ok(())
                }
                (None, _) => Ok(()),
            }
        }
        Command::Refine => {
            let grids = cfg.refine.grids.as_ref().ok_or_else(|| RunError::Config("refine.grids is required".into()))?;
            suites::refine(b, &catalog_of(cfg)?, n, grids, &solve_options(cfg))
        }
        Command::Jacobi => {
            let choice = catalog_of(cfg)?;
            let points = cfg.grid.points.ok_or_else(|| RunError::Config("grid.points is required".into()))?;
            let (variant, base) = suites::jacobi_constants(&choice, n)?;
            let k = constants_for(cfg, base);
            if k.a < 3.0 {
                return Err(RunError::Config(format!("A = {} must be at least 3", k.a)));
            }
            suites::jacobi(b, &choice, n, points, &k, variant)
        }
        Command::Solve => {
            let grid = grid_of(cfg)?;
            let (phi, boundary, exact) = problem_of(cfg, &grid, cfg.solve.boundary.as_deref())?;
            suites::write_solve(b, &grid, &phi, &boundary, &solve_options(cfg), exact.as_ref())
        }
        Command::Approx => {
            let grid = grid_of(cfg)?;
            let (phi, boundary, _) = problem_of(cfg, &grid, cfg.approx.boundary.as_deref())?;
            let opts = PipelineOptions {
                solve: solve_options(cfg),
                alpha: cfg.approx.alpha.unwrap_or(PipelineOptions::default().alpha),
                ..PipelineOptions::default()
            };
            suites::approx(b, &phi, &grid, cfg.approx.kmax.unwrap_or(DEFAULT_KMAX), &boundary, &opts)
        }
    }
}

/// Runs `cfg`; failures keep whatever the suites produced so far.
pub fn run(cfg: &RunConfig) -> Outcome {
    let text = emit_config(cfg);
    let mut bundle = ReportBundle::new(
        cfg.command.name(),
        Provenance::new(&text, cfg.seed_or_default()),
        text,
    );
    let error = dispatch(cfg, &mut bundle).err();
    if let Some(e) = &error {
        bundle.partial = true;
        bundle.notes.push(format!("run stopped: {e}"));
    }
    Outcome { bundle, error }
}
