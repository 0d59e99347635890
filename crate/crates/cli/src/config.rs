//! `key = value` run configuration with `[section]` headers.
//!
//! `emit` writes keys in schema order with `{:?}` floats, so a file written by
//! `emit` parses back to the same config and re-emits byte for byte.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use thiserror::Error;

use crate::expr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    VerifyForms,
    Jacobi,
    Identities,
    Approx,
    Refine,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Solve,
        Command::VerifyForms,
        Command::Jacobi,
        Command::Identities,
        Command::Approx,
        Command::Refine,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::VerifyForms => "verify-forms",
            Command::Jacobi => "jacobi",
            Command::Identities => "identities",
            Command::Approx => "approx",
            Command::Refine => "refine",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Commands that build grids; these are limited to n ≤ 3.
    fn uses_grid(&self) -> bool {
        matches!(self, Command::Solve | Command::Jacobi | Command::Approx | Command::Refine)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PhaseSource {
    Catalog(char),
    Constant(f64),
    Expr { text: String, lipschitz: f64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GridSection {
    pub points: Option<usize>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstantsSection {
    pub a: Option<f64>,
    pub theta: Option<f64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub c_big: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub linear: Option<String>,
    pub boundary: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SamplesSection {
    pub samples: Option<usize>,
    pub grids: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ApproxSection {
    pub kmax: Option<usize>,
    pub alpha: Option<f64>,
    pub boundary: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub grid: GridSection,
    pub phase: Option<PhaseSource>,
    pub constants: ConstantsSection,
    pub solve: SolveSection,
    pub forms: SamplesSection,
    pub identities: SamplesSection,
    pub approx: ApproxSection,
    pub refine: SamplesSection,
}

impl RunConfig {
    pub fn new(command: Command, n: usize) -> Self {
        Self {
            command,
            n,
            seed: None,
            out: None,
            grid: GridSection::default(),
            phase: None,
            constants: ConstantsSection::default(),
            solve: SolveSection::default(),
            forms: SamplesSection::default(),
            identities: SamplesSection::default(),
            approx: ApproxSection::default(),
            refine: SamplesSection::default(),
        }
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {detail}")]
    Syntax { line: usize, detail: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}` in {section}")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: value `{value}` for `{key}` is out of range: {detail}")]
    OutOfRange {
        line: usize,
        key: String,
        value: String,
        detail: String,
    },
    #[error("line {line}: invalid value `{value}` for `{key}`: {detail}")]
    Invalid {
        line: usize,
        key: String,
        value: String,
        detail: String,
    },
    #[error("line {line}: missing required key `{key}`")]
    Missing { line: usize, key: String },
}

impl ConfigError {
    pub fn line(&self) -> usize {
        match self {
            ConfigError::Syntax { line, .. }
            | ConfigError::UnknownSection { line, .. }
            | ConfigError::UnknownKey { line, .. }
            | ConfigError::Duplicate { line, .. }
            | ConfigError::OutOfRange { line, .. }
            | ConfigError::Invalid { line, .. }
            | ConfigError::Missing { line, .. } => *line,
        }
    }
}

const SECTIONS: [(&str, &[&str]); 9] = [
    ("", &["command", "n", "seed", "out"]),
    ("grid", &["points", "lo", "hi"]),
    ("phase", &["catalog", "constant", "expr", "lipschitz"]),
    ("constants", &["a", "theta", "eps", "delta", "c_big"]),
    ("solve", &["tol", "max_iter", "linear", "boundary"]),
    ("forms", &["samples"]),
    ("identities", &["samples", "grids"]),
    ("approx", &["kmax", "alpha", "boundary"]),
    ("refine", &["grids"]),
];

/// Raw value with the line it came from.
struct Entry {
    line: usize,
    value: String,
}

struct Raw {
    entries: HashMap<String, Entry>,
    sections: HashMap<String, usize>,
    last_line: usize,
}

impl Raw {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    /// Line to cite when `key` is absent: its section header, else the end of file.
    fn missing_line(&self, key: &str) -> usize {
        let section = key.split_once('.').map(|(s, _)| s).unwrap_or("");
        self.sections.get(section).copied().unwrap_or(self.last_line)
    }

    fn missing(&self, key: &str) -> ConfigError {
        ConfigError::Missing {
            line: self.missing_line(key),
            key: key.to_string(),
        }
    }
}

fn tokenize(text: &str) -> Result<Raw, ConfigError> {
    let mut entries = HashMap::new();
    let mut sections = HashMap::new();
    let mut section = String::new();
    let mut last_line = 1;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(rest) = t.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                detail: format!("unterminated section header `{t}`"),
            })?;
            let name = name.trim().to_string();
            if !SECTIONS.iter().any(|(s, _)| *s == name) || name.is_empty() {
                return Err(ConfigError::UnknownSection { line, name });
            }
            if sections.insert(name.clone(), line).is_some() {
                return Err(ConfigError::Duplicate { line, key: format!("[{name}]") });
            }
            section = name;
            continue;
        }
        let (k, v) = t.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            detail: format!("expected `key = value`, got `{t}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        let keys = SECTIONS.iter().find(|(s, _)| *s == section).expect("known section").1;
        if !keys.contains(&k) {
            return Err(ConfigError::UnknownKey {
                line,
                section: if section.is_empty() { "top level".into() } else { format!("[{section}]") },
                key: k.to_string(),
            });
        }
        let full = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
        if entries.contains_key(&full) {
            return Err(ConfigError::Duplicate { line, key: full });
        }
        entries.insert(
            full,
            Entry {
                line,
                value: v.to_string(),
            },
        );
    }
    Ok(Raw {
        entries,
        sections,
        last_line,
    })
}

fn invalid(key: &str, e: &Entry, detail: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        line: e.line,
        key: key.to_string(),
        value: e.value.clone(),
        detail: detail.into(),
    }
}

fn out_of_range(key: &str, e: &Entry, detail: impl Into<String>) -> ConfigError {
    ConfigError::OutOfRange {
        line: e.line,
        key: key.to_string(),
        value: e.value.clone(),
        detail: detail.into(),
    }
}

fn real(raw: &Raw, key: &str, ok: impl Fn(f64) -> bool, range: &str) -> Result<Option<f64>, ConfigError> {
    let Some(e) = raw.get(key) else { return Ok(None) };
    let v: f64 = e.value.parse().map_err(|_| invalid(key, e, "expected a real number"))?;
    if !v.is_finite() || !ok(v) {
        return Err(out_of_range(key, e, range));
    }
    Ok(Some(v))
}

fn integer(raw: &Raw, key: &str, lo: usize, hi: usize) -> Result<Option<usize>, ConfigError> {
    let Some(e) = raw.get(key) else { return Ok(None) };
    let v: usize = e.value.parse().map_err(|_| invalid(key, e, "expected a nonnegative integer"))?;
    if v < lo || v > hi {
        return Err(out_of_range(key, e, format!("must lie in {lo}..={hi}")));
    }
    Ok(Some(v))
}

fn int_list(raw: &Raw, key: &str, lo: usize, hi: usize) -> Result<Option<Vec<usize>>, ConfigError> {
    let Some(e) = raw.get(key) else { return Ok(None) };
    let mut out = Vec::new();
    for part in e.value.split(',') {
        let v: usize = part
            .trim()
            .parse()
            .map_err(|_| invalid(key, e, "expected a comma-separated list of integers"))?;
        if v < lo || v > hi {
            return Err(out_of_range(key, e, format!("every entry must lie in {lo}..={hi}")));
        }
        out.push(v);
    }
    if out.len() < 2 {
        return Err(out_of_range(key, e, "at least two grids are required"));
    }
    if out.windows(2).any(|w| w[1] <= w[0]) {
        return Err(out_of_range(key, e, "grids must be strictly increasing"));
    }
    Ok(Some(out))
}

fn text(raw: &Raw, key: &str) -> Result<Option<String>, ConfigError> {
    let Some(e) = raw.get(key) else { return Ok(None) };
    if e.value.is_empty() {
        return Err(invalid(key, e, "empty value"));
    }
    Ok(Some(e.value.clone()))
}

fn checked_expr(raw: &Raw, key: &str, n: usize) -> Result<Option<String>, ConfigError> {
    let Some(s) = text(raw, key)? else { return Ok(None) };
    expr::compile(&s, n).map_err(|d| invalid(key, raw.get(key).expect("present"), d))?;
    Ok(Some(s))
}

pub fn parse_config(source: &str) -> Result<RunConfig, ConfigError> {
    let raw = tokenize(source)?;
    let cmd_entry = raw.get("command").ok_or_else(|| raw.missing("command"))?;
    let command = Command::from_name(&cmd_entry.value).ok_or_else(|| {
        invalid(
            "command",
            cmd_entry,
            "expected one of solve, verify-forms, jacobi, identities, approx, refine",
        )
    })?;
    let n = integer(&raw, "n", 2, 6)?.ok_or_else(|| raw.missing("n"))?;
    if command.uses_grid() && n > 3 {
        return Err(out_of_range("n", raw.get("n").expect("present"), "grid commands support n ∈ {2, 3}"));
    }
    let seed = match raw.get("seed") {
        None => None,
        Some(e) => Some(e.value.parse::<u64>().map_err(|_| invalid("seed", e, "expected a 64-bit unsigned integer"))?),
    };
    let mut cfg = RunConfig::new(command, n);
    cfg.seed = seed;
    cfg.out = text(&raw, "out")?;

    cfg.grid = GridSection {
        points: integer(&raw, "grid.points", 5, 513)?,
        lo: real(&raw, "grid.lo", |_| true, "finite")?,
        hi: real(&raw, "grid.hi", |_| true, "finite")?,
    };
    let (lo, hi) = (cfg.grid.lo.unwrap_or(-1.0), cfg.grid.hi.unwrap_or(1.0));
    if !(lo < hi) {
        let key = if raw.get("grid.hi").is_some() { "grid.hi" } else { "grid.lo" };
        return Err(out_of_range(key, raw.get(key).expect("present"), "need lo < hi"));
    }

    cfg.phase = parse_phase(&raw, n)?;

    cfg.constants = ConstantsSection {
        a: real(&raw, "constants.a", |v| v >= 3.0, "need A ≥ 3")?,
        theta: real(&raw, "constants.theta", |v| v > 0.0 && v < FRAC_PI_2, "need 0 < θ < π/2")?,
        eps: real(&raw, "constants.eps", |v| v > 0.0 && v <= 1.0, "need 0 < ε ≤ 1")?,
        delta: real(&raw, "constants.delta", |v| v > 0.0 && v <= 1.0, "need 0 < δ ≤ 1")?,
        c_big: real(&raw, "constants.c_big", |v| v > 0.0, "need C > 0")?,
    };
    let linear = text(&raw, "solve.linear")?;
    if let Some(l) = &linear {
        if !["auto", "direct", "gmres"].contains(&l.as_str()) {
            return Err(invalid("solve.linear", raw.get("solve.linear").expect("present"), "expected auto, direct or gmres"));
        }
    }
    cfg.solve = SolveSection {
        tol: real(&raw, "solve.tol", |v| v > 0.0 && v < 1.0, "need 0 < tol < 1")?,
        max_iter: integer(&raw, "solve.max_iter", 1, 1000)?,
        linear,
        boundary: checked_expr(&raw, "solve.boundary", n)?,
    };
    cfg.forms = SamplesSection {
        samples: integer(&raw, "forms.samples", 1, 10_000_000)?,
        grids: None,
    };
    cfg.identities = SamplesSection {
        samples: integer(&raw, "identities.samples", 1, 10_000_000)?,
        grids: int_list(&raw, "identities.grids", 5, 129)?,
    };
    cfg.approx = ApproxSection {
        kmax: integer(&raw, "approx.kmax", 2, 4096)?,
        alpha: real(&raw, "approx.alpha", |v| v > 0.0 && v < 1.0, "need 0 < α < 1")?,
        boundary: checked_expr(&raw, "approx.boundary", n)?,
    };
    cfg.refine = SamplesSection {
        samples: None,
        grids: int_list(&raw, "refine.grids", 5, 513)?,
    };

    // per-command requirements
    match command {
        Command::Solve | Command::Approx => {
            if cfg.grid.points.is_none() {
                return Err(raw.missing("grid.points"));
            }
            let Some(phase) = &cfg.phase else { return Err(raw.missing("phase.catalog")) };
            if !matches!(phase, PhaseSource::Catalog(_)) {
                let key = if command == Command::Solve { "solve.boundary" } else { "approx.boundary" };
                let present = if command == Command::Solve { &cfg.solve.boundary } else { &cfg.approx.boundary };
                if present.is_none() {
                    return Err(raw.missing(key));
                }
            }
        }
        Command::Jacobi | Command::Refine => {
            if command == Command::Jacobi && cfg.grid.points.is_none() {
                return Err(raw.missing("grid.points"));
            }
            if command == Command::Refine && cfg.refine.grids.is_none() {
                return Err(raw.missing("refine.grids"));
            }
            match &cfg.phase {
                Some(PhaseSource::Catalog(_)) => {}
                None => return Err(raw.missing("phase.catalog")),
                Some(_) => {
                    let key = if raw.get("phase.expr").is_some() { "phase.expr" } else { "phase.constant" };
                    return Err(invalid(
                        key,
                        raw.get(key).expect("present"),
                        "this command needs a catalog problem with analytic derivatives",
                    ));
                }
            }
        }
        Command::VerifyForms | Command::Identities => {}
    }
    Ok(cfg)
}

fn parse_phase(raw: &Raw, n: usize) -> Result<Option<PhaseSource>, ConfigError> {
    let given: Vec<&str> = ["phase.catalog", "phase.constant", "phase.expr"]
        .into_iter()
        .filter(|k| raw.get(k).is_some())
        .collect();
    if given.len() > 1 {
        let k = given[1];
        return Err(invalid(k, raw.get(k).expect("present"), format!("conflicts with `{}`", given[0])));
    }
    let lip = real(raw, "phase.lipschitz", |v| v >= 0.0, "need a nonnegative Lipschitz constant")?;
    let source = match given.first() {
        None => None,
        Some(&"phase.catalog") => {
            let e = raw.get("phase.catalog").expect("present");
            match e.value.as_str() {
                "a" | "b" | "c" => Some(PhaseSource::Catalog(e.value.chars().next().expect("one char"))),
                _ => return Err(invalid("phase.catalog", e, "expected a, b or c")),
            }
        }
        Some(&"phase.constant") => {
            let top = n as f64 * FRAC_PI_2;
            let c = real(raw, "phase.constant", |v| v.abs() < top, &format!("need |φ| < nπ/2 = {top}"))?;
            Some(PhaseSource::Constant(c.expect("present")))
        }
        Some(_) => {
            let text = checked_expr(raw, "phase.expr", n)?.expect("present");
            let lipschitz = lip.ok_or_else(|| raw.missing("phase.lipschitz"))?;
            Some(PhaseSource::Expr { text, lipschitz })
        }
    };
    if lip.is_some() && !matches!(source, Some(PhaseSource::Expr { .. })) {
        let e = raw.get("phase.lipschitz").expect("present");
        return Err(invalid("phase.lipschitz", e, "only meaningful with `expr`"));
    }
    Ok(source)
}

fn real_str(v: f64) -> String {
    format!("{v:?}")
}

/// Canonical text of `cfg`.
pub fn emit_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command = {}", cfg.command.name());
    let _ = writeln!(s, "n = {}", cfg.n);
    if let Some(seed) = cfg.seed {
        let _ = writeln!(s, "seed = {seed}");
    }
    if let Some(out) = &cfg.out {
        let _ = writeln!(s, "out = {out}");
    }
    let mut section = |name: &str, pairs: Vec<(&str, Option<String>)>| {
        let present: Vec<_> = pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect();
        if present.is_empty() {
            return;
        }
        let _ = writeln!(s, "\n[{name}]");
        for (k, v) in present {
            let _ = writeln!(s, "{k} = {v}");
        }
    };
    let list = |v: &Option<Vec<usize>>| {
        v.as_ref()
            .map(|g| g.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
    };
    section(
        "grid",
        vec![
            ("points", cfg.grid.points.map(|p| p.to_string())),
            ("lo", cfg.grid.lo.map(real_str)),
            ("hi", cfg.grid.hi.map(real_str)),
        ],
    );
    let (catalog, constant, expr, lip) = match &cfg.phase {
        None => (None, None, None, None),
        Some(PhaseSource::Catalog(c)) => (Some(c.to_string()), None, None, None),
        Some(PhaseSource::Constant(v)) => (None, Some(real_str(*v)), None, None),
        Some(PhaseSource::Expr { text, lipschitz }) => (None, None, Some(text.clone()), Some(real_str(*lipschitz))),
    };
    section(
        "phase",
        vec![("catalog", catalog), ("constant", constant), ("expr", expr), ("lipschitz", lip)],
    );
    let c = &cfg.constants;
    section(
        "constants",
        vec![
            ("a", c.a.map(real_str)),
            ("theta", c.theta.map(real_str)),
            ("eps", c.eps.map(real_str)),
            ("delta", c.delta.map(real_str)),
            ("c_big", c.c_big.map(real_str)),
        ],
    );
    section(
        "solve",
        vec![
            ("tol", cfg.solve.tol.map(real_str)),
            ("max_iter", cfg.solve.max_iter.map(|v| v.to_string())),
            ("linear", cfg.solve.linear.clone()),
            ("boundary", cfg.solve.boundary.clone()),
        ],
    );
    section("forms", vec![("samples", cfg.forms.samples.map(|v| v.to_string()))]);
    section(
        "identities",
        vec![
            ("samples", cfg.identities.samples.map(|v| v.to_string())),
            ("grids", list(&cfg.identities.grids)),
        ],
    );
    section(
        "approx",
        vec![
            ("kmax", cfg.approx.kmax.map(|v| v.to_string())),
            ("alpha", cfg.approx.alpha.map(real_str)),
            ("boundary", cfg.approx.boundary.clone()),
        ],
    );
    section("refine", vec![("grids", list(&cfg.refine.grids))]);
    s
}
