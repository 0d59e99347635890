use std::fs;
use std::path::Path;

use lagmc_cli::config::{
    emit_config, parse_config, ApproxSection, Command, ConstantsSection, GridSection, PhaseSource, RunConfig,
    SamplesSection, SolveSection,
};
use proptest::prelude::*;

#[test]
fn shipped_configs_are_canonical() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "cfg") {
            continue;
        }
        let text = fs::read_to_string(&path).unwrap();
        let cfg = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(emit_config(&cfg), text, "{} is not in canonical form", path.display());
        seen += 1;
    }
    assert!(seen >= 6);
}

#[test]
fn comments_and_spacing_do_not_survive_emit() {
    let messy = "# demo\ncommand=refine\n  n = 2\n[phase]\ncatalog   = c\n[refine]\ngrids = 17, 33\n";
    let cfg = parse_config(messy).unwrap();
    let canon = emit_config(&cfg);
    assert_eq!(canon, "command = refine\nn = 2\n\n[phase]\ncatalog = c\n\n[refine]\ngrids = 17,33\n");
    assert_eq!(parse_config(&canon).unwrap(), cfg);
}

fn increasing(lo: usize, hi: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::btree_set(lo..=hi, 2..5).prop_map(|s| s.into_iter().collect())
}

fn unit() -> impl Strategy<Value = f64> {
    (1u32..1000).prop_map(|k| k as f64 / 1000.0)
}

fn boundary(n: usize) -> impl Strategy<Value = String> {
    prop_oneof![
        Just(if n == 2 { "0.3*(x1^2+x2^2)" } else { "0.3*(x1^2+x2^2+x3^2)" }.to_string()),
        (1u32..100).prop_map(|k| format!("{}*x1^2 + cos(x2)", k as f64 / 10.0)),
    ]
}

fn phase(n: usize) -> impl Strategy<Value = PhaseSource> {
    let top = n as f64 * std::f64::consts::FRAC_PI_2;
    prop_oneof![
        prop::sample::select(vec!['a', 'b', 'c']).prop_map(PhaseSource::Catalog),
        (-0.999f64..0.999).prop_map(move |t| PhaseSource::Constant(t * top)),
        (unit(), unit()).prop_map(|(a, l)| PhaseSource::Expr {
            text: format!("{a} + {l}*abs(x1)"),
            lipschitz: l,
        }),
    ]
}

/// Configurations that satisfy every per-command requirement.
fn config() -> impl Strategy<Value = RunConfig> {
    (prop::sample::select(Command::ALL.to_vec()), 2usize..=3)
        .prop_flat_map(|(command, n)| {
            (
                Just(command),
                Just(n),
                prop::option::of(any::<u64>()),
                prop::option::of("[a-z][a-z0-9_/]{0,12}"),
                (5usize..=129, prop::option::of(-3.0f64..-0.5), prop::option::of(0.5f64..3.0)),
                phase(n),
                (
                    prop::option::of(3.0f64..500.0),
                    prop::option::of(unit().prop_map(|t| t * 1.5)),
                    prop::option::of(unit()),
                ),
                (
                    prop::option::of(1e-14f64..1e-2),
                    prop::option::of(1usize..=1000),
                    prop::option::of(prop::sample::select(vec!["auto", "direct", "gmres"])),
                    boundary(n),
                ),
                (1usize..=1_000_000, increasing(5, 129), 2usize..=4096, unit(), increasing(5, 513)),
            )
        })
        .prop_map(|(command, n, seed, out, (points, lo, hi), phase, (a, theta, eps), solve, extra)| {
            let (tol, max_iter, linear, bnd) = solve;
            let (samples, grids, kmax, alpha, refine) = extra;
            let mut cfg = RunConfig::new(command, n);
            cfg.seed = seed;
            cfg.out = out;
            cfg.grid = GridSection { points: Some(points), lo, hi };
            cfg.constants = ConstantsSection { a, theta, eps, ..Default::default() };
            cfg.solve = SolveSection {
                tol,
                max_iter,
                linear: linear.map(str::to_string),
                boundary: None,
            };
            let needs_catalog = matches!(command, Command::Jacobi | Command::Refine);
            cfg.phase = match (&phase, needs_catalog) {
                (PhaseSource::Catalog(_), _) | (_, false) => Some(phase.clone()),
                (_, true) => Some(PhaseSource::Catalog('b')),
            };
            match command {
                Command::Solve => cfg.solve.boundary = Some(bnd),
                Command::Approx => {
                    cfg.approx = ApproxSection {
                        kmax: Some(kmax),
                        alpha: Some(alpha),
                        boundary: Some(bnd),
                    }
                }
                Command::VerifyForms => cfg.forms.samples = Some(samples),
                Command::Identities => {
                    cfg.identities = SamplesSection { samples: Some(samples), grids: Some(grids) };
                }
                Command::Refine => cfg.refine.grids = Some(refine),
                Command::Jacobi => {}
            }
            cfg
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn emit_then_parse_is_identity(cfg in config()) {
        let text = emit_config(&cfg);
        let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(emit_config(&back), text);
    }

    #[test]
    fn parse_never_panics(text in "[a-z_=.\\[\\] 0-9\n]{0,80}") {
        let _ = parse_config(&text);
    }
}
