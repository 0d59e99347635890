use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use lagmc_cli::config::{parse_config, Command};
use lagmc_cli::run::{run, EXIT_CONFIG};

#[derive(Parser, Debug)]
#[command(name = "lagmc", version, about = "Numerical laboratory for Σ arctan λᵢ(D²u) = φ(x)")]
struct Cli {
    /// One of solve, verify-forms, jacobi, identities, approx, refine.
    command: String,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the configuration file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `out` or `lagmc-out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("lagmc: {msg}");
    ExitCode::from(EXIT_CONFIG as u8)
}

fn threads() -> Result<(), String> {
    let Ok(v) = std::env::var("LAGMC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("LAGMC_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    if let Err(e) = threads() {
        return fail(e);
    }
    let Some(command) = Command::from_name(&cli.command) else {
        return fail(format!("unknown command `{}`", cli.command));
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", cli.config.display())),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(format!("{}: {e}", cli.config.display())),
    };
    if cfg.command != command {
        return fail(format!(
            "command `{}` does not match the config's `{}`",
            command.name(),
            cfg.command.name()
        ));
    }
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    let out = cli
        .out
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lagmc-out"));

    let outcome = run(&cfg);
    print!("{}", outcome.bundle.summary());
    if let Err(e) = outcome.bundle.write(&out) {
        eprintln!("lagmc: writing {}: {e}", out.display());
        return ExitCode::from(1);
    }
    if let Some(e) = &outcome.error {
        eprintln!("lagmc: {e}");
    }
    ExitCode::from(outcome.exit_code() as u8)
}
