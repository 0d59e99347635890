use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lagmc_core::grid::GridField;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn lagmc(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lagmc"));
    c.args(args).env_remove("LAGMC_THREADS");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().unwrap()
}

/// Runs `command` on `config` text written to a temporary file.
fn run_text(command: &str, config: &str, extra: &[&str]) -> (Output, TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let mut args = vec![command, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (lagmc(&args, &[]), dir)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SOLVE_C3: &str = "command = solve\nn = 3\n\n[grid]\npoints = 9\n\n[phase]\ncatalog = c\n";

#[test]
fn catalog_solve_passes_and_writes_artifacts() {
    let (o, dir) = run_text("solve", SOLVE_C3, &[]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let out = dir.path().join("out");
    for f in ["newton.csv", "solve.csv", "u.field", "u.field.bin", "summary.txt"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let csv = fs::read_to_string(out.join("solve.csv")).unwrap();
    assert!(csv.starts_with("# suite=solve module=pde_solver config_sha256="));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("[provenance]") && summary.contains("[config]\ncommand = solve\n"));
}

#[test]
fn field_files_agree() {
    let (o, dir) = run_text("solve", SOLVE_C3, &[]);
    assert_eq!(code(&o), 0);
    let out = dir.path().join("out");
    let text = GridField::read_text(BufReader::new(fs::File::open(out.join("u.field")).unwrap())).unwrap();
    let bin = GridField::read_binary(fs::File::open(out.join("u.field.bin")).unwrap()).unwrap();
    assert_eq!(text.data, bin.data);
    assert!(text.grid.same_as(&bin.grid));
}

#[test]
fn subcritical_phase_is_a_config_error() {
    let cfg = configs().join("solve_subcritical.cfg");
    let dir = tempfile::tempdir().unwrap();
    let o = lagmc(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert!(stdout(&o).contains("subcritical"));
}

#[test]
fn malformed_configs_exit_2_with_a_line_number() {
    let (o, _d) = run_text("solve", "command = solve\nn = 2\nbogus = 1\n", &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let (o, _d) = run_text("refine", SOLVE_C3, &[]);
    assert_eq!(code(&o), 2);
    let (o, _d) = run_text("frobnicate", SOLVE_C3, &[]);
    assert_eq!(code(&o), 2);
    let o = lagmc(&["solve", "--config", "/nonexistent/run.cfg"], &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let cfg = configs().join("solve_catalog.cfg");
    for bad in ["0", "many"] {
        let o = lagmc(&["solve", "--config", cfg.to_str().unwrap(), "--out", "/dev/null/x"], &[("LAGMC_THREADS", bad)]);
        assert_eq!(code(&o), 2, "LAGMC_THREADS={bad}");
    }
}

#[test]
fn newton_budget_exhaustion_exits_3_with_partial_artifacts() {
    let cfg = format!("{SOLVE_C3}\n[solve]\nmax_iter = 1\n");
    let (o, dir) = run_text("solve", &cfg, &[]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    let out = dir.path().join("out");
    assert!(out.join("newton.csv.partial").exists());
    assert!(out.join("u.field.partial").exists());
    assert!(out.join("summary.txt.partial").exists());
    assert!(!out.join("summary.txt").exists());
}

#[test]
fn failed_certificate_exits_1() {
    let cfg = "command = verify-forms\nn = 3\n\n[constants]\na = 3.0\n\n[forms]\nsamples = 20000\n";
    let (o, _d) = run_text("verify-forms", cfg, &[]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL "));
}

#[test]
fn verify_forms_is_reproducible_and_seeded() {
    let cfg = configs().join("verify_forms.cfg");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let run = |dir: &Path, seed: Option<&str>, threads: &str| {
        let mut args = vec!["verify-forms", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        let o = lagmc(&args, &[("LAGMC_THREADS", threads)]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
    };
    run(a.path(), None, "1");
    run(b.path(), None, "4");
    run(c.path(), Some("99"), "4");
    for f in ["rank_one_oracle.csv", "certification.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} differs across thread counts");
        let y = fs::read_to_string(c.path().join(f)).unwrap();
        assert!(y.lines().next().unwrap().ends_with("seed=99"));
        assert_ne!(x, y.into_bytes());
    }
}

#[test]
fn refine_reports_every_grid() {
    let cfg = "command = refine\nn = 2\n\n[phase]\ncatalog = c\n\n[refine]\ngrids = 17,33,65\n";
    let (o, dir) = run_text("refine", cfg, &[]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("out/refine.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 3);
}

#[test]
fn constant_phase_solve_from_the_corpus() {
    let cfg = configs().join("solve_constant.cfg");
    let dir = tempfile::tempdir().unwrap();
    let o = lagmc(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}
