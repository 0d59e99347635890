//! CSV tables, the human summary and the provenance block of one run.

use std::fs;
use std::io::{self, BufWriter};
use std::path::Path;

use lagmc_core::grid::GridField;
use sha2::{Digest, Sha256};

/// Real numbers in tables: 17 significant digits, fixed layout.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn flag(b: bool) -> String {
    if b { "true" } else { "false" }.to_string()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// File stem of the CSV.
    pub name: String,
    pub module: &'static str,
    pub suite: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, module: &'static str, suite: &'static str, header: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            module,
            suite,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// First line cites the producing suite and module.
    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let mut s = format!(
            "# suite={} module={} config_sha256={} seed={}\n",
            self.suite, self.module, provenance.config_sha256, provenance.seed
        );
        s.push_str(&self.header.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: &'static str,
}

impl Provenance {
    pub fn new(canonical_config: &str, seed: u64) -> Self {
        let digest = Sha256::digest(canonical_config.as_bytes());
        Self {
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn block(&self) -> String {
        format!(
            "[provenance]\nconfig_sha256 = {}\nseed = {}\nlagmc = {}\n",
            self.config_sha256, self.seed, self.version
        )
    }
}

/// Check outcome shown in the summary; only `asserted` checks drive the exit status.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub asserted: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct ReportBundle {
    pub command: &'static str,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub fields: Vec<(String, GridField)>,
    pub provenance: Provenance,
    pub config_text: String,
    /// Set when the run stopped early; artifacts get a `.partial` suffix.
    pub partial: bool,
}

impl ReportBundle {
    pub fn new(command: &'static str, provenance: Provenance, config_text: String) -> Self {
        Self {
            command,
            tables: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            fields: Vec::new(),
            provenance,
            config_text,
            partial: false,
        }
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            asserted: true,
            detail: detail.into(),
        });
    }

    pub fn finding(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed: true,
            asserted: false,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().filter(|c| c.asserted).all(|c| c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary(&self) -> String {
        let mut s = format!("lagmc {}\n\n", self.command);
        for c in &self.checks {
            let tag = match (c.asserted, c.passed) {
                (false, _) => "INFO",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            s.push_str(&format!("{tag} {}: {}\n", c.name, c.detail));
        }
        if !self.notes.is_empty() {
            s.push('\n');
            for n in &self.notes {
                s.push_str(n);
                s.push('\n');
            }
        }
        s.push('\n');
        s.push_str(&self.provenance.block());
        s.push_str("\n[config]\n");
        s.push_str(&self.config_text);
        s
    }

    fn path(&self, dir: &Path, file: &str) -> std::path::PathBuf {
        if self.partial {
            dir.join(format!("{file}.partial"))
        } else {
            dir.join(file)
        }
    }

    /// Writes every table, field and the summary into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for t in &self.tables {
            fs::write(self.path(dir, &format!("{}.csv", t.name)), t.to_csv(&self.provenance))?;
        }
        for (name, f) in &self.fields {
            let text = fs::File::create(self.path(dir, &format!("{name}.field")))?;
            f.write_text(BufWriter::new(text)).map_err(io::Error::other)?;
            let bin = fs::File::create(self.path(dir, &format!("{name}.field.bin")))?;
            f.write_binary(BufWriter::new(bin)).map_err(io::Error::other)?;
        }
        fs::write(self.path(dir, "summary.txt"), self.summary())?;
        Ok(())
    }
}
