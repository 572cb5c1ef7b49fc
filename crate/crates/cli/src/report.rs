//! Report headers and plain-text tables.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "vmfkit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped on every report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the canonical JSON encoding of the run configuration.
    pub config_hash: String,
    pub seed: u64,
}

impl Header {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64) -> Self {
        let bytes = serde_json::to_vec(config).expect("configs serialize");
        let digest = Sha256::digest(&bytes);
        Header {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config_hash: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
        }
    }

    pub fn text(&self) -> String {
        format!(
            "# {} {} {}\n# config sha256:{}\n# seed {}\n",
            self.tool, self.version, self.command, self.config_hash, self.seed
        )
    }
}

/// A JSON report: header, the configuration it was produced from, and the result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<C, R> {
    pub header: Header,
    pub config: C,
    pub result: R,
}

impl<C: Serialize, R> Report<C, R> {
    pub fn new(command: &str, config: C, seed: u64, result: R) -> Self {
        Report {
            header: Header::new(command, &config, seed),
            config,
            result,
        }
    }
}

/// Column-aligned text table. The first column is left-aligned, the rest right-aligned.
#[derive(Debug, Clone, Default)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) {
        let row: Vec<String> = cells.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, &w))| {
                    if j == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.columns);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out += &line(&rule);
        for row in &self.rows {
            out += &line(row);
        }
        out
    }
}

/// Three significant digits in scientific notation.
pub fn sci(v: f64) -> String {
    format!("{v:.2e}")
}

pub fn fixed(v: f64, places: usize) -> String {
    format!("{v:.places$}")
}
