//! CSV tables and their `.meta.json` provenance records.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// 12 significant digits in scientific notation, `NaN` for missing values.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.11e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}
impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}
impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
    }
}

/// Provenance written next to every CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub columns: Vec<String>,
    pub rows: usize,
    pub failures: usize,
    pub defaults_applied: Vec<String>,
    pub settings: Value,
    pub config: Value,
    pub wall_time_s: f64,
}

pub fn config_hash(config: &Value) -> String {
    let text = serde_json::to_string(config).expect("json value serialises");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.meta.json`.
pub fn emit(dir: &Path, stem: &str, table: &Table, meta: &Meta) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, table.to_csv()?).with_context(|| format!("writing {}", csv_path.display()))?;
    let meta_path = dir.join(format!("{stem}.meta.json"));
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    fs::write(&meta_path, text).with_context(|| format!("writing {}", meta_path.display()))?;
    Ok(csv_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 1e-300, 2.0f64.sqrt()] {
            let s = fmt_num(x);
            let back: f64 = s.parse().unwrap();
            assert!(((back - x) / x).abs() <= 5e-12, "{s}");
            assert_eq!(s.split('e').next().unwrap().replace(['-', '.'], "").len(), 12);
        }
        assert_eq!(fmt_num(f64::NAN), "NaN");
        assert_eq!(fmt_num(0.005), "5.00000000000e-3");
    }

    #[test]
    fn csv_has_header_and_quotes_text() {
        let mut t = Table::new(["a", "note"]);
        t.push(vec![1.5.into(), "x,y".into()]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "a,note\n1.50000000000e0,\"x,y\"\n");
    }
}
