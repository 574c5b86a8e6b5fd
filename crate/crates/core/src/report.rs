//! CSV output. Every table ends with a `params_hash` column identifying the
//! configuration that produced it.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::subsets::IndexSet;

/// First 16 hex digits of the SHA-256 of the canonical configuration text,
/// ignoring the output directory.
pub fn params_hash(cfg: &ExperimentConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.run.output_dir = Default::default();
    let digest = Sha256::digest(canonical.to_toml().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest round-trip representation; empty for `None`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Space-separated ascending indices.
pub fn fmt_set(s: &IndexSet) -> String {
    s.to_string()
}

/// An in-memory CSV table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    /// Row whose first cell equals `key`.
    pub fn row(&self, key: &str) -> Option<&[String]> {
        self.rows.iter().find(|r| r[0] == key).map(Vec::as_slice)
    }

    /// Index of column `name`.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// CSV text with the hash column appended.
    pub fn to_csv(&self, hash: &str) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header.iter().map(String::as_str).chain(["params_hash"]))?;
        for r in &self.rows {
            w.write_record(r.iter().map(String::as_str).chain([hash]))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn write(&self, path: &Path, hash: &str) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_csv(hash)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_column_and_quoting() {
        let mut t = CsvTable::new(["set", "value"]);
        t.push([fmt_set(&IndexSet::new(vec![1, 4]).unwrap()), fmt_f64(0.25)]);
        let text = t.to_csv("abc").unwrap();
        assert_eq!(text, "set,value,params_hash\n1 4,2.5e-1,abc\n");
        assert_eq!(t.row("1 4").unwrap()[1], "2.5e-1");
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::table1();
        let mut b = a.clone();
        b.run.output_dir = "elsewhere".into();
        assert_eq!(params_hash(&a), params_hash(&b));
        assert_eq!(params_hash(&a).len(), 16);
        b.run.seed += 1;
        assert_ne!(params_hash(&a), params_hash(&b));
    }
}
