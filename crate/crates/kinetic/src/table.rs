//! CSV tables with a `#`-prefixed metadata header.
//!
//! Numbers use the shortest representation that parses back to the same
//! `f64`, `.` as decimal separator and `\n` line endings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{KineticError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip form of `x`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

/// Provenance written above every table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
    meta: Vec<(String, String)>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    /// Extra `# key: value` line.
    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| fmt_f64(x)).collect());
    }

    pub fn render(&self, header: &Header) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# kinetic {VERSION}");
        let _ = writeln!(s, "# config_sha256: {}", header.config_hash);
        let _ = writeln!(s, "# seed: {}", header.seed);
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// Writes `<dir>/<name>.csv`, creating `dir` if needed.
    pub fn write(&self, dir: &Path, header: &Header) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| KineticError::io(dir, e))?;
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, self.render(header)).map_err(|e| KineticError::io(&path, e))?;
        Ok(path)
    }
}

/// Data lines of a rendered table, split on commas.
pub fn parse_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0, -2.5e-300, 1e300, 0.585_786_437_626_904_9, f64::MIN_POSITIVE, 123456789.123] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(1.0), "1.0");
    }

    #[test]
    fn render_layout() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.meta("note", "x");
        t.push_f64(&[1.0, 0.5]);
        let text = t.render(&Header { config_hash: "ab".into(), seed: 7 });
        assert!(text.ends_with("a,b\n1.0,0.5\n"));
        assert!(text.contains("# seed: 7\n# note: x\n"));
        assert_eq!(parse_rows(&text), vec![vec!["1.0".to_string(), "0.5".to_string()]]);
    }
}
