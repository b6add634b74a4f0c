//! Output directory, CSV and summary-table helpers.

use crate::error::CliResult;
use std::fs;
use std::path::{Path, PathBuf};

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn new(path: &Path) -> Self {
        Self(path.to_path_buf())
    }

    /// Writes `name` under the directory, creating it on first use.
    pub fn write(&self, name: &str, content: &str) -> CliResult<PathBuf> {
        fs::create_dir_all(&self.0)?;
        let path = self.0.join(name);
        fs::write(&path, content)?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.write(name, &text)
    }
}

/// Shortest round-trip decimal, so identical inputs give identical bytes.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Left-aligned text table with a header rule.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_aligns_columns() {
        let t = table(&["a", "long"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "a    long\n---  ----\nxyz  1\n");
    }
}
