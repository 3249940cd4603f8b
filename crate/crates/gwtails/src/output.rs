//! CSV tables and JSON run manifests.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
    Bool(bool),
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Reals use 17 significant digits so a table round-trips exactly.
fn format_cell(cell: &Cell, out: &mut String) {
    match cell {
        Cell::Int(v) => write!(out, "{v}").unwrap(),
        Cell::Real(v) if v.is_nan() => out.push_str("nan"),
        Cell::Real(v) if v.is_infinite() => out.push_str(if *v > 0.0 { "inf" } else { "-inf" }),
        Cell::Real(v) => write!(out, "{v:.16e}").unwrap(),
        Cell::Bool(v) => write!(out, "{v}").unwrap(),
        Cell::Text(s) if s.contains([',', '"', '\n', '\r']) => {
            out.push('"');
            out.push_str(&s.replace('"', "\"\""));
            out.push('"');
        }
        Cell::Text(s) => out.push_str(s),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; panics if its width differs from the header.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<Cell> = self.header.iter().map(|h| Cell::Text(h.clone())).collect();
        for row in std::iter::once(&header).chain(&self.rows) {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                format_cell(cell, &mut out);
            }
            out.push('\n');
        }
        out
    }
}

/// `results.csv` → `results.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    let stem = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv.with_file_name(format!("{stem}.manifest.json"))
}

/// Writes the table to `out` (standard output when `None`) and, for a file,
/// the manifest beside it. Returns the manifest path.
pub fn write_outputs(table: &Table, manifest: &Value, out: Option<&Path>) -> io::Result<Option<PathBuf>> {
    match out {
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(table.to_csv().as_bytes())?;
            lock.flush()?;
            Ok(None)
        }
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, table.to_csv())?;
            let mpath = manifest_path(path);
            let text = serde_json::to_string_pretty(manifest).map_err(io::Error::other)?;
            std::fs::write(&mpath, text + "\n")?;
            Ok(Some(mpath))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_formatting() {
        let mut t = Table::new(["a", "b", "c", "d"]);
        t.push(vec![3u64.into(), 0.1.into(), "x,y".into(), f64::INFINITY.into()]);
        t.push(vec![0u64.into(), f64::NAN.into(), "q\"t".into(), true.into()]);
        let csv = t.to_csv();
        assert_eq!(
            csv,
            "a,b,c,d\n3,1.0000000000000001e-1,\"x,y\",inf\n0,nan,\"q\"\"t\",true\n"
        );
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn manifest_beside_csv() {
        assert_eq!(
            manifest_path(Path::new("out/run.csv")),
            PathBuf::from("out/run.manifest.json")
        );
    }
}
