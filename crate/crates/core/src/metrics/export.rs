use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Fixed-point decimal with six fractional digits, never scientific.
pub fn fixed(v: f64) -> String {
    if !v.is_finite() {
        return "nan".to_string();
    }
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// In-memory CSV with a fixed header.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            let escaped: Vec<String> = cells.iter().map(|c| escape(c)).collect();
            out.push_str(&escaped.join(","));
            out.push('\n');
        };
        line(&self.header, &mut out);
        for r in &self.rows {
            line(r, &mut out);
        }
        out
    }
}

fn escape(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

/// Writes through a sibling temporary file so a failed export never leaves a
/// partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), ExportError> {
    let err = |source| ExportError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("csv.partial");
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(contents.as_bytes()).and_then(|_| f.sync_all()))
        .and_then(|_| std::fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(err(e));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_never_uses_exponents() {
        assert_eq!(fixed(1e-9), "0.000000");
        assert_eq!(fixed(123456789.5), "123456789.500000");
        assert_eq!(fixed(-0.0), "0.000000");
        assert_eq!(fixed(0.38888888), "0.388889");
    }

    #[test]
    fn cells_with_commas_are_quoted() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.row(vec!["x,y".into(), "q\"".into()]);
        assert_eq!(t.render(), "a,b\n\"x,y\",\"q\"\"\"\n");
    }

    #[test]
    fn unwritable_path_reports_error_and_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("flows.csv");
        assert!(write_atomic(&path, "x\n").is_err());
        assert!(!path.exists());
    }
}
