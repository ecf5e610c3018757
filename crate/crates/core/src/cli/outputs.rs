//! CSV and JSON files inside one run directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Collects the files written to a run directory.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<String>,
}

/// Shortest round-trip decimal form; `inf`, `-inf`, `NaN` for the rest.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl OutputSet {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn target(&mut self, name: &str) -> Result<PathBuf> {
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(Error::invalid(format!("output name `{name}` must be a plain file name")));
        }
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(self.dir.join(name))
    }

    /// Writes a CSV with `header` and string rows.
    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.target(name)?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path)?;
        w.write_record(header)?;
        for row in rows {
            if row.len() != header.len() {
                return Err(Error::DimensionMismatch {
                    expected: header.len(),
                    got: row.len(),
                });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pretty JSON; object keys come out sorted.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.target(name)?;
        let v = serde_json::to_value(value)?;
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.target(name)?;
        fs::write(path, body)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = OutputSet::new(dir.path());
        o.csv("a.csv", &["x", "note"], vec![vec![num(0.1), "a,b".into()]]).unwrap();
        let s = fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(s, "x,note\r\n0.1,\"a,b\"\r\n");
        assert!(o.csv("b.csv", &["x"], vec![vec![]]).is_err());
        assert_eq!(o.files(), ["a.csv", "b.csv"]);
    }

    #[test]
    fn refuses_paths_outside_the_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = OutputSet::new(dir.path());
        assert!(o.text("../x", "").is_err());
        assert!(o.text("/tmp/x", "").is_err());
        assert!(o.text(".lock", "").is_err());
    }

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, 1e-300, 123456.789, -2.5e17] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
