//! CSV files with a one-line header and round-trippable floats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Marker line appended to partially written files when a run fails.
pub const FAILED_MARKER: &str = "FAILED";

pub struct CsvWriter {
    path: PathBuf,
    inner: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: impl AsRef<Path>, header: &[&str]) -> Result<Self, CliError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let mut w = Self {
            path,
            inner: BufWriter::new(file),
        };
        w.line(&header.join(","))?;
        Ok(w)
    }

    fn io(&self, source: std::io::Error) -> CliError {
        CliError::Io {
            path: self.path.clone(),
            source,
        }
    }

    fn line(&mut self, s: &str) -> Result<(), CliError> {
        writeln!(self.inner, "{s}").map_err(|e| self.io(e))
    }

    /// One row; fields are already formatted.
    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.line(&fields.join(","))
    }

    /// Append the failure marker with a reason and flush.
    pub fn fail(&mut self, reason: &str) -> Result<(), CliError> {
        self.line(&format!("{FAILED_MARKER} {reason}"))?;
        self.flush()
    }

    pub fn flush(&mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|e| self.io(e))
    }
}
