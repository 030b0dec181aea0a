use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::AppError;

/// Artifact directory, created on first use.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, AppError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(OutputDir { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, AppError> {
        let p = self.root.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&p, text)?;
        Ok(p)
    }

    pub fn write_csv(
        &self,
        name: &str,
        header: &[String],
        rows: &[Vec<f64>],
    ) -> Result<PathBuf, AppError> {
        let text: Vec<Vec<String>> = rows
            .iter()
            .map(|r| r.iter().map(|v| format!("{v:e}")).collect())
            .collect();
        self.write_csv_text(name, header, &text)
    }

    pub fn write_csv_text(
        &self,
        name: &str,
        header: &[String],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, AppError> {
        let p = self.root.join(name);
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(p)
    }
}
