//! Report files. Column orders are fixed; floats use the shortest
//! round-trip form, so equal inputs give byte-equal files.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::config::Format;
use crate::CliError;

pub struct Out {
    pub dir: PathBuf,
    pub csv: bool,
    pub json: bool,
    written: Vec<PathBuf>,
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:e}")
    }
}

impl Out {
    pub fn new(dir: &Path, formats: &[Format]) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            csv: formats.contains(&Format::Csv),
            json: formats.contains(&Format::Json),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        if !self.csv {
            return Ok(());
        }
        let path = self.dir.join(format!("{name}.csv"));
        let io = |e: csv::Error| CliError::Io(path.clone(), std::io::Error::other(e));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(path.clone(), e))?;
        self.written.push(path);
        Ok(())
    }

    /// JSON reports are written even when only CSV is requested if `always`.
    pub fn json(&mut self, name: &str, value: &Value, always: bool) -> Result<(), CliError> {
        if !self.json && !always {
            return Ok(());
        }
        let path = self.dir.join(format!("{name}.json"));
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::Io(path.clone(), e))?;
        self.written.push(path);
        Ok(())
    }
}
