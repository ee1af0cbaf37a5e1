use std::path::Path;

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::config::sha256_hex;
use crate::error::{CliError, Result};

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// Written next to every command's outputs: enough to rerun the command and
/// check that the inputs are the same.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: &'static str,
    pub parallel: bool,
    pub threads: usize,
    pub seeds: Vec<u64>,
    pub config_sha256: Option<String>,
    pub config: Option<serde_json::Value>,
    pub inputs: Vec<InputFile>,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
}

impl Manifest {
    pub fn new(command: &str, seeds: Vec<u64>, started: DateTime<Utc>) -> Manifest {
        Manifest {
            command: command.to_string(),
            argv: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION"),
            parallel: cfg!(feature = "parallel"),
            threads: mindreader_core::par::current_num_threads(),
            seeds,
            config_sha256: None,
            config: None,
            inputs: Vec::new(),
            started,
            finished: started,
        }
    }

    pub fn with_inputs<'a>(mut self, files: impl IntoIterator<Item = &'a Path>) -> Result<Manifest> {
        for f in files {
            let bytes = std::fs::read(f).map_err(|e| CliError::Input(format!("{}: {e}", f.display())))?;
            self.inputs.push(InputFile {
                path: f.display().to_string(),
                sha256: sha256_hex(&bytes),
            });
        }
        Ok(self)
    }

    pub fn write(mut self, dir: &Path) -> Result<()> {
        self.finished = Utc::now();
        let text = serde_json::to_string_pretty(&self).map_err(|e| CliError::Failure(e.to_string()))?;
        write_file(&dir.join("manifest.json"), text.as_bytes())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Input(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
