//! Campaign output directories and their manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::sha256_hex;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Versions {
    pub prepost_core: &'static str,
    pub prepost_cli: &'static str,
}

/// Everything needed to reproduce a campaign. Holds no timestamps, so
/// reruns produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub rng: &'static str,
    pub versions: Versions,
    pub outputs: Vec<OutputFile>,
    /// Written alongside but not reproducible, e.g. wall-clock timings.
    pub unhashed: Vec<String>,
}

pub struct OutputDir {
    dir: PathBuf,
    command: String,
    outputs: Vec<OutputFile>,
    unhashed: Vec<String>,
}

fn write_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Write {
        path: path.to_path_buf(),
        source,
    }
}

impl OutputDir {
    /// `root/command`, created if missing.
    pub fn create(root: &Path, command: &str) -> Result<Self> {
        let dir = root.join(command);
        std::fs::create_dir_all(&dir).map_err(|e| write_error(&dir, e))?;
        Ok(Self {
            dir,
            command: command.to_string(),
            outputs: Vec::new(),
            unhashed: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn put(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| write_error(&path, e))
    }

    /// Writes a reproducible output and records its hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.put(name, bytes)?;
        self.outputs.push(OutputFile {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_unhashed(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.put(name, bytes)?;
        self.unhashed.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("summary serializes") + "\n";
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, config_bytes: &[u8], seed: u64) -> Result<PathBuf> {
        let manifest = Manifest {
            command: self.command.clone(),
            config_sha256: sha256_hex(config_bytes),
            seed,
            rng: prepost_core::rng::RNG_ALGORITHM,
            versions: Versions {
                prepost_core: prepost_core::VERSION,
                prepost_cli: env!("CARGO_PKG_VERSION"),
            },
            outputs: self.outputs.clone(),
            unhashed: self.unhashed.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        self.put("manifest.json", text.as_bytes())?;
        Ok(self.dir)
    }
}

/// Renders CSV rows into memory.
pub fn csv_bytes<F>(fill: F) -> Vec<u8>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        fill(&mut w).expect("in-memory CSV write");
        w.flush().expect("in-memory CSV flush");
    }
    buf
}
