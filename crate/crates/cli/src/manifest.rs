//! Run manifests and atomic file output.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub config: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub duration_seconds: f64,
}

pub fn sha256_file(path: &Path) -> CliResult<(String, u64)> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

fn record(path: &Path, shown: String) -> CliResult<FileRecord> {
    let (sha256, bytes) = sha256_file(path)?;
    Ok(FileRecord {
        path: shown,
        sha256,
        bytes,
    })
}

/// Writes `path` through a sibling temporary file and a rename.
pub fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> CliResult<()>,
) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Data(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let unwritable = |e: std::io::Error| CliError::Data(format!("cannot write {}: {e}", path.display()));
    let file = fs::File::create(&tmp).map_err(unwritable)?;
    let mut w = BufWriter::new(file);
    let result = fill(&mut w).and_then(|_| w.flush().map_err(unwritable));
    drop(w);
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path).map_err(unwritable)
}

/// Output directory that remembers what was written to it.
pub struct RunOutput {
    dir: PathBuf,
    written: Vec<PathBuf>,
    inputs: Vec<PathBuf>,
    started: Instant,
}

impl RunOutput {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        Ok(RunOutput {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            inputs: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn write(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut dyn Write) -> CliResult<()>,
    ) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        write_atomic(&path, fill)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// Checksums everything written and stores the manifest last.
    pub fn finish(
        self,
        command: &str,
        seed: u64,
        workers: usize,
        config: serde_json::Value,
    ) -> CliResult<RunManifest> {
        let outputs = self
            .written
            .iter()
            .map(|p| {
                let shown = p.strip_prefix(&self.dir).unwrap_or(p).display().to_string();
                record(p, shown)
            })
            .collect::<CliResult<Vec<_>>>()?;
        let inputs = self
            .inputs
            .iter()
            .map(|p| record(p, p.display().to_string()))
            .collect::<CliResult<Vec<_>>>()?;
        let manifest = RunManifest {
            command: command.to_string(),
            args: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            workers,
            config,
            inputs,
            outputs,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        write_atomic(&self.dir.join(MANIFEST_NAME), |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)?;
            writeln!(w)?;
            Ok(())
        })?;
        Ok(manifest)
    }
}
