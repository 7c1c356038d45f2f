//! Run manifests: one JSON file per invocation under `<out>/manifests/`,
//! numbered in order and never overwritten.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_DIR: &str = "manifests";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Versions {
    reweigh: &'static str,
    manifest_format: u32,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a serde_json::Value,
    config_path: Option<String>,
    seed: u64,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    started_unix_secs: u64,
    wall_clock_secs: f64,
    versions: Versions,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// Collects what a command reads and writes, then records it.
pub struct RunRecorder {
    command: String,
    started: Instant,
    started_unix: u64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    config_path: Option<PathBuf>,
}

impl RunRecorder {
    pub fn start(command: &str) -> Self {
        RunRecorder {
            command: command.to_string(),
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config_path: None,
        }
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    pub fn outputs(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.outputs.extend(paths);
    }

    pub fn config_path(&mut self, path: impl Into<PathBuf>) {
        self.config_path = Some(path.into());
    }

    /// Writes the next free `NNNN-<command>.json` and returns its path.
    pub fn finish(self, out_dir: &Path, config: &serde_json::Value, seed: u64) -> Result<PathBuf> {
        let manifest = Manifest {
            command: &self.command,
            config,
            config_path: self.config_path.map(|p| p.display().to_string()),
            seed,
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
            started_unix_secs: self.started_unix,
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
            versions: Versions {
                reweigh: env!("CARGO_PKG_VERSION"),
                manifest_format: 1,
            },
        };
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        let dir = out_dir.join(MANIFEST_DIR);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        // create_new keeps earlier manifests intact if two runs race.
        loop {
            let path = dir.join(format!("{:04}-{}.json", next_index(&dir)?, self.command));
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    f.write_all(json.as_bytes())
                        .with_context(|| format!("writing {}", path.display()))?;
                    return Ok(path);
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e).with_context(|| format!("creating {}", path.display())),
            }
        }
    }
}

fn next_index(dir: &Path) -> Result<u32> {
    let mut max = 0;
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(n) = name.split('-').next().and_then(|p| p.parse::<u32>().ok()) {
            max = max.max(n);
        }
    }
    Ok(max + 1)
}
