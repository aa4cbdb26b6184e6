//! Per-invocation bookkeeping: input checks, tracked outputs, run manifests
//! and log lines.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use taxoprobe_core::io::{read_file, sha256_hex, write_atomic};

/// An input path that does not exist. Maps to exit status 2.
#[derive(Debug)]
pub struct MissingInput(pub PathBuf);

impl std::fmt::Display for MissingInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "missing input: {}", self.0.display())
    }
}

impl std::error::Error for MissingInput {}

#[derive(Debug, Clone, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub config_sha256: String,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

#[derive(Debug, Clone, Copy)]
pub struct Logger {
    pub json: bool,
}

impl Logger {
    pub fn info(&self, event: &str, fields: Value) {
        if self.json {
            let mut line = json!({ "level": "info", "event": event });
            if let (Some(obj), Value::Object(extra)) = (line.as_object_mut(), fields) {
                obj.extend(extra);
            }
            eprintln!("{line}");
        } else if fields.as_object().is_none_or(|o| o.is_empty()) {
            eprintln!("{event}");
        } else {
            eprintln!("{event}: {fields}");
        }
    }

    pub fn error(&self, message: &str, code: i32) {
        if self.json {
            eprintln!("{}", json!({ "level": "error", "message": message, "exit_code": code }));
        } else {
            eprintln!("error: {message}");
        }
    }
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

pub struct Run {
    command: String,
    pub log: Logger,
    started: u128,
    inputs: Vec<FileHash>,
    outputs: Vec<PathBuf>,
    created_dirs: Vec<PathBuf>,
    seed: Option<u64>,
    config: Value,
}

impl Run {
    pub fn new(command: &str, log: Logger) -> Self {
        Run {
            command: command.to_string(),
            log,
            started: now_ms(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            created_dirs: Vec::new(),
            seed: None,
            config: Value::Null,
        }
    }

    pub fn set_config(&mut self, config: impl Serialize, seed: Option<u64>) -> Result<()> {
        self.config = serde_json::to_value(config)?;
        self.seed = seed;
        Ok(())
    }

    /// Checks that `path` exists and records its hash. Directories are
    /// recorded file by file.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(MissingInput(path.to_path_buf()).into());
        }
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(path)
                .with_context(|| format!("reading {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && !is_manifest(p))
                .collect();
            entries.sort();
            for p in entries {
                self.hash_input(&p)?;
            }
            Ok(())
        } else {
            self.hash_input(path)
        }
    }

    fn hash_input(&mut self, path: &Path) -> Result<()> {
        let bytes = read_file(path)?;
        self.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// Ensures the parent directory of an output exists.
    pub fn prepare(&mut self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            self.ensure_dir(dir)?;
        }
        Ok(())
    }

    pub fn ensure_dir(&mut self, dir: &Path) -> Result<()> {
        if !dir.exists() {
            let mut top = dir.to_path_buf();
            while let Some(p) = top.parent().filter(|p| !p.as_os_str().is_empty() && !p.exists()) {
                top = p.to_path_buf();
            }
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            self.created_dirs.push(top);
        }
        Ok(())
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        self.prepare(path)?;
        write_atomic(path, bytes)?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    /// Records an output written by someone else.
    pub fn track(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write_json(&mut self, path: &Path, value: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(path, &bytes)
    }

    /// Writes a manifest beside every output (`<file>.manifest.json`), or
    /// once as `DIR/manifest.json` when `dir` is given.
    pub fn finish(&mut self, dir: Option<&Path>) -> Result<()> {
        let mut outputs = Vec::new();
        for p in &self.outputs {
            outputs.push(FileHash {
                path: p.display().to_string(),
                sha256: sha256_hex(&read_file(p)?),
            });
        }
        let config_bytes = serde_json::to_vec(&self.config)?;
        let manifest = RunManifest {
            command: self.command.clone(),
            config: self.config.clone(),
            config_sha256: sha256_hex(&config_bytes),
            inputs: self.inputs.clone(),
            outputs,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let targets: Vec<PathBuf> = match dir {
            Some(d) => vec![d.join("manifest.json")],
            None => self.outputs.iter().map(|p| manifest_path(p)).collect(),
        };
        for t in targets {
            write_atomic(&t, &bytes)?;
            self.outputs.push(t);
        }
        self.outputs.clear();
        self.created_dirs.clear();
        Ok(())
    }

    /// Removes everything this run wrote.
    pub fn cleanup(&mut self) {
        for p in self.outputs.drain(..) {
            let _ = fs::remove_file(&p);
        }
        for d in self.created_dirs.drain(..).rev() {
            let _ = fs::remove_dir_all(&d);
        }
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn is_manifest(p: &Path) -> bool {
    p.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n == "manifest.json" || n.ends_with(".manifest.json"))
}
