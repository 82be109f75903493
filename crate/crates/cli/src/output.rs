//! Artifact writing and run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::Failure;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Collects the files of one command and writes them together.
///
/// Nothing touches the output directory until [`Artifacts::commit`]; files
/// are staged under temporary names and renamed into place only once all of
/// them were written, so a failed run leaves no partial output behind.
pub struct Artifacts {
    command: &'static str,
    started: SystemTime,
    clock: Instant,
    inputs: Map<String, Value>,
    files: Vec<(String, Vec<u8>)>,
    extra: Map<String, Value>,
}

impl Artifacts {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            started: SystemTime::now(),
            clock: Instant::now(),
            inputs: Map::new(),
            files: Vec::new(),
            extra: Map::new(),
        }
    }

    /// Reads an input file and records its digest.
    pub fn input(&mut self, role: &str, path: &Path) -> Result<String, Failure> {
        let text = read_input(path)?;
        self.inputs.insert(
            role.to_string(),
            json!({ "path": path.display().to_string(), "sha256": sha256_hex(text.as_bytes()) }),
        );
        Ok(text)
    }

    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents.into_bytes()));
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.extra.insert(key.to_string(), value);
    }

    fn manifest(&self) -> Value {
        let outputs: Map<String, Value> = self
            .files
            .iter()
            .map(|(name, bytes)| (name.clone(), Value::String(sha256_hex(bytes))))
            .collect();
        let started = self
            .started
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64());
        let mut m = Map::new();
        m.insert("command".into(), json!(self.command));
        m.insert(
            "versions".into(),
            json!({ "evtrack": env!("CARGO_PKG_VERSION"), "evtrack_core": evtrack_core::VERSION }),
        );
        m.insert("started_unix".into(), json!(started));
        m.insert("wall_clock_seconds".into(), json!(self.clock.elapsed().as_secs_f64()));
        m.insert("inputs".into(), Value::Object(self.inputs.clone()));
        m.insert("outputs".into(), Value::Object(outputs));
        for (k, v) in &self.extra {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }

    /// Writes every file plus `manifest.json` into `dir`.
    pub fn commit(mut self, dir: &Path) -> Result<(), Failure> {
        let manifest = serde_json::to_string_pretty(&self.manifest())
            .map_err(|e| Failure::Internal(format!("manifest: {e}")))?;
        self.file("manifest.json", manifest + "\n");

        let io = |p: &Path, e: std::io::Error| Failure::Input(format!("{}: {e}", p.display()));
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
        let cleanup = |staged: &[(PathBuf, PathBuf)]| {
            for (tmp, _) in staged {
                let _ = fs::remove_file(tmp);
            }
        };
        for (name, bytes) in &self.files {
            let target = dir.join(name);
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, bytes) {
                let _ = fs::remove_file(&tmp);
                cleanup(&staged);
                return Err(io(&tmp, e));
            }
            staged.push((tmp, target));
        }
        for (i, (tmp, target)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, target) {
                cleanup(&staged[i..]);
                return Err(io(target, e));
            }
        }
        Ok(())
    }
}
