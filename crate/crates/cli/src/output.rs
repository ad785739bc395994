//! Run-stamped output directories with a provenance manifest.
//!
//! The directory name is derived from the command, the tool version, the
//! parameters and the content of every input, never from the clock, so
//! identical invocations land in the same place with identical bytes.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputHash {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl InputHash {
    pub fn new(role: &str, path: &Path, bytes: &[u8]) -> Self {
        Self {
            role: role.into(),
            path: path.to_string_lossy().into_owned(),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputHash {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    stamp: &'a str,
    seed: Option<u64>,
    parameters: &'a Value,
    inputs: &'a [InputHash],
    outputs: &'a [OutputHash],
}

/// Parameters that define a run: the config minus file locations, which are
/// covered by the input content hashes instead.
pub fn parameters(doc: &Map<String, Value>, path_keys: &[&str]) -> Value {
    let mut m = doc.clone();
    m.remove("out_dir");
    for k in path_keys {
        m.remove(*k);
    }
    Value::Object(m)
}

pub struct RunDir {
    pub path: PathBuf,
    command: String,
    stamp: String,
    seed: Option<u64>,
    parameters: Value,
    inputs: Vec<InputHash>,
    outputs: Vec<OutputHash>,
}

impl RunDir {
    pub fn create(
        out_dir: &Path,
        command: &str,
        parameters: Value,
        mut inputs: Vec<InputHash>,
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        inputs.sort_by(|a, b| (&a.role, &a.sha256).cmp(&(&b.role, &b.sha256)));
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0]);
        h.update(TOOL_VERSION.as_bytes());
        h.update([0]);
        h.update(parameters.to_string().as_bytes());
        for i in &inputs {
            h.update([0]);
            h.update(i.role.as_bytes());
            h.update(i.sha256.as_bytes());
        }
        let stamp = hex::encode(h.finalize())[..12].to_owned();
        let path = out_dir.join(format!("{command}-{stamp}"));
        std::fs::create_dir_all(&path).map_err(|e| CliError::io("output", &path, &e))?;
        Ok(Self {
            path,
            command: command.into(),
            stamp,
            seed,
            parameters,
            inputs,
            outputs: Vec::new(),
        })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let p = self.file(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io("output", parent, &e))?;
        }
        std::fs::write(&p, bytes).map_err(|e| CliError::io("output", &p, &e))?;
        self.outputs.retain(|o| o.file != name);
        self.outputs.push(OutputHash {
            file: name.into(),
            sha256: sha256_hex(bytes),
        });
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable output");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Writes `manifest.json` and returns the directory.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.outputs.sort_by(|a, b| a.file.cmp(&b.file));
        let m = Manifest {
            command: &self.command,
            tool_version: TOOL_VERSION,
            stamp: &self.stamp,
            seed: self.seed,
            parameters: &self.parameters,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&m).expect("serializable manifest");
        bytes.push(b'\n');
        let p = self.file("manifest.json");
        std::fs::write(&p, bytes).map_err(|e| CliError::io("output", &p, &e))?;
        Ok(self.path)
    }
}
