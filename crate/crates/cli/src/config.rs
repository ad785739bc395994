//! Config documents: one JSON object per invocation, relative paths resolved
//! against the document's directory, command-line flags layered on top.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::CliError;

pub fn read_file(op: &str, path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(op, path, &e))
}

fn resolve(v: &mut Value, base: &Path) {
    match v {
        Value::String(s) if Path::new(s.as_str()).is_relative() => {
            *s = base.join(s.as_str()).to_string_lossy().into_owned();
        }
        Value::Array(items) => items.iter_mut().for_each(|i| resolve(i, base)),
        _ => {}
    }
}

/// Loads `path` (or starts from `{}`), resolves `path_keys`, then applies
/// `overrides` (already relative to the working directory).
pub fn load_document(
    path: Option<&Path>,
    path_keys: &[&str],
    overrides: Vec<(&str, Option<Value>)>,
) -> Result<Map<String, Value>, CliError> {
    let mut doc = match path {
        Some(p) => {
            let bytes = read_file("config", p)?;
            let v: Value = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::input("cli", "config", "config", format!("{}: {e}", p.display())))?;
            let Value::Object(mut map) = v else {
                return Err(CliError::input(
                    "cli",
                    "config",
                    "config",
                    format!("{}: expected a JSON object", p.display()),
                ));
            };
            let base = p.parent().unwrap_or(Path::new("."));
            for key in path_keys {
                if let Some(v) = map.get_mut(*key) {
                    resolve(v, base);
                }
            }
            map
        }
        None => Map::new(),
    };
    for (key, value) in overrides {
        if let Some(v) = value {
            doc.insert(key.to_owned(), v);
        }
    }
    Ok(doc)
}

pub fn parse<T: DeserializeOwned>(doc: Map<String, Value>) -> Result<T, CliError> {
    serde_json::from_value(Value::Object(doc)).map_err(|e| CliError::input("cli", "config", "config", e.to_string()))
}

pub fn load<T: DeserializeOwned>(
    path: Option<&Path>,
    path_keys: &[&str],
    overrides: Vec<(&str, Option<Value>)>,
) -> Result<T, CliError> {
    parse(load_document(path, path_keys, overrides)?)
}

pub fn path_value(p: Option<PathBuf>) -> Option<Value> {
    p.map(|p| Value::String(p.to_string_lossy().into_owned()))
}
