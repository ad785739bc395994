use std::fmt;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitKind {
    Input,
    Upstream,
    Degenerate,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            Self::Input => 2,
            Self::Upstream => 3,
            Self::Degenerate => 4,
        }
    }
}

/// A failure with its originating module and pipeline step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub module: String,
    pub op: String,
    pub code: String,
    pub message: String,
    pub kind: ExitKind,
}

impl CliError {
    pub fn input(module: &str, op: &str, code: &str, message: impl Into<String>) -> Self {
        Self {
            module: module.into(),
            op: op.into(),
            code: code.into(),
            message: message.into(),
            kind: ExitKind::Input,
        }
    }

    pub fn io(op: &str, path: &Path, err: &std::io::Error) -> Self {
        Self::input("cli", op, "io", format!("{}: {err}", path.display()))
    }

    pub fn from_core(op: &str, err: vat_core::Error) -> Self {
        Self {
            module: err.module().into(),
            op: op.into(),
            code: variant_code(&err),
            kind: if err.is_degenerate() {
                ExitKind::Degenerate
            } else {
                ExitKind::Input
            },
            message: err.to_string(),
        }
    }

    pub fn from_elicit(op: &str, err: vat_elicit::ElicitError) -> Self {
        Self {
            module: "elicitation".into(),
            op: op.into(),
            code: err.code().into(),
            kind: if err.is_upstream() {
                ExitKind::Upstream
            } else {
                ExitKind::Input
            },
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.code()
    }

    /// `{"error":{"module":..,"op":..,"code":..,"message":..}}` on one line.
    pub fn to_json_line(&self) -> String {
        json!({"error": {
            "module": self.module,
            "op": self.op,
            "code": self.code,
            "message": self.message,
        }})
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}): {}", self.op, self.module, self.message)
    }
}

impl std::error::Error for CliError {}

/// snake_case name of the innermost error variant, from its Debug form.
fn variant_code(err: &vat_core::Error) -> String {
    let dbg = format!("{err:?}");
    // `Dataset(Unmatched { .. })` -> `Unmatched`
    let inner = dbg.split_once('(').map_or(dbg.as_str(), |(_, rest)| rest);
    let name: String = inner.chars().take_while(|c| c.is_alphanumeric()).collect();
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_uppercase() {
            if i > 0 {
                out.push('_');
            }
            out.extend(c.to_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

pub trait CoreContext<T> {
    fn op(self, op: &str) -> Result<T, CliError>;
}

impl<T, E: Into<vat_core::Error>> CoreContext<T> for Result<T, E> {
    fn op(self, op: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_core(op, e.into()))
    }
}
