use std::fmt;

use serde_json::json;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            kind: "data",
            message: message.into(),
        }
    }

    pub fn io(what: &str, e: std::io::Error) -> Self {
        Self {
            code: EXIT_DATA,
            kind: "io",
            message: format!("{what}: {e}"),
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "code": self.code, "kind": self.kind, "message": self.message } }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error: {}", self.message)
    }
}

impl From<jpa_core::Error> for CliError {
    fn from(e: jpa_core::Error) -> Self {
        use jpa_core::Error as E;
        let (code, kind) = match &e {
            E::Config(_) => (EXIT_USAGE, "config"),
            E::InstanceTooLarge { .. } => (EXIT_USAGE, "instance_too_large"),
            E::DegenerateClass { .. } => (EXIT_DATA, "degenerate_class"),
            E::ModelIncomplete(_) => (EXIT_DATA, "model_incomplete"),
            E::Format { .. } | E::SchemaMismatch { .. } => (EXIT_DATA, "format"),
            E::Io(_) => (EXIT_DATA, "io"),
            _ => (EXIT_DATA, "data"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}
