use std::fmt;

use serde_json::Value;

/// Exit statuses.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_DIVERGENT: u8 = 3;
pub const EXIT_INCONCLUSIVE: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files.
    Validation(String),
    /// A computation failed after validation.
    Runtime(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        CliError::Runtime(msg.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_CHECK_FAILED,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

/// A command's result together with the exit status it implies.
#[derive(Debug)]
pub struct Outcome {
    pub result: Value,
    pub status: u8,
    /// Extra text written before the report (per-case verdict lines).
    pub lines: Vec<String>,
    /// Alternative CSV rendering, when the command has one.
    pub csv: Option<String>,
}

impl Outcome {
    pub fn ok(result: Value) -> Self {
        Self {
            result,
            status: EXIT_OK,
            lines: Vec::new(),
            csv: None,
        }
    }

    pub fn with_status(mut self, status: u8) -> Self {
        self.status = status;
        self
    }
}
