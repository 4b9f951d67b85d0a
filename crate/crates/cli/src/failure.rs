use std::fmt::Display;
use std::process::ExitCode;

use openset_core::corpus::CorpusError;
use openset_core::detmath::DetError;
use openset_core::eval::EvalError;
use openset_core::head::HeadError;
use serde_json::json;

/// A failed command: exit code plus the machine-readable error line.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl Failure {
    pub fn new(kind: impl Into<String>, message: impl Display) -> Self {
        Self { code: 1, kind: kind.into(), message: message.to_string() }
    }

    pub fn usage(kind: impl Into<String>, message: impl Display) -> Self {
        Self { code: 2, ..Self::new(kind, message) }
    }

    pub fn report(&self) -> ExitCode {
        eprintln!("{}", json!({ "error": self.kind, "message": self.message.trim_end() }));
        ExitCode::from(self.code)
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        Self::new("corpus", e)
    }
}

impl From<HeadError> for Failure {
    fn from(e: HeadError) -> Self {
        Self::new("head", e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Self::new("eval", e)
    }
}

impl From<DetError> for Failure {
    fn from(e: DetError) -> Self {
        Self::new("detection", e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::new("io", e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::new("csv", e)
    }
}
