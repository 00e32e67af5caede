//! Batch front end: scenario files in, variance curves, kernel dumps,
//! manifests and SVG plots out.

pub mod config;
pub mod inspect;
pub mod plot;
pub mod run;

use config::Diagnostic;

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "SPINLIGHT_OUTPUT_ROOT";

/// Failure classes, one per process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("invalid configuration:\n{}", join(.0))]
    Validation(Vec<Diagnostic>),
    #[error("engine error: {0}")]
    Engine(String),
    #[error("i/o error: {0}")]
    Io(String),
}

fn join(d: &[Diagnostic]) -> String {
    d.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Engine(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    pub fn from_core(context: &str, e: spinlight_core::Error) -> Failure {
        if e.is_numerical() {
            Failure::Engine(format!("{context}: {e}"))
        } else {
            Failure::Validation(vec![Diagnostic::new(context, e.to_string())])
        }
    }
}

pub(crate) fn io(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{context}: {e}"))
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
