//! Error classes and their process exit codes.

use std::fmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PIPELINE: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug)]
pub enum Failure {
    /// Bad configuration, flags or missing inputs the user must fix.
    Config(anyhow::Error),
    /// A stage failed and produced no usable output.
    Pipeline(anyhow::Error),
    /// Outputs were written but some items failed.
    Partial(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Pipeline(_) => EXIT_PIPELINE,
            Failure::Partial(_) => EXIT_PARTIAL,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Pipeline(e) => write!(f, "pipeline error: {e:#}"),
            Failure::Partial(m) => write!(f, "partial failure: {m}"),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Tag an error with its class.
pub trait Classify<T> {
    fn or_config(self) -> CmdResult<T>;
    fn or_pipeline(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_config(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn or_pipeline(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Pipeline(e.into()))
    }
}
