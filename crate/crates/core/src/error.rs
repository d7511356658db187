use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the analytics, simulation and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input `{name}`: {reason}")]
    InvalidInput { name: &'static str, reason: String },

    #[error("fidelity undefined: heralding probability is zero")]
    UndefinedFidelity,

    #[error("average attempt count diverges (p_ent = {p_ent})")]
    Divergent { p_ent: f64 },

    #[error("truncated summation needs {required} terms, limit is {limit}")]
    ResourceLimit { required: u64, limit: u64 },

    #[error("cutoff window N_cut = {n_cut} is too short; at least 2 attempts are required")]
    InvalidCutoff { n_cut: u64 },

    #[error("stationary solve did not converge: {diagnostics}")]
    Numerical { diagnostics: String },

    #[error("simulation cannot progress: {0}")]
    NoProgress(String),

    #[error("{0}")]
    Config(ConfigErrors),

    #[error("cannot write `{path}`: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidInput {
        name,
        reason: reason.into(),
    }
}

/// A single configuration problem, located by `section.key`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl ConfigIssue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Every issue found while validating a configuration document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl ConfigErrors {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConfigIssue> {
        self.0.iter()
    }

    /// True if some issue is reported at exactly `path`.
    pub fn has(&self, path: &str) -> bool {
        self.0.iter().any(|i| i.path == path)
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s)", self.0.len())?;
        for issue in &self.0 {
            write!(f, "\n  {issue}")?;
        }
        Ok(())
    }
}

impl From<ConfigErrors> for Error {
    fn from(e: ConfigErrors) -> Self {
        Error::Config(e)
    }
}

/// Collects validation issues under a path prefix.
#[derive(Debug, Default)]
pub(crate) struct Issues {
    pub(crate) list: Vec<ConfigIssue>,
}

impl Issues {
    pub(crate) fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.list.push(ConfigIssue::new(path, message));
    }

    pub(crate) fn probability(&mut self, path: &str, v: f64) {
        if !(0.0..=1.0).contains(&v) {
            self.push(path, format!("must be a probability in [0, 1], got {v}"));
        }
    }

    pub(crate) fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.push(path, format!("must be finite and > 0, got {v}"));
        }
    }

    pub(crate) fn into_result(self) -> Result<(), ConfigErrors> {
        if self.list.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(self.list))
        }
    }
}
