use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("rotation is not orthonormal (error {error:.3e})")]
    NotOrthonormal { error: f64 },
    #[error("contact normal has zero length")]
    DegenerateNormal,
    #[error("contact list is empty")]
    NoContacts,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error("scenario does not fit the gripper: {0}")]
    DoesNotFit(String),
    #[error("failed to parse {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("simulation fault: {0}")]
    Fault(String),
}

impl GraspError {
    /// True for errors caused by configuration or input rather than by the run.
    pub fn is_config(&self) -> bool {
        !matches!(self, GraspError::Fault(_) | GraspError::Io { .. })
    }
}
