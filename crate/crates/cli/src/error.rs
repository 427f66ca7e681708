use std::path::Path;

use serde_json::{json, Value};
use thiserror::Error;
use zkace_core::backend::BackendError;
use zkace_core::chain::{ChainError, RejectReason};
use zkace_core::didp::DidpError;
use zkace_core::hash::params::ParamsError;
use zkace_core::hash::HashError;
use zkace_core::profile::ProfileError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Malformed(String),
    #[error("{0}")]
    Version(String),
    #[error("{0}")]
    Authentication(String),
    #[error("proof rejected: {0}")]
    ProofRejected(String),
    #[error("transaction rejected at step {}: {0}", .0.step())]
    TxRejected(RejectReason),
    #[error("{0} game(s) failed")]
    GamesFailed(usize),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Unsatisfied(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Malformed(_) => 4,
            CliError::Version(_) => 5,
            CliError::Authentication(_) => 6,
            CliError::ProofRejected(_) => 7,
            CliError::TxRejected(_) => 8,
            CliError::GamesFailed(_) => 9,
            CliError::Config(_) => 10,
            CliError::Unsatisfied(_) => 11,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Internal(_) => "internal",
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Malformed(_) => "malformed",
            CliError::Version(_) => "unsupported_version",
            CliError::Authentication(_) => "authentication",
            CliError::ProofRejected(_) => "proof_rejected",
            CliError::TxRejected(_) => "tx_rejected",
            CliError::GamesFailed(_) => "games_failed",
            CliError::Config(_) => "config",
            CliError::Unsatisfied(_) => "unsatisfied_witness",
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::TxRejected(r) = self {
            v["reason"] = json!(r.code());
            v["step"] = json!(r.step());
        }
        v
    }
}

impl From<DidpError> for CliError {
    fn from(e: DidpError) -> Self {
        match e {
            DidpError::Malformed(_) => CliError::Malformed(e.to_string()),
            DidpError::UnsupportedVersion(_) => CliError::Version(e.to_string()),
            DidpError::AuthenticationFailed => CliError::Authentication(e.to_string()),
            DidpError::EmptyCredential => CliError::Usage(e.to_string()),
            DidpError::Kdf(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::UnsatisfiedWitness(_) => CliError::Unsatisfied(e.to_string()),
            BackendError::CircuitMismatch { .. } => CliError::Config(e.to_string()),
            BackendError::Malformed { .. } => CliError::Malformed(e.to_string()),
            BackendError::UnsupportedVersion { .. } => CliError::Version(e.to_string()),
            BackendError::EmptyBatch | BackendError::Synthesis(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::Checksum | ChainError::Malformed(_) => CliError::Malformed(e.to_string()),
            ChainError::UnsupportedVersion(_) => CliError::Version(e.to_string()),
            ChainError::Backend(b) => b.into(),
            ChainError::Io(io) => CliError::Io { path: "chain state".into(), source: io },
            ChainError::DuplicateIdentity(_)
            | ChainError::MockInProduction
            | ChainError::ModeMismatch { .. }
            | ChainError::ParamsMismatch
            | ChainError::BadNonceWindow => CliError::Config(e.to_string()),
        }
    }
}

impl From<ParamsError> for CliError {
    fn from(e: ParamsError) -> Self {
        match e {
            ParamsError::Io(source) => CliError::Io { path: "hash parameters".into(), source },
            other => CliError::Malformed(other.to_string()),
        }
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<HashError> for CliError {
    fn from(e: HashError) -> Self {
        CliError::Usage(e.to_string())
    }
}
