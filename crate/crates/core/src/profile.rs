//! Deployment profile: `test` (deterministic, seeded, mock allowed) or
//! `production` (OS entropy, mock forbidden).

use std::fmt;
use std::str::FromStr;

use rand::rngs::OsRng;
use rand::RngCore;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Test,
    Production,
}

impl Profile {
    pub const ENV: &'static str = "ZKACE_PROFILE";

    /// Reads [`Profile::ENV`], defaulting to `test` when unset.
    pub fn from_env() -> Result<Profile, ProfileError> {
        match std::env::var(Self::ENV) {
            Ok(v) => v.parse(),
            Err(_) => Ok(Profile::Test),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Test => "test",
            Profile::Production => "production",
        })
    }
}

impl FromStr for Profile {
    type Err = ProfileError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "test" => Ok(Profile::Test),
            "production" => Ok(Profile::Production),
            other => Err(ProfileError::Unknown(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("unknown profile `{0}` (expected test|production)")]
    Unknown(String),
    #[error("the test profile requires an explicit setup seed")]
    SeedRequired,
}

/// Setup randomness after applying the profile rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetupSeed {
    pub bytes: [u8; 32],
    /// A caller-chosen seed under the production profile.
    pub insecure: bool,
}

pub const INSECURE_SETUP_WARNING: &str =
    "WARNING: INSECURE-FOR-PRODUCTION: setup randomness comes from a caller-supplied seed";

pub fn resolve_setup_seed(profile: Profile, seed: Option<[u8; 32]>) -> Result<SetupSeed, ProfileError> {
    match (profile, seed) {
        (Profile::Test, Some(bytes)) => Ok(SetupSeed { bytes, insecure: false }),
        (Profile::Test, None) => Err(ProfileError::SeedRequired),
        (Profile::Production, Some(bytes)) => Ok(SetupSeed { bytes, insecure: true }),
        (Profile::Production, None) => {
            let mut bytes = [0u8; 32];
            OsRng.fill_bytes(&mut bytes);
            Ok(SetupSeed { bytes, insecure: false })
        }
    }
}
