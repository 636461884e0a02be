//! Service configuration: a TOML file plus `CUEDR_*` environment overrides.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! pack_dir = "fixtures/pack-18"
//! store_path = "data/credentials.db"
//! keyring_path = "data/keyring.toml"
//! enrollment_token = "change-me"
//! admin_token = "change-me-too"
//! session_ttl_secs = 300
//!
//! [scheme]
//! sequence_length = 6
//! alphabet = "abcdefghijklmnopqrstuvwxyz"
//!
//! [kdf]
//! algorithm = "pbkdf2-sha256"
//! iterations = 600000
//!
//! [lockout]
//! max_failures = 10
//!
//! [rate_limit]
//! per_source_per_minute = 60
//! per_user_per_minute = 20
//! ```

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use cuedr_core::config::Profile;
use cuedr_core::store::{KdfFloor, KdfParams, LockoutPolicy};
use cuedr_core::{FeedbackKey, FeedbackKeyring, KeyringFile, SchemeConfig};
use rand::CryptoRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("environment variable {name}: {detail}")]
    Env { name: String, detail: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub pack_dir: PathBuf,
    /// Where uploaded packs are kept. On startup the highest stored version
    /// wins over `pack_dir`.
    pub uploaded_packs_dir: Option<PathBuf>,
    pub store_path: PathBuf,
    pub keyring_path: PathBuf,
    pub enrollment_token: String,
    pub admin_token: String,
    pub session_ttl_secs: u64,
    pub scheme: SchemeSection,
    pub kdf: KdfParams,
    pub lockout: LockoutPolicy,
    pub rate_limit: RateLimitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub sequence_length: usize,
    pub alphabet: String,
    pub profile: Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateLimitConfig {
    /// Login starts per source address per minute; 0 disables.
    pub per_source_per_minute: u32,
    /// Login starts per user id per minute; 0 disables.
    pub per_user_per_minute: u32,
}

impl Default for RateLimitConfig {
    fn default() -> Self {
        Self {
            per_source_per_minute: 60,
            per_user_per_minute: 20,
        }
    }
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            sequence_length: cuedr_core::config::DEFAULT_SEQUENCE_LENGTH,
            alphabet: ('a'..='z').collect(),
            profile: Profile::Production,
        }
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            pack_dir: PathBuf::from("fixtures/pack-18"),
            uploaded_packs_dir: None,
            store_path: PathBuf::from("data/credentials.db"),
            keyring_path: PathBuf::from("data/keyring.toml"),
            enrollment_token: String::new(),
            admin_token: String::new(),
            session_ttl_secs: 300,
            scheme: SchemeSection::default(),
            kdf: KdfParams::default(),
            lockout: LockoutPolicy::default(),
            rate_limit: RateLimitConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            detail: e.to_string(),
        })
    }

    /// Reads `path` (if given), then applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text, p)?
            }
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    /// Applies `CUEDR_*` overrides from `vars`. Unknown `CUEDR_` names are
    /// rejected so typos do not pass silently.
    pub fn apply_env(
        &mut self,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::Env {
                name: name.to_owned(),
                detail: e.to_string(),
            })
        }
        for (name, value) in vars {
            let Some(key) = name.strip_prefix("CUEDR_") else {
                continue;
            };
            match key {
                "CONFIG" | "LOG" => {}
                "LISTEN" => self.listen = parse(&name, &value)?,
                "PACK_DIR" => self.pack_dir = value.into(),
                "UPLOADED_PACKS_DIR" => self.uploaded_packs_dir = Some(value.into()),
                "STORE_PATH" => self.store_path = value.into(),
                "KEYRING_PATH" => self.keyring_path = value.into(),
                "ENROLLMENT_TOKEN" => self.enrollment_token = value,
                "ADMIN_TOKEN" => self.admin_token = value,
                "SESSION_TTL_SECS" => self.session_ttl_secs = parse(&name, &value)?,
                "SEQUENCE_LENGTH" => self.scheme.sequence_length = parse(&name, &value)?,
                "KDF_ITERATIONS" => {
                    self.kdf = KdfParams::Pbkdf2Sha256 {
                        iterations: parse(&name, &value)?,
                    }
                }
                "LOCKOUT_MAX_FAILURES" => self.lockout.max_failures = parse(&name, &value)?,
                "RATE_LIMIT_PER_SOURCE" => {
                    self.rate_limit.per_source_per_minute = parse(&name, &value)?
                }
                "RATE_LIMIT_PER_USER" => {
                    self.rate_limit.per_user_per_minute = parse(&name, &value)?
                }
                _ => {
                    return Err(ConfigError::Env {
                        name,
                        detail: "unknown setting".into(),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let floor = match self.scheme.profile {
            Profile::Production => KdfFloor::production(),
            Profile::Test => KdfFloor::test(),
        };
        SchemeConfig {
            alphabet: self.scheme.alphabet.chars().collect(),
            sequence_length: self.scheme.sequence_length,
            kdf: self.kdf,
            kdf_floor: floor,
            lockout: self.lockout,
            profile: self.scheme.profile,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.enrollment_token.len() < 16 || self.admin_token.len() < 16 {
            return Err(ConfigError::Invalid(
                "enrollment_token and admin_token must each be at least 16 characters".into(),
            ));
        }
        if self.enrollment_token == self.admin_token {
            return Err(ConfigError::Invalid(
                "enrollment and admin tokens must differ".into(),
            ));
        }
        if self.session_ttl_secs == 0 {
            return Err(ConfigError::Invalid(
                "session_ttl_secs must be positive".into(),
            ));
        }
        self.scheme_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// Loads the feedback keyring, creating a fresh one (version 1) when the
/// file does not exist yet.
pub fn load_or_create_keyring<R: CryptoRng + ?Sized>(
    path: &Path,
    rng: &mut R,
) -> Result<FeedbackKeyring, ConfigError> {
    match std::fs::read_to_string(path) {
        Ok(text) => {
            let file: KeyringFile = toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?;
            FeedbackKeyring::try_from(file).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let keyring = FeedbackKeyring::single(FeedbackKey::generate(1, rng));
            write_keyring(path, &keyring)?;
            Ok(keyring)
        }
        Err(source) => Err(ConfigError::Read {
            path: path.to_path_buf(),
            source,
        }),
    }
}

pub fn write_keyring(path: &Path, keyring: &FeedbackKeyring) -> Result<(), ConfigError> {
    let werr = |source| ConfigError::Write {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(werr)?;
    }
    let text = toml::to_string(&keyring.to_file()).expect("keyring serializes");
    let mut options = std::fs::OpenOptions::new();
    options.write(true).create(true).truncate(true);
    #[cfg(unix)]
    std::os::unix::fs::OpenOptionsExt::mode(&mut options, 0o600);
    use std::io::Write;
    options
        .open(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(werr)
}
