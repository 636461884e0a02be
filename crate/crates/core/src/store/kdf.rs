//! Salted slow-hash verifiers.
//!
//! Two algorithms sit behind the [`SlowHash`] interface: PBKDF2-HMAC-SHA256
//! and the memory-hard Argon2id. Both produce a 32-byte verifier.

use std::time::{Duration, Instant};

use argon2::{Algorithm, Argon2, Params, Version};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use subtle::ConstantTimeEq;

use crate::error::CredentialError;
use crate::store::canonical::CanonicalSecret;

pub const VERIFIER_LEN: usize = 32;
pub const MIN_SALT_LEN: usize = 16;

/// Wire ids used in the on-disk record format.
pub const ALG_PBKDF2_SHA256: u8 = 1;
pub const ALG_ARGON2ID: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum KdfParams {
    #[serde(rename = "pbkdf2-sha256")]
    Pbkdf2Sha256 { iterations: u32 },
    Argon2id {
        memory_kib: u32,
        passes: u32,
        lanes: u32,
    },
}

impl Default for KdfParams {
    /// About 100 ms per derivation on a current x86-64 core.
    fn default() -> Self {
        KdfParams::Pbkdf2Sha256 {
            iterations: DEFAULT_PBKDF2_ITERATIONS,
        }
    }
}

pub const DEFAULT_PBKDF2_ITERATIONS: u32 = 600_000;

impl KdfParams {
    pub fn algorithm_id(&self) -> u8 {
        match self {
            KdfParams::Pbkdf2Sha256 { .. } => ALG_PBKDF2_SHA256,
            KdfParams::Argon2id { .. } => ALG_ARGON2ID,
        }
    }

    pub fn algorithm_name(&self) -> &'static str {
        match self {
            KdfParams::Pbkdf2Sha256 { .. } => "pbkdf2-sha256",
            KdfParams::Argon2id { .. } => "argon2id",
        }
    }

    /// Same algorithm with its cost scaled by `factor` (iterations for
    /// PBKDF2, passes for Argon2id).
    pub fn scaled(&self, factor: u32) -> Self {
        match *self {
            KdfParams::Pbkdf2Sha256 { iterations } => KdfParams::Pbkdf2Sha256 {
                iterations: iterations.saturating_mul(factor),
            },
            KdfParams::Argon2id {
                memory_kib,
                passes,
                lanes,
            } => KdfParams::Argon2id {
                memory_kib,
                passes: passes.saturating_mul(factor),
                lanes,
            },
        }
    }

    pub fn check_floor(&self, floor: &KdfFloor) -> Result<(), CredentialError> {
        match *self {
            KdfParams::Pbkdf2Sha256 { iterations } if iterations < floor.min_pbkdf2_iterations => {
                Err(CredentialError::WeakParams(format!(
                    "{iterations} PBKDF2 iterations, floor is {}",
                    floor.min_pbkdf2_iterations
                )))
            }
            KdfParams::Argon2id {
                memory_kib, passes, ..
            } if memory_kib < floor.min_argon2_memory_kib || passes < floor.min_argon2_passes => {
                Err(CredentialError::WeakParams(format!(
                    "Argon2id m={memory_kib} KiB t={passes}, floor is m={} t={}",
                    floor.min_argon2_memory_kib, floor.min_argon2_passes
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn hasher(&self) -> Result<Box<dyn SlowHash>, CredentialError> {
        Ok(match *self {
            KdfParams::Pbkdf2Sha256 { iterations } => Box::new(Pbkdf2Sha256 { iterations }),
            KdfParams::Argon2id {
                memory_kib,
                passes,
                lanes,
            } => {
                let params = Params::new(memory_kib, passes, lanes, Some(VERIFIER_LEN))
                    .map_err(|e| CredentialError::Kdf(e.to_string()))?;
                Box::new(Argon2idHash { params })
            }
        })
    }
}

/// Minimum acceptable KDF cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KdfFloor {
    pub min_pbkdf2_iterations: u32,
    pub min_argon2_memory_kib: u32,
    pub min_argon2_passes: u32,
    /// Minimum measured verification time at the configured parameters.
    pub min_verify_millis: u64,
}

impl KdfFloor {
    pub fn production() -> Self {
        Self {
            min_pbkdf2_iterations: 100_000,
            min_argon2_memory_kib: 19 * 1024,
            min_argon2_passes: 2,
            min_verify_millis: 50,
        }
    }

    pub fn test() -> Self {
        Self {
            min_pbkdf2_iterations: 1,
            min_argon2_memory_kib: 8,
            min_argon2_passes: 1,
            min_verify_millis: 0,
        }
    }
}

impl Default for KdfFloor {
    fn default() -> Self {
        Self::production()
    }
}

pub trait SlowHash: Send + Sync {
    fn algorithm_id(&self) -> u8;
    fn derive(&self, secret: &[u8], salt: &[u8]) -> Result<Verifier, CredentialError>;
}

struct Pbkdf2Sha256 {
    iterations: u32,
}

impl SlowHash for Pbkdf2Sha256 {
    fn algorithm_id(&self) -> u8 {
        ALG_PBKDF2_SHA256
    }

    fn derive(&self, secret: &[u8], salt: &[u8]) -> Result<Verifier, CredentialError> {
        let mut out = [0u8; VERIFIER_LEN];
        pbkdf2::pbkdf2_hmac::<Sha256>(secret, salt, self.iterations, &mut out);
        Ok(Verifier(out))
    }
}

struct Argon2idHash {
    params: Params,
}

impl SlowHash for Argon2idHash {
    fn algorithm_id(&self) -> u8 {
        ALG_ARGON2ID
    }

    fn derive(&self, secret: &[u8], salt: &[u8]) -> Result<Verifier, CredentialError> {
        let mut out = [0u8; VERIFIER_LEN];
        Argon2::new(Algorithm::Argon2id, Version::V0x13, self.params.clone())
            .hash_password_into(secret, salt, &mut out)
            .map_err(|e| CredentialError::Kdf(e.to_string()))?;
        Ok(Verifier(out))
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Verifier(pub [u8; VERIFIER_LEN]);

impl Verifier {
    pub fn as_bytes(&self) -> &[u8; VERIFIER_LEN] {
        &self.0
    }

    /// Constant-time in the verifier bytes.
    pub fn ct_matches(&self, other: &Verifier) -> bool {
        self.0.ct_eq(&other.0).into()
    }
}

impl std::fmt::Debug for Verifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Verifier({}…)", hex::encode(&self.0[..4]))
    }
}

/// Canonicalizes the ordered keywords and runs the slow hash over them.
pub fn derive_verifier<S: AsRef<str>>(
    keywords: &[S],
    salt: &[u8],
    params: &KdfParams,
    floor: &KdfFloor,
) -> Result<Verifier, CredentialError> {
    params.check_floor(floor)?;
    if salt.len() < MIN_SALT_LEN {
        return Err(CredentialError::WeakParams(format!(
            "salt is {} bytes, need at least {MIN_SALT_LEN}",
            salt.len()
        )));
    }
    let secret = CanonicalSecret::new(keywords)?;
    params.hasher()?.derive(secret.as_bytes(), salt)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchStats {
    pub algorithm: &'static str,
    pub params: KdfParams,
    pub samples: usize,
    pub min_ms: f64,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
}

/// Times `samples` derivations of a fixed secret.
pub fn bench(params: &KdfParams, samples: usize) -> Result<BenchStats, CredentialError> {
    assert!(samples > 0, "bench needs at least one sample");
    let hasher = params.hasher()?;
    let salt = [0x5a; MIN_SALT_LEN];
    let secret = CanonicalSecret::new(&["bench", "keyword", "sequence"])?;
    let mut times: Vec<Duration> = (0..samples)
        .map(|_| {
            let start = Instant::now();
            let v = hasher.derive(secret.as_bytes(), &salt);
            let elapsed = start.elapsed();
            std::hint::black_box(v).map(|_| elapsed)
        })
        .collect::<Result<_, _>>()?;
    times.sort_unstable();
    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    let median = if samples % 2 == 1 {
        ms(times[samples / 2])
    } else {
        (ms(times[samples / 2 - 1]) + ms(times[samples / 2])) / 2.0
    };
    Ok(BenchStats {
        algorithm: params.algorithm_name(),
        params: *params,
        samples,
        min_ms: ms(times[0]),
        median_ms: median,
        mean_ms: times.iter().copied().map(ms).sum::<f64>() / samples as f64,
        max_ms: ms(times[samples - 1]),
    })
}
