//! Implicit-feedback sequencing.
//!
//! The next portfolio shown after a key entry is a keyed pseudorandom
//! function of the user, the current portfolio and the keyword the entry
//! selected. It never looks at whether the keyword was correct, so a wrong
//! entry silently leads somewhere else while correctness is only checked
//! once every key has been entered.
//!
//! The assigned credential is *defined* by this chain: starting from the
//! first portfolio, following the correct keywords reproduces the assigned
//! portfolio sequence. The server therefore stores only the first portfolio,
//! a salt and a slow-hash verifier.
//!
//! Portfolios already shown in the session are excluded. The PRF output is
//! reduced onto the unvisited portfolios (ordered by id) with rejection
//! sampling, so there is no modulo bias.

use std::collections::BTreeMap;
use std::fmt;

use hmac::{Hmac, Mac};
use rand::CryptoRng;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use zeroize::Zeroizing;

use crate::error::SchemeError;
use crate::portfolio::{Ordinal, PortfolioId, PortfolioSet};

type HmacSha256 = Hmac<Sha256>;

const DOMAIN: &[u8] = b"cuedr/next-portfolio/v1";

/// Server-side PRF key. Versioned so that rotating the key only affects
/// credentials registered after the rotation.
#[derive(Clone, PartialEq, Eq)]
pub struct FeedbackKey {
    version: u32,
    bytes: Zeroizing<[u8; 32]>,
}

impl FeedbackKey {
    pub fn new(version: u32, bytes: [u8; 32]) -> Self {
        Self {
            version,
            bytes: Zeroizing::new(bytes),
        }
    }

    pub fn generate<R: CryptoRng + ?Sized>(version: u32, rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        Self::new(version, bytes)
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    fn mac(&self) -> HmacSha256 {
        HmacSha256::new_from_slice(self.bytes.as_slice()).expect("HMAC accepts any key length")
    }
}

impl fmt::Debug for FeedbackKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeedbackKey")
            .field("version", &self.version)
            .finish_non_exhaustive()
    }
}

/// All feedback keys a deployment has used, plus the one new registrations
/// are bound to.
#[derive(Debug, Clone)]
pub struct FeedbackKeyring {
    current: u32,
    keys: BTreeMap<u32, FeedbackKey>,
}

impl FeedbackKeyring {
    pub fn single(key: FeedbackKey) -> Self {
        let current = key.version;
        Self {
            current,
            keys: BTreeMap::from([(current, key)]),
        }
    }

    /// Adds `key` and makes it current. Older versions stay usable for
    /// existing credentials.
    pub fn rotate(&mut self, key: FeedbackKey) {
        self.current = key.version;
        self.keys.insert(key.version, key);
    }

    pub fn current(&self) -> &FeedbackKey {
        &self.keys[&self.current]
    }

    pub fn get(&self, version: u32) -> Result<&FeedbackKey, SchemeError> {
        self.keys
            .get(&version)
            .ok_or(SchemeError::UnknownKeyVersion(version))
    }

    pub fn to_file(&self) -> KeyringFile {
        KeyringFile {
            current: self.current,
            keys: self
                .keys
                .iter()
                .map(|(v, k)| (v.to_string(), hex::encode(k.bytes.as_slice())))
                .collect(),
        }
    }
}

/// Serialized shape of a persisted keyring: key version to hex key bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyringFile {
    pub current: u32,
    pub keys: BTreeMap<String, String>,
}

impl TryFrom<KeyringFile> for FeedbackKeyring {
    type Error = SchemeError;

    fn try_from(file: KeyringFile) -> Result<Self, SchemeError> {
        let mut keys = BTreeMap::new();
        for (version, hex_key) in file.keys {
            let version: u32 = version
                .parse()
                .map_err(|_| SchemeError::InvalidConfig(format!("bad key version {version:?}")))?;
            let raw = hex::decode(&hex_key)
                .ok()
                .and_then(|b| <[u8; 32]>::try_from(b).ok())
                .ok_or_else(|| {
                    SchemeError::InvalidConfig(format!(
                        "feedback key {version} is not 32 hex bytes"
                    ))
                })?;
            keys.insert(version, FeedbackKey::new(version, raw));
        }
        if !keys.contains_key(&file.current) {
            return Err(SchemeError::UnknownKeyVersion(file.current));
        }
        Ok(Self {
            current: file.current,
            keys,
        })
    }
}

/// Picks the portfolio shown after `keyword` was selected on `current`.
///
/// `visited` is every portfolio shown so far in the session, including
/// `current`. The result is never in `visited`.
pub fn next_portfolio(
    key: &FeedbackKey,
    user_id: &str,
    current: &PortfolioId,
    keyword: Ordinal,
    visited: &[PortfolioId],
    set: &PortfolioSet,
) -> Result<PortfolioId, SchemeError> {
    debug_assert!(visited.contains(current));
    let candidates: Vec<&PortfolioId> = set.ids().filter(|id| !visited.contains(id)).collect();
    if candidates.is_empty() {
        return Err(SchemeError::Exhausted);
    }
    let index = prf_index(key, user_id, current, keyword, candidates.len() as u64);
    Ok(candidates[index].clone())
}

/// Uniform index in `0..n` from the keyed PRF stream, by rejection sampling
/// 64-bit words.
fn prf_index(
    key: &FeedbackKey,
    user_id: &str,
    current: &PortfolioId,
    keyword: Ordinal,
    n: u64,
) -> usize {
    let limit = (u64::MAX / n) * n;
    let mut prefix = key.mac();
    prefix.update(DOMAIN);
    prefix.update(&(user_id.len() as u32).to_le_bytes());
    prefix.update(user_id.as_bytes());
    prefix.update(&(current.as_str().len() as u32).to_le_bytes());
    prefix.update(current.as_str().as_bytes());
    prefix.update(&u32::from(keyword.get()).to_le_bytes());
    for block in 0u32.. {
        let mut mac = prefix.clone();
        mac.update(&block.to_le_bytes());
        let out = mac.finalize().into_bytes();
        for word in out.chunks_exact(8) {
            let v = u64::from_le_bytes(word.try_into().expect("8-byte chunk"));
            if v < limit {
                return (v % n) as usize;
            }
        }
    }
    unreachable!("rejection sampling over an unbounded block counter")
}

/// Portfolios traversed when `entries` are selected one after another,
/// starting from `first`. Returns `entries.len()` portfolios: the one each
/// entry was made on.
pub fn walk_chain(
    key: &FeedbackKey,
    user_id: &str,
    first: &PortfolioId,
    entries: &[Ordinal],
    set: &PortfolioSet,
) -> Result<Vec<PortfolioId>, SchemeError> {
    let Some((_, leading)) = entries.split_last() else {
        return Ok(Vec::new());
    };
    let mut visited = vec![first.clone()];
    for (i, &ordinal) in leading.iter().enumerate() {
        let next = next_portfolio(key, user_id, &visited[i], ordinal, &visited, set)?;
        visited.push(next);
    }
    Ok(visited)
}
