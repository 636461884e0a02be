//! Credential storage: canonical secrets, slow-hash verifiers, lockout
//! accounting and durable records.

pub mod canonical;
pub mod file;
pub mod kdf;
pub mod lockout;
pub mod memory;
pub mod record;

use std::io;

use rand::CryptoRng;
use thiserror::Error;

pub use canonical::{CanonicalSecret, SEPARATOR};
pub use file::FileStore;
pub use kdf::{derive_verifier, KdfFloor, KdfParams, Verifier};
pub use lockout::{LockoutPolicy, UnixMillis};
pub use memory::MemoryStore;
pub use record::CredentialRecord;

use crate::error::CredentialError;

pub const SALT_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage medium is full")]
    StorageFull,
    #[error("corrupt record: {0}")]
    CorruptRecord(String),
    #[error("record cannot be encoded: {0}")]
    InvalidRecord(String),
    #[error("user `{0}` already has a credential")]
    AlreadyExists(String),
    #[error("storage I/O: {0}")]
    Io(io::Error),
}

impl From<io::Error> for StoreError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::StorageFull => StoreError::StorageFull,
            _ => StoreError::Io(e),
        }
    }
}

/// Durable map from user id to [`CredentialRecord`]. Implementations
/// serialize mutations per user.
pub trait CredentialStore: Send + Sync {
    fn load(&self, user_id: &str) -> Result<Option<CredentialRecord>, StoreError>;

    /// Stores a new record; fails with [`StoreError::AlreadyExists`] if the
    /// user already has one.
    fn insert(&self, record: CredentialRecord) -> Result<(), StoreError>;

    /// Read-modify-write of one record. Returns the updated record, or
    /// `None` if the user does not exist.
    fn update(
        &self,
        user_id: &str,
        f: &mut dyn FnMut(&mut CredentialRecord),
    ) -> Result<Option<CredentialRecord>, StoreError>;
}

pub fn generate_salt<R: CryptoRng + ?Sized>(rng: &mut R) -> Vec<u8> {
    let mut salt = vec![0u8; SALT_LEN];
    rng.fill_bytes(&mut salt);
    salt
}

/// Checks `keywords` against the record's verifier using the record's own
/// KDF parameters (they may predate a floor change). The comparison is
/// constant-time in the verifier bytes and the full derivation runs whatever
/// the input.
pub fn verify<S: AsRef<str>>(
    keywords: &[S],
    record: &CredentialRecord,
) -> Result<bool, CredentialError> {
    let secret = CanonicalSecret::new(keywords)?;
    let candidate = record
        .kdf
        .hasher()?
        .derive(secret.as_bytes(), &record.salt)?;
    Ok(candidate.ct_matches(&record.verifier))
}
