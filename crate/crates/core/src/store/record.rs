//! Persisted credential records and their binary encoding.
//!
//! Encoding, version 1. All integers little-endian.
//!
//! | size        | field                                                   |
//! |-------------|---------------------------------------------------------|
//! | 4           | magic `CDRR`                                            |
//! | 2           | format version (`1`)                                    |
//! | 2 + n       | `user_id`: u16 length, UTF-8 bytes                      |
//! | 2 + n       | `first_portfolio_id`: u16 length, UTF-8 bytes           |
//! | 1 + n       | `salt`: u8 length (16..=255), bytes                     |
//! | 1           | KDF algorithm id (1 = PBKDF2-HMAC-SHA256, 2 = Argon2id) |
//! | 4 or 12     | KDF cost: iterations (id 1); memory KiB, passes, lanes (id 2) |
//! | 1 + n       | `verifier`: u8 length (32), bytes                       |
//! | 4           | `prf_key_version`                                       |
//! | 4           | `failure_count`                                         |
//! | 4           | `lockout_level`                                         |
//! | 1           | lock flag (0 = unlocked, 1 = locked)                    |
//! | 8           | `locked_until`, Unix milliseconds (0 when unlocked)     |
//! | 32          | SHA-256 of every preceding byte                         |
//!
//! Decoding checks the trailer before looking at any field, so a damaged
//! record is reported as [`StoreError::CorruptRecord`] rather than parsed.

use sha2::{Digest, Sha256};

use crate::portfolio::PortfolioId;
use crate::store::kdf::{
    KdfParams, Verifier, ALG_ARGON2ID, ALG_PBKDF2_SHA256, MIN_SALT_LEN, VERIFIER_LEN,
};
use crate::store::lockout::UnixMillis;
use crate::store::StoreError;

pub const RECORD_MAGIC: [u8; 4] = *b"CDRR";
pub const RECORD_VERSION: u16 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialRecord {
    pub user_id: String,
    pub first_portfolio_id: PortfolioId,
    pub salt: Vec<u8>,
    pub verifier: Verifier,
    pub kdf: KdfParams,
    pub prf_key_version: u32,
    pub failure_count: u32,
    /// Number of lockouts since the last success; drives backoff escalation.
    pub lockout_level: u32,
    pub locked_until: Option<UnixMillis>,
}

impl CredentialRecord {
    pub fn encode(&self) -> Result<Vec<u8>, StoreError> {
        let mut out = Vec::with_capacity(128);
        out.extend_from_slice(&RECORD_MAGIC);
        out.extend_from_slice(&RECORD_VERSION.to_le_bytes());
        put_str16(&mut out, &self.user_id, "user_id")?;
        put_str16(
            &mut out,
            self.first_portfolio_id.as_str(),
            "first_portfolio_id",
        )?;
        if self.salt.len() < MIN_SALT_LEN || self.salt.len() > usize::from(u8::MAX) {
            return Err(StoreError::InvalidRecord(format!(
                "salt length {} outside {MIN_SALT_LEN}..=255",
                self.salt.len()
            )));
        }
        out.push(self.salt.len() as u8);
        out.extend_from_slice(&self.salt);
        out.push(self.kdf.algorithm_id());
        match self.kdf {
            KdfParams::Pbkdf2Sha256 { iterations } => {
                out.extend_from_slice(&iterations.to_le_bytes())
            }
            KdfParams::Argon2id {
                memory_kib,
                passes,
                lanes,
            } => {
                out.extend_from_slice(&memory_kib.to_le_bytes());
                out.extend_from_slice(&passes.to_le_bytes());
                out.extend_from_slice(&lanes.to_le_bytes());
            }
        }
        out.push(VERIFIER_LEN as u8);
        out.extend_from_slice(self.verifier.as_bytes());
        out.extend_from_slice(&self.prf_key_version.to_le_bytes());
        out.extend_from_slice(&self.failure_count.to_le_bytes());
        out.extend_from_slice(&self.lockout_level.to_le_bytes());
        out.push(u8::from(self.locked_until.is_some()));
        out.extend_from_slice(&self.locked_until.unwrap_or(0).to_le_bytes());
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, StoreError> {
        if bytes.len() < RECORD_MAGIC.len() + 2 + CHECKSUM_LEN {
            return Err(corrupt("record shorter than header and checksum"));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != trailer {
            return Err(corrupt("checksum mismatch"));
        }
        let mut r = Reader { buf: body };
        if r.take(4)? != RECORD_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u16()?;
        if version != RECORD_VERSION {
            return Err(corrupt(&format!("unsupported record version {version}")));
        }
        let user_id = r.str16()?;
        let first_portfolio_id = PortfolioId::new(r.str16()?);
        let salt_len = usize::from(r.u8()?);
        if salt_len < MIN_SALT_LEN {
            return Err(corrupt("salt too short"));
        }
        let salt = r.take(salt_len)?.to_vec();
        let kdf = match r.u8()? {
            ALG_PBKDF2_SHA256 => KdfParams::Pbkdf2Sha256 {
                iterations: r.u32()?,
            },
            ALG_ARGON2ID => KdfParams::Argon2id {
                memory_kib: r.u32()?,
                passes: r.u32()?,
                lanes: r.u32()?,
            },
            other => return Err(corrupt(&format!("unknown KDF id {other}"))),
        };
        if usize::from(r.u8()?) != VERIFIER_LEN {
            return Err(corrupt("verifier length"));
        }
        let verifier = Verifier(r.take(VERIFIER_LEN)?.try_into().expect("length checked"));
        let prf_key_version = r.u32()?;
        let failure_count = r.u32()?;
        let lockout_level = r.u32()?;
        let locked = r.u8()?;
        let until = r.u64()?;
        let locked_until = match (locked, until) {
            (0, 0) => None,
            (1, t) => Some(t),
            _ => return Err(corrupt("lock flag")),
        };
        if !r.buf.is_empty() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Self {
            user_id,
            first_portfolio_id,
            salt,
            verifier,
            kdf,
            prf_key_version,
            failure_count,
            lockout_level,
            locked_until,
        })
    }
}

fn corrupt(reason: &str) -> StoreError {
    StoreError::CorruptRecord(reason.to_owned())
}

fn put_str16(out: &mut Vec<u8>, s: &str, field: &str) -> Result<(), StoreError> {
    let len = u16::try_from(s.len())
        .map_err(|_| StoreError::InvalidRecord(format!("{field} longer than 65535 bytes")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        if self.buf.len() < n {
            return Err(corrupt("truncated field"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn str16(&mut self) -> Result<String, StoreError> {
        let len = usize::from(self.u16()?);
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| corrupt("invalid UTF-8"))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn sample_record() -> CredentialRecord {
        CredentialRecord {
            user_id: "alice".into(),
            first_portfolio_id: PortfolioId::new("p07-instruments"),
            salt: (0u8..16).collect(),
            verifier: Verifier([0xab; 32]),
            kdf: KdfParams::Pbkdf2Sha256 {
                iterations: 600_000,
            },
            prf_key_version: 1,
            failure_count: 0,
            lockout_level: 0,
            locked_until: None,
        }
    }

    #[test]
    fn round_trip() {
        let mut r = sample_record();
        r.locked_until = Some(1_700_000_000_000);
        r.failure_count = 4;
        r.kdf = KdfParams::Argon2id {
            memory_kib: 19456,
            passes: 2,
            lanes: 1,
        };
        assert_eq!(CredentialRecord::decode(&r.encode().unwrap()).unwrap(), r);
    }

    #[test]
    fn every_single_bit_flip_is_detected() {
        let bytes = sample_record().encode().unwrap();
        for i in 0..bytes.len() * 8 {
            let mut damaged = bytes.clone();
            damaged[i / 8] ^= 1 << (i % 8);
            assert!(matches!(
                CredentialRecord::decode(&damaged),
                Err(StoreError::CorruptRecord(_))
            ));
        }
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = sample_record().encode().unwrap();
        for n in 0..bytes.len() {
            assert!(CredentialRecord::decode(&bytes[..n]).is_err());
        }
    }

    #[test]
    fn short_salt_refused() {
        let mut r = sample_record();
        r.salt.truncate(8);
        assert!(matches!(r.encode(), Err(StoreError::InvalidRecord(_))));
    }

    proptest! {
        #[test]
        fn arbitrary_records_round_trip(
            user in "[a-z0-9._@-]{1,40}",
            first in "[a-z0-9-]{1,20}",
            salt in proptest::collection::vec(any::<u8>(), 16..64),
            verifier in any::<[u8; 32]>(),
            iterations in 1u32..,
            key_version: u32,
            failures: u32,
            level: u32,
            until in proptest::option::of(1u64..),
        ) {
            let r = CredentialRecord {
                user_id: user,
                first_portfolio_id: PortfolioId::new(first),
                salt,
                verifier: Verifier(verifier),
                kdf: KdfParams::Pbkdf2Sha256 { iterations },
                prf_key_version: key_version,
                failure_count: failures,
                lockout_level: level,
                locked_until: until,
            };
            prop_assert_eq!(CredentialRecord::decode(&r.encode().unwrap()).unwrap(), r);
        }

        #[test]
        fn random_damage_never_decodes_to_a_different_record(
            flips in proptest::collection::vec((any::<prop::sample::Index>(), 1u8..), 1..6),
        ) {
            let original = sample_record();
            let mut bytes = original.encode().unwrap();
            for (idx, mask) in flips {
                let i = idx.index(bytes.len());
                bytes[i] ^= mask;
            }
            match CredentialRecord::decode(&bytes) {
                Ok(r) => prop_assert_eq!(r, original),
                Err(e) => prop_assert!(matches!(e, StoreError::CorruptRecord(_))),
            }
        }
    }
}
