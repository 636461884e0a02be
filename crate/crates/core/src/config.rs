use serde::{Deserialize, Serialize};

use crate::error::SchemeError;
use crate::store::kdf::{KdfFloor, KdfParams};
use crate::store::lockout::LockoutPolicy;

pub const DEFAULT_SEQUENCE_LENGTH: usize = 6;

/// Production profiles refuse degenerate alphabets (`k < 2`) and weak KDF
/// parameters; test profiles allow them so small cases stay enumerable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Production,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    /// Key symbols, one per keyword slot. `k` is the alphabet length.
    pub alphabet: Vec<char>,
    /// Number of portfolios in a credential (`m`).
    pub sequence_length: usize,
    pub kdf: KdfParams,
    pub kdf_floor: KdfFloor,
    pub lockout: LockoutPolicy,
    pub profile: Profile,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            alphabet: ('a'..='z').collect(),
            sequence_length: DEFAULT_SEQUENCE_LENGTH,
            kdf: KdfParams::default(),
            kdf_floor: KdfFloor::production(),
            lockout: LockoutPolicy::default(),
            profile: Profile::Production,
        }
    }
}

impl SchemeConfig {
    /// Small-alphabet configuration for simulations and tests: the first `k`
    /// letters, `m` portfolios, a single-iteration KDF and no lockout.
    pub fn test_profile(k: usize, m: usize) -> Self {
        assert!((1..=26).contains(&k), "test profiles support 1..=26 keys");
        Self {
            alphabet: ('a'..='z').take(k).collect(),
            sequence_length: m,
            kdf: KdfParams::Pbkdf2Sha256 { iterations: 1 },
            kdf_floor: KdfFloor::test(),
            lockout: LockoutPolicy::disabled(),
            profile: Profile::Test,
        }
    }

    pub fn keywords_per_portfolio(&self) -> usize {
        self.alphabet.len()
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        let k = self.alphabet.len();
        let min_k = match self.profile {
            Profile::Production => 2,
            Profile::Test => 1,
        };
        if k < min_k {
            return Err(SchemeError::InvalidConfig(format!(
                "alphabet has {k} symbols, profile requires at least {min_k}"
            )));
        }
        if usize::from(u16::MAX) < k {
            return Err(SchemeError::InvalidConfig("alphabet too large".into()));
        }
        for (i, c) in self.alphabet.iter().enumerate() {
            if self.alphabet[..i].contains(c) {
                return Err(SchemeError::InvalidConfig(format!(
                    "alphabet symbol {c:?} repeated"
                )));
            }
            if fold_symbol(*c) != Some(*c) || c.is_whitespace() || c.is_control() {
                return Err(SchemeError::InvalidConfig(format!(
                    "alphabet symbol {c:?} is not a case-folded printable character"
                )));
            }
        }
        if self.sequence_length == 0 {
            return Err(SchemeError::InvalidConfig(
                "sequence length must be at least 1".into(),
            ));
        }
        self.kdf.check_floor(&self.kdf_floor)?;
        Ok(())
    }

    /// Validates the configuration against the portfolio set it will run on.
    pub fn validate_for(
        &self,
        portfolios: usize,
        keywords_per_portfolio: usize,
    ) -> Result<(), SchemeError> {
        self.validate()?;
        if keywords_per_portfolio != self.alphabet.len() {
            return Err(SchemeError::InvalidConfig(format!(
                "portfolios have {keywords_per_portfolio} keywords but the alphabet has {} symbols",
                self.alphabet.len()
            )));
        }
        if portfolios < self.sequence_length {
            return Err(SchemeError::InsufficientPortfolios {
                available: portfolios,
                required: self.sequence_length,
            });
        }
        Ok(())
    }
}

/// Case-folds a typed key symbol. Returns `None` when the lowercase form is
/// not a single character.
pub fn fold_symbol(c: char) -> Option<char> {
    let mut lower = c.to_lowercase();
    let folded = lower.next()?;
    lower.next().is_none().then_some(folded)
}
