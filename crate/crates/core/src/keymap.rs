//! Per-render key assignment.
//!
//! Each time a portfolio is shown, every key symbol is bound to exactly one
//! keyword slot by a fresh uniform permutation. The user types the symbol
//! next to their keyword, so the typed input differs from one render to the
//! next even though the secret keyword does not.

use rand::seq::SliceRandom;
use rand::CryptoRng;
use serde::Serialize;

use crate::config::{fold_symbol, SchemeConfig};
use crate::portfolio::Ordinal;

/// Bijection between key symbols and keyword ordinals for one render.
#[derive(Clone, PartialEq, Eq, Serialize)]
pub struct KeyMapping {
    // symbol bound to ordinal `i + 1`
    by_ordinal: Vec<char>,
}

impl KeyMapping {
    /// Draws a uniformly random permutation of `alphabet` with an unbiased
    /// Fisher-Yates shuffle.
    pub fn sample<R: CryptoRng + ?Sized>(alphabet: &[char], rng: &mut R) -> Self {
        let mut by_ordinal = alphabet.to_vec();
        by_ordinal.shuffle(rng);
        Self { by_ordinal }
    }

    pub fn len(&self) -> usize {
        self.by_ordinal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_ordinal.is_empty()
    }

    pub fn symbol_for(&self, ordinal: Ordinal) -> Option<char> {
        self.by_ordinal.get(ordinal.index()).copied()
    }

    /// Translates a typed symbol (case-folded first) to the ordinal it is
    /// bound to in this render.
    pub fn ordinal_for(&self, symbol: char) -> Option<Ordinal> {
        let folded = fold_symbol(symbol)?;
        self.by_ordinal
            .iter()
            .position(|&c| c == folded)
            .map(Ordinal::from_index)
    }

    /// `(ordinal, symbol)` pairs in ordinal order.
    pub fn iter(&self) -> impl Iterator<Item = (Ordinal, char)> + '_ {
        self.by_ordinal
            .iter()
            .enumerate()
            .map(|(i, &c)| (Ordinal::from_index(i), c))
    }
}

// Key bindings are live secrets while a challenge is open.
impl std::fmt::Debug for KeyMapping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyMapping")
            .field("len", &self.by_ordinal.len())
            .finish_non_exhaustive()
    }
}

pub fn sample_key_mapping<R: CryptoRng + ?Sized>(config: &SchemeConfig, rng: &mut R) -> KeyMapping {
    KeyMapping::sample(&config.alphabet, rng)
}
