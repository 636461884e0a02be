//! Portfolios and their keyword entries.
//!
//! A portfolio is a themed page of `k` keywords. Every keyword carries three
//! kinds of memory cue: an image, a numbered one-line fact, and a fixed slot
//! in the page layout. The layout order of [`Portfolio::entries`] is frozen
//! once the portfolio is constructed, so every render of a portfolio places
//! each keyword at the same absolute and relative position.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::SchemeError;

/// 1-based keyword slot number within a portfolio. Shown to the user as the
/// numeric verbal cue next to the fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ordinal(u16);

impl Ordinal {
    /// Returns `None` for zero.
    pub fn new(value: u16) -> Option<Self> {
        (value >= 1).then_some(Self(value))
    }

    /// Builds an ordinal from a 0-based slot index.
    pub fn from_index(index: usize) -> Self {
        let value = u16::try_from(index + 1).expect("ordinal index out of range");
        Self(value)
    }

    pub fn get(self) -> u16 {
        self.0
    }

    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Stable portfolio identifier. Unvisited portfolios are ordered by this id
/// when the feedback chain picks the next one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PortfolioId(String);

impl PortfolioId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PortfolioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PortfolioId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub keyword: String,
    pub ordinal: Ordinal,
    pub fact: String,
    /// Asset identifier of the image cue.
    pub image_ref: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Portfolio {
    id: PortfolioId,
    category: String,
    entries: Vec<KeywordEntry>,
    // slot index in `entries` for each ordinal - 1
    by_ordinal: Vec<usize>,
}

impl Portfolio {
    /// Checks that ordinals cover `1..=entries.len()` exactly once, keywords are
    /// unique and facts are non-empty. `entries` order becomes the layout.
    pub fn new(
        id: PortfolioId,
        category: impl Into<String>,
        entries: Vec<KeywordEntry>,
    ) -> Result<Self, SchemeError> {
        let k = entries.len();
        if k == 0 {
            return Err(SchemeError::InvalidPortfolio {
                portfolio: id,
                reason: "portfolio has no entries".into(),
            });
        }
        let mut by_ordinal = vec![usize::MAX; k];
        let mut keywords = HashSet::with_capacity(k);
        for (slot, entry) in entries.iter().enumerate() {
            let ord = usize::from(entry.ordinal.get());
            if ord > k {
                return Err(SchemeError::InvalidPortfolio {
                    portfolio: id,
                    reason: format!("ordinal {} outside 1..={k}", entry.ordinal),
                });
            }
            if by_ordinal[ord - 1] != usize::MAX {
                return Err(SchemeError::InvalidPortfolio {
                    portfolio: id,
                    reason: format!("duplicate ordinal {}", entry.ordinal),
                });
            }
            by_ordinal[ord - 1] = slot;
            if !keywords.insert(entry.keyword.as_str()) {
                return Err(SchemeError::InvalidPortfolio {
                    portfolio: id,
                    reason: format!("duplicate keyword at ordinal {}", entry.ordinal),
                });
            }
            if entry.fact.trim().is_empty() {
                return Err(SchemeError::InvalidPortfolio {
                    portfolio: id,
                    reason: format!("empty fact at ordinal {}", entry.ordinal),
                });
            }
        }
        Ok(Self {
            id,
            category: category.into(),
            entries,
            by_ordinal,
        })
    }

    pub fn id(&self) -> &PortfolioId {
        &self.id
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    /// Entries in fixed layout order.
    pub fn entries(&self) -> &[KeywordEntry] {
        &self.entries
    }

    pub fn keywords_per_portfolio(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, ordinal: Ordinal) -> Option<&KeywordEntry> {
        self.by_ordinal
            .get(ordinal.index())
            .map(|&slot| &self.entries[slot])
    }
}

/// The deployment-wide collection of portfolios, shared by all users.
#[derive(Debug, Clone)]
pub struct PortfolioSet {
    portfolios: BTreeMap<PortfolioId, Arc<Portfolio>>,
    keywords_per_portfolio: usize,
}

impl PortfolioSet {
    pub fn new(portfolios: Vec<Portfolio>) -> Result<Self, SchemeError> {
        let keywords_per_portfolio = portfolios
            .first()
            .map(Portfolio::keywords_per_portfolio)
            .ok_or(SchemeError::InsufficientPortfolios {
                available: 0,
                required: 1,
            })?;
        let mut map = BTreeMap::new();
        for p in portfolios {
            if p.keywords_per_portfolio() != keywords_per_portfolio {
                return Err(SchemeError::InvalidPortfolio {
                    reason: format!(
                        "has {} entries, expected {keywords_per_portfolio}",
                        p.keywords_per_portfolio()
                    ),
                    portfolio: p.id,
                });
            }
            let id = p.id.clone();
            if map.insert(id.clone(), Arc::new(p)).is_some() {
                return Err(SchemeError::InvalidPortfolio {
                    portfolio: id,
                    reason: "duplicate portfolio id".into(),
                });
            }
        }
        Ok(Self {
            portfolios: map,
            keywords_per_portfolio,
        })
    }

    pub fn len(&self) -> usize {
        self.portfolios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.portfolios.is_empty()
    }

    pub fn keywords_per_portfolio(&self) -> usize {
        self.keywords_per_portfolio
    }

    pub fn get(&self, id: &PortfolioId) -> Option<&Portfolio> {
        self.portfolios.get(id).map(Arc::as_ref)
    }

    pub fn portfolio(&self, id: &PortfolioId) -> Result<&Portfolio, SchemeError> {
        self.get(id)
            .ok_or_else(|| SchemeError::UnknownPortfolio(id.clone()))
    }

    /// Ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = &PortfolioId> + '_ {
        self.portfolios.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Portfolio> + '_ {
        self.portfolios.values().map(Arc::as_ref)
    }

    /// Every keyword of every portfolio.
    pub fn keywords(&self) -> impl Iterator<Item = &str> + '_ {
        self.iter()
            .flat_map(|p| p.entries().iter().map(|e| e.keyword.as_str()))
    }
}
