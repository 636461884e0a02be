use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::Serialize;

use super::{PackBundle, PackError};

pub const FACT_MAX_CHARS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "code", rename_all = "kebab-case")]
pub enum Diagnostic {
    ManifestUnreadable {
        detail: String,
    },
    TooFewPortfolios {
        found: usize,
        required: usize,
    },
    InvalidPortfolioId {
        portfolio: String,
    },
    DuplicatePortfolioId {
        portfolio: String,
    },
    EmptyCategory {
        portfolio: String,
    },
    WrongEntryCount {
        portfolio: String,
        found: usize,
        expected: usize,
    },
    OrdinalOutOfRange {
        portfolio: String,
        ordinal: u32,
        max: usize,
    },
    DuplicateOrdinal {
        portfolio: String,
        ordinal: u32,
    },
    MissingOrdinal {
        portfolio: String,
        ordinal: u32,
    },
    InvalidKeyword {
        portfolio: String,
        ordinal: u32,
        keyword: String,
    },
    DuplicateKeyword {
        portfolio: String,
        keyword: String,
    },
    EmptyFact {
        portfolio: String,
        ordinal: u32,
    },
    FactTooLong {
        portfolio: String,
        ordinal: u32,
        chars: usize,
        max: usize,
    },
    InvalidImageName {
        portfolio: String,
        ordinal: u32,
        file: String,
    },
    MissingImage {
        portfolio: String,
        ordinal: u32,
        file: String,
    },
    UndecodableImage {
        portfolio: String,
        ordinal: u32,
        file: String,
        detail: String,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Diagnostic::*;
        match self {
            ManifestUnreadable { detail } => write!(f, "manifest unreadable: {detail}"),
            TooFewPortfolios { found, required } => {
                write!(f, "pack has {found} portfolios, at least {required} required")
            }
            InvalidPortfolioId { portfolio } => write!(f, "portfolio id {portfolio:?} is not [A-Za-z0-9._-]+"),
            DuplicatePortfolioId { portfolio } => write!(f, "portfolio id {portfolio:?} used twice"),
            EmptyCategory { portfolio } => write!(f, "{portfolio}: empty category"),
            WrongEntryCount { portfolio, found, expected } => {
                write!(f, "{portfolio}: {found} keywords, expected {expected}")
            }
            OrdinalOutOfRange { portfolio, ordinal, max } => {
                write!(f, "{portfolio}: ordinal {ordinal} outside 1..={max}")
            }
            DuplicateOrdinal { portfolio, ordinal } => write!(f, "{portfolio}: duplicate ordinal {ordinal}"),
            MissingOrdinal { portfolio, ordinal } => write!(f, "{portfolio}: ordinal {ordinal} missing"),
            InvalidKeyword { portfolio, ordinal, keyword } => write!(
                f,
                "{portfolio}: keyword {keyword:?} at ordinal {ordinal} must be letters, spaces or hyphens"
            ),
            DuplicateKeyword { portfolio, keyword } => write!(f, "{portfolio}: keyword {keyword:?} repeated"),
            EmptyFact { portfolio, ordinal } => write!(f, "{portfolio}: empty fact at ordinal {ordinal}"),
            FactTooLong { portfolio, ordinal, chars, max } => {
                write!(f, "{portfolio}: fact at ordinal {ordinal} is {chars} chars (max {max})")
            }
            InvalidImageName { portfolio, ordinal, file } => {
                write!(f, "{portfolio}: image name {file:?} at ordinal {ordinal} is not a plain file name")
            }
            MissingImage { portfolio, ordinal, file } => {
                write!(f, "{portfolio}: image {file} for ordinal {ordinal} not found")
            }
            UndecodableImage { portfolio, ordinal, file, detail } => {
                write!(f, "{portfolio}: image {file} for ordinal {ordinal} cannot be decoded: {detail}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub portfolios: usize,
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

pub(crate) fn is_safe_file_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && !name.contains(['/', '\\'])
        && !name.chars().any(char::is_control)
}

fn valid_portfolio_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// Keywords are letters, spaces and hyphens, with at least one letter. This
/// keeps the canonical-secret separator out of every keyword.
fn valid_keyword(kw: &str) -> bool {
    kw.chars().any(char::is_alphabetic)
        && kw
            .chars()
            .all(|c| c.is_alphabetic() || c == ' ' || c == '-')
        && kw.trim() == kw
}

/// Checks every pack invariant. Pure function of the bundle contents.
pub fn validate(
    bundle: &PackBundle,
    keywords_per_portfolio: usize,
    min_portfolios: usize,
) -> ValidationReport {
    let k = keywords_per_portfolio;
    let manifest = &bundle.manifest;
    let mut out = Vec::new();

    if manifest.portfolios.len() < min_portfolios {
        out.push(Diagnostic::TooFewPortfolios {
            found: manifest.portfolios.len(),
            required: min_portfolios,
        });
    }

    let mut ids = BTreeSet::new();
    let mut decoded: BTreeMap<&str, Result<(), String>> = BTreeMap::new();
    for p in &manifest.portfolios {
        let pid = p.id.clone();
        if !valid_portfolio_id(&p.id) {
            out.push(Diagnostic::InvalidPortfolioId {
                portfolio: pid.clone(),
            });
        }
        if !ids.insert(p.id.as_str()) {
            out.push(Diagnostic::DuplicatePortfolioId {
                portfolio: pid.clone(),
            });
        }
        if p.category.trim().is_empty() {
            out.push(Diagnostic::EmptyCategory {
                portfolio: pid.clone(),
            });
        }
        if p.entries.len() != k {
            out.push(Diagnostic::WrongEntryCount {
                portfolio: pid.clone(),
                found: p.entries.len(),
                expected: k,
            });
        }

        let mut ordinals = BTreeSet::new();
        let mut keywords = BTreeSet::new();
        for e in &p.entries {
            let ordinal = e.ordinal;
            if ordinal == 0 || ordinal as usize > k {
                out.push(Diagnostic::OrdinalOutOfRange {
                    portfolio: pid.clone(),
                    ordinal,
                    max: k,
                });
            } else if !ordinals.insert(ordinal) {
                out.push(Diagnostic::DuplicateOrdinal {
                    portfolio: pid.clone(),
                    ordinal,
                });
            }
            if !valid_keyword(&e.keyword) {
                out.push(Diagnostic::InvalidKeyword {
                    portfolio: pid.clone(),
                    ordinal,
                    keyword: e.keyword.clone(),
                });
            }
            if !keywords.insert(e.keyword.to_lowercase()) {
                out.push(Diagnostic::DuplicateKeyword {
                    portfolio: pid.clone(),
                    keyword: e.keyword.clone(),
                });
            }
            let chars = e.fact.chars().count();
            if e.fact.trim().is_empty() {
                out.push(Diagnostic::EmptyFact {
                    portfolio: pid.clone(),
                    ordinal,
                });
            } else if chars > FACT_MAX_CHARS {
                out.push(Diagnostic::FactTooLong {
                    portfolio: pid.clone(),
                    ordinal,
                    chars,
                    max: FACT_MAX_CHARS,
                });
            }
            if !is_safe_file_name(&e.image) {
                out.push(Diagnostic::InvalidImageName {
                    portfolio: pid.clone(),
                    ordinal,
                    file: e.image.clone(),
                });
                continue;
            }
            match bundle.images.get(&e.image) {
                None => out.push(Diagnostic::MissingImage {
                    portfolio: pid.clone(),
                    ordinal,
                    file: e.image.clone(),
                }),
                Some(bytes) => {
                    let result = decoded.entry(e.image.as_str()).or_insert_with(|| {
                        image::load_from_memory(bytes)
                            .map(drop)
                            .map_err(|err| err.to_string())
                    });
                    if let Err(detail) = result {
                        out.push(Diagnostic::UndecodableImage {
                            portfolio: pid.clone(),
                            ordinal,
                            file: e.image.clone(),
                            detail: detail.clone(),
                        });
                    }
                }
            }
        }
        for ordinal in 1..=k as u32 {
            if !ordinals.contains(&ordinal) {
                out.push(Diagnostic::MissingOrdinal {
                    portfolio: pid.clone(),
                    ordinal,
                });
            }
        }
    }

    ValidationReport {
        portfolios: manifest.portfolios.len(),
        diagnostics: out,
    }
}

/// Loads and validates a pack directory. Unreadable manifests become a
/// diagnostic rather than an error.
pub fn validate_dir(
    dir: impl AsRef<Path>,
    keywords_per_portfolio: usize,
    min_portfolios: usize,
) -> ValidationReport {
    match PackBundle::load_dir(dir) {
        Ok(bundle) => validate(&bundle, keywords_per_portfolio, min_portfolios),
        Err(e) => {
            let detail = match e {
                PackError::Manifest(m) => m,
                other => other.to_string(),
            };
            ValidationReport {
                portfolios: 0,
                diagnostics: vec![Diagnostic::ManifestUnreadable { detail }],
            }
        }
    }
}
