use rand::{CryptoRng, Rng};

use crate::config::SchemeConfig;
use crate::error::SchemeError;
use crate::feedback::{next_portfolio, FeedbackKey};
use crate::portfolio::{KeywordEntry, Ordinal, PortfolioId, PortfolioSet};

#[derive(Clone, PartialEq, Eq)]
pub struct CredentialStep {
    pub portfolio_id: PortfolioId,
    pub ordinal: Ordinal,
}

/// A freshly assigned secret. Only lives for the duration of a registration
/// session; the store keeps a verifier, never this.
#[derive(Clone, PartialEq, Eq)]
pub struct AssignedCredential {
    user_id: String,
    key_version: u32,
    steps: Vec<CredentialStep>,
}

impl AssignedCredential {
    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn key_version(&self) -> u32 {
        self.key_version
    }

    pub fn first_portfolio_id(&self) -> &PortfolioId {
        &self.steps[0].portfolio_id
    }

    pub fn steps(&self) -> &[CredentialStep] {
        &self.steps
    }

    pub fn ordinals(&self) -> Vec<Ordinal> {
        self.steps.iter().map(|s| s.ordinal).collect()
    }

    pub fn portfolio_ids(&self) -> Vec<PortfolioId> {
        self.steps.iter().map(|s| s.portfolio_id.clone()).collect()
    }

    pub fn entries<'a>(&self, set: &'a PortfolioSet) -> Result<Vec<&'a KeywordEntry>, SchemeError> {
        self.steps
            .iter()
            .map(|s| {
                set.portfolio(&s.portfolio_id)?
                    .entry(s.ordinal)
                    .ok_or_else(|| SchemeError::UnknownPortfolio(s.portfolio_id.clone()))
            })
            .collect()
    }
}

impl std::fmt::Debug for AssignedCredential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AssignedCredential")
            .field("user_id", &self.user_id)
            .field("steps", &self.steps.len())
            .finish_non_exhaustive()
    }
}

/// Assigns a random credential: a uniform first portfolio, a uniform keyword
/// on each portfolio, and the following portfolios taken from the feedback
/// chain over those keywords. The chain never revisits a portfolio, so the
/// `m` portfolios are drawn without replacement.
pub fn assign_credential<R: CryptoRng + ?Sized>(
    user_id: &str,
    set: &PortfolioSet,
    config: &SchemeConfig,
    key: &FeedbackKey,
    rng: &mut R,
) -> Result<AssignedCredential, SchemeError> {
    let m = config.sequence_length;
    if set.len() < m {
        return Err(SchemeError::InsufficientPortfolios {
            available: set.len(),
            required: m,
        });
    }
    let k = set.keywords_per_portfolio();
    let first_index = rng.random_range(0..set.len());
    let first = set.ids().nth(first_index).expect("index below len").clone();

    let mut visited = vec![first];
    let mut steps = Vec::with_capacity(m);
    for i in 0..m {
        let ordinal = Ordinal::from_index(rng.random_range(0..k));
        let current = visited[i].clone();
        if i + 1 < m {
            let next = next_portfolio(key, user_id, &current, ordinal, &visited, set)?;
            visited.push(next);
        }
        steps.push(CredentialStep {
            portfolio_id: current,
            ordinal,
        });
    }
    Ok(AssignedCredential {
        user_id: user_id.to_owned(),
        key_version: key.version(),
        steps,
    })
}
