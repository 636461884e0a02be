//! Cued-recognition authentication.
//!
//! A user's secret is a sequence of `m` keywords, one from each of `m`
//! portfolios of `k` captioned images. Each screen assigns a fresh random
//! letter to every keyword; the user types the letter shown beside their
//! keyword. The portfolio shown next is a keyed function of the keyword just
//! chosen, so a wrong choice silently diverges onto a different path.

pub mod assign;
pub mod config;
pub mod entropy;
pub mod error;
pub mod feedback;
pub mod keymap;
pub mod pack;
pub mod portfolio;
pub mod session;
pub mod store;

pub use assign::{assign_credential, AssignedCredential, CredentialStep};
pub use config::{Profile, SchemeConfig};
pub use error::{CredentialError, SchemeError};
pub use feedback::{next_portfolio, walk_chain, FeedbackKey, FeedbackKeyring, KeyringFile};
pub use keymap::{sample_key_mapping, KeyMapping};
pub use portfolio::{KeywordEntry, Ordinal, Portfolio, PortfolioId, PortfolioSet};
pub use session::{
    AuthSession, Challenge, Engine, FinalizeOutcome, Mode, SessionId, SessionStatus, StepOutcome,
};
pub use store::{CredentialRecord, CredentialStore, StoreError};
