//! Attacker models run against an in-process authentication service, with
//! the closed-form success rates they should reproduce.
//!
//! Desk-scale profiles (`k4m2`, `k9m3`, ...) are simulated; full-scale
//! configurations are reported analytically because `26^-6` cannot be
//! observed by sampling.

pub mod arena;
pub mod engine;
pub mod models;
pub mod probe;
pub mod profile;
pub mod report;
pub mod stats;

pub use models::{
    exhaustive_guess_oracle, keylogger_advantage, phishing_portfolio_guess,
    simulate_keylogger_replay, simulate_random_guesser, simulate_screen_observer, AdvantageReport,
    Observation, OracleReport,
};
pub use probe::{feedback_leak_probe, mapping_uniformity, FeedbackProbeReport, MappingUniformity};
pub use profile::DeskProfile;
pub use report::AttackReport;

use cuedr_core::pack::PackError;
use cuedr_core::store::StoreError;
use cuedr_core::SchemeError;
use cuedr_service::ServiceError;

#[derive(Debug, thiserror::Error)]
pub enum AttackError {
    #[error("invalid run: {0}")]
    Invalid(String),
    #[error("service: {0}")]
    Service(#[from] ServiceError),
    #[error("scheme: {0}")]
    Scheme(#[from] SchemeError),
    #[error("store: {0}")]
    Store(#[from] StoreError),
    #[error("fixture pack: {0}")]
    Pack(#[from] PackError),
    #[error("simulation invariant broken: {0}")]
    Invariant(String),
}
