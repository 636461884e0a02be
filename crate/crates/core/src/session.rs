//! Registration and login state machines.
//!
//! Registration walks the assigned credential one portfolio at a time and
//! refuses to advance until the typed key selects the assigned keyword.
//! Login advances on every key: the next portfolio comes from the feedback
//! chain over whatever keyword was selected, and correctness is only decided
//! by [`Engine::finalize_login`] once all `m` entries are in.

use std::sync::Arc;

use rand::CryptoRng;
use serde::Serialize;

use crate::assign::{assign_credential, AssignedCredential};
use crate::config::SchemeConfig;
use crate::error::SchemeError;
use crate::feedback::{next_portfolio, FeedbackKeyring};
use crate::keymap::KeyMapping;
use crate::portfolio::{KeywordEntry, Ordinal, Portfolio, PortfolioId, PortfolioSet};
use crate::store::{self, CredentialRecord, UnixMillis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Register,
    Login,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Register => "registration",
            Mode::Login => "login",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    InProgress,
    AwaitingFinalize,
    Succeeded,
    Failed,
    Locked,
}

/// Opaque random session token.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SessionId(String);

impl SessionId {
    pub fn generate<R: CryptoRng + ?Sized>(rng: &mut R) -> Self {
        let mut raw = [0u8; 32];
        rng.fill_bytes(&mut raw);
        Self(hex::encode(raw))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<String> for SessionId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl std::fmt::Debug for SessionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SessionId({}…)", &self.0[..self.0.len().min(8)])
    }
}

/// One portfolio render: which portfolio, at which step, with which key
/// bindings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Challenge {
    pub step: usize,
    pub portfolio_id: PortfolioId,
    pub mapping: KeyMapping,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Next(Challenge),
    /// Registration only: the key did not select the assigned keyword.
    Mismatch {
        step: usize,
    },
    /// Login only: every entry is recorded.
    AwaitingFinalize,
    /// Registration only: every assigned keyword confirmed.
    Registered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FinalizeOutcome {
    pub authenticated: bool,
    pub locked: bool,
}

pub struct AuthSession {
    id: SessionId,
    user_id: String,
    mode: Mode,
    key_version: u32,
    step: usize,
    visited: Vec<PortfolioId>,
    mapping: KeyMapping,
    entered: Vec<Ordinal>,
    status: SessionStatus,
    assigned: Option<AssignedCredential>,
}

impl AuthSession {
    pub fn id(&self) -> &SessionId {
        &self.id
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn current_portfolio_id(&self) -> &PortfolioId {
        self.visited
            .last()
            .expect("a session always has a current portfolio")
    }

    /// Portfolios shown so far, in order.
    pub fn visited(&self) -> &[PortfolioId] {
        &self.visited
    }

    pub fn entries_recorded(&self) -> usize {
        self.entered.len()
    }

    pub fn current_challenge(&self) -> Challenge {
        Challenge {
            step: self.step,
            portfolio_id: self.current_portfolio_id().clone(),
            mapping: self.mapping.clone(),
        }
    }
}

impl std::fmt::Debug for AuthSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuthSession")
            .field("id", &self.id)
            .field("user_id", &self.user_id)
            .field("mode", &self.mode)
            .field("step", &self.step)
            .field("status", &self.status)
            .finish_non_exhaustive()
    }
}

/// The scheme engine: configuration, portfolios and feedback keys. Pure
/// given its inputs and randomness; safe to share across threads.
#[derive(Debug, Clone)]
pub struct Engine {
    config: SchemeConfig,
    set: Arc<PortfolioSet>,
    keyring: FeedbackKeyring,
}

impl Engine {
    pub fn new(
        config: SchemeConfig,
        set: Arc<PortfolioSet>,
        keyring: FeedbackKeyring,
    ) -> Result<Self, SchemeError> {
        config.validate_for(set.len(), set.keywords_per_portfolio())?;
        Ok(Self {
            config,
            set,
            keyring,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn portfolios(&self) -> &Arc<PortfolioSet> {
        &self.set
    }

    pub fn keyring(&self) -> &FeedbackKeyring {
        &self.keyring
    }

    pub fn portfolio(&self, id: &PortfolioId) -> Result<&Portfolio, SchemeError> {
        self.set.portfolio(id)
    }

    pub fn assign<R: CryptoRng + ?Sized>(
        &self,
        user_id: &str,
        rng: &mut R,
    ) -> Result<AssignedCredential, SchemeError> {
        assign_credential(
            user_id,
            &self.set,
            &self.config,
            self.keyring.current(),
            rng,
        )
    }

    pub fn start_registration<R: CryptoRng + ?Sized>(
        &self,
        assigned: AssignedCredential,
        rng: &mut R,
    ) -> (AuthSession, Challenge) {
        let session = AuthSession {
            id: SessionId::generate(rng),
            user_id: assigned.user_id().to_owned(),
            mode: Mode::Register,
            key_version: assigned.key_version(),
            step: 0,
            visited: vec![assigned.first_portfolio_id().clone()],
            mapping: KeyMapping::sample(&self.config.alphabet, rng),
            entered: Vec::new(),
            status: SessionStatus::InProgress,
            assigned: Some(assigned),
        };
        let challenge = session.current_challenge();
        (session, challenge)
    }

    /// Opens a login session at the record's first portfolio.
    pub fn start_login<R: CryptoRng + ?Sized>(
        &self,
        record: &CredentialRecord,
        now: UnixMillis,
        rng: &mut R,
    ) -> Result<(AuthSession, Challenge), SchemeError> {
        if record.is_locked(now) {
            return Err(SchemeError::LockedOut);
        }
        self.keyring.get(record.prf_key_version)?;
        self.set.portfolio(&record.first_portfolio_id)?;
        let session = AuthSession {
            id: SessionId::generate(rng),
            user_id: record.user_id.clone(),
            mode: Mode::Login,
            key_version: record.prf_key_version,
            step: 0,
            visited: vec![record.first_portfolio_id.clone()],
            mapping: KeyMapping::sample(&self.config.alphabet, rng),
            entered: Vec::new(),
            status: SessionStatus::InProgress,
            assigned: None,
        };
        let challenge = session.current_challenge();
        Ok((session, challenge))
    }

    /// Same amount of work as [`Engine::start_login`] without producing a
    /// session. Used for unknown users.
    pub fn decoy_start<R: CryptoRng + ?Sized>(&self, user_id: &str, rng: &mut R) {
        let first = self.set.ids().next().expect("set is non-empty").clone();
        let mapping = KeyMapping::sample(&self.config.alphabet, rng);
        let id = SessionId::generate(rng);
        let probe = next_portfolio(
            self.keyring.current(),
            user_id,
            &first,
            Ordinal::from_index(0),
            std::slice::from_ref(&first),
            &self.set,
        );
        let _ = std::hint::black_box((mapping, id, probe));
    }

    /// The assigned keyword for the current registration step, with all of
    /// its cues.
    pub fn study<'a>(&'a self, session: &AuthSession) -> Result<&'a KeywordEntry, SchemeError> {
        let assigned = session
            .assigned
            .as_ref()
            .ok_or(SchemeError::WrongMode(session.mode.name()))?;
        if session.status != SessionStatus::InProgress {
            return Err(SchemeError::SessionClosed);
        }
        let step = &assigned.steps()[session.step];
        self.set
            .portfolio(&step.portfolio_id)?
            .entry(step.ordinal)
            .ok_or_else(|| SchemeError::UnknownPortfolio(step.portfolio_id.clone()))
    }

    pub fn submit_key<R: CryptoRng + ?Sized>(
        &self,
        session: &mut AuthSession,
        symbol: char,
        rng: &mut R,
    ) -> Result<StepOutcome, SchemeError> {
        if session.status != SessionStatus::InProgress {
            return Err(SchemeError::SessionClosed);
        }
        let ordinal = session
            .mapping
            .ordinal_for(symbol)
            .ok_or(SchemeError::InvalidSymbol)?;
        let m = self.config.sequence_length;
        match session.mode {
            Mode::Login => {
                session.entered.push(ordinal);
                if session.entered.len() == m {
                    session.status = SessionStatus::AwaitingFinalize;
                    return Ok(StepOutcome::AwaitingFinalize);
                }
                let key = self.keyring.get(session.key_version)?;
                let next = next_portfolio(
                    key,
                    &session.user_id,
                    session.current_portfolio_id(),
                    ordinal,
                    &session.visited,
                    &self.set,
                )?;
                Ok(StepOutcome::Next(self.advance(session, next, rng)))
            }
            Mode::Register => {
                let assigned = session
                    .assigned
                    .as_ref()
                    .expect("registration carries its credential");
                if assigned.steps()[session.step].ordinal != ordinal {
                    return Ok(StepOutcome::Mismatch { step: session.step });
                }
                session.entered.push(ordinal);
                if session.entered.len() == m {
                    session.status = SessionStatus::Succeeded;
                    return Ok(StepOutcome::Registered);
                }
                let next = assigned.steps()[session.step + 1].portfolio_id.clone();
                Ok(StepOutcome::Next(self.advance(session, next, rng)))
            }
        }
    }

    fn advance<R: CryptoRng + ?Sized>(
        &self,
        session: &mut AuthSession,
        next: PortfolioId,
        rng: &mut R,
    ) -> Challenge {
        debug_assert!(!session.visited.contains(&next));
        session.visited.push(next);
        session.step += 1;
        session.mapping = KeyMapping::sample(&self.config.alphabet, rng);
        session.current_challenge()
    }

    /// Builds the persisted record for a completed registration. The
    /// plaintext assignment is dropped with the session.
    pub fn complete_registration<R: CryptoRng + ?Sized>(
        &self,
        session: &AuthSession,
        rng: &mut R,
    ) -> Result<CredentialRecord, SchemeError> {
        let assigned = session
            .assigned
            .as_ref()
            .ok_or(SchemeError::WrongMode(session.mode.name()))?;
        if session.status != SessionStatus::Succeeded {
            return Err(SchemeError::NotReady {
                entered: session.entered.len(),
                required: self.config.sequence_length,
            });
        }
        let keywords: Vec<&str> = assigned
            .entries(&self.set)?
            .into_iter()
            .map(|e| e.keyword.as_str())
            .collect();
        let salt = store::generate_salt(rng);
        let verifier =
            store::derive_verifier(&keywords, &salt, &self.config.kdf, &self.config.kdf_floor)?;
        Ok(CredentialRecord {
            user_id: assigned.user_id().to_owned(),
            first_portfolio_id: assigned.first_portfolio_id().clone(),
            salt,
            verifier,
            kdf: self.config.kdf,
            prf_key_version: assigned.key_version(),
            failure_count: 0,
            lockout_level: 0,
            locked_until: None,
        })
    }

    /// Checks the recorded entries against the verifier and updates the
    /// lockout counters. The slow hash always runs over the full entered
    /// sequence, whichever step (if any) was wrong.
    pub fn finalize_login(
        &self,
        session: &mut AuthSession,
        record: &mut CredentialRecord,
        now: UnixMillis,
    ) -> Result<FinalizeOutcome, SchemeError> {
        let matched = self.verify_login(session, record)?;
        self.settle_login(session, record, matched, now)
    }

    /// The verification half of [`Engine::finalize_login`]: runs the slow
    /// hash without touching any state. Lets callers keep the hash outside
    /// their per-user storage lock.
    pub fn verify_login(
        &self,
        session: &AuthSession,
        record: &CredentialRecord,
    ) -> Result<bool, SchemeError> {
        if session.mode != Mode::Login {
            return Err(SchemeError::WrongMode(session.mode.name()));
        }
        match session.status {
            SessionStatus::AwaitingFinalize => {}
            SessionStatus::InProgress => {
                return Err(SchemeError::NotReady {
                    entered: session.entered.len(),
                    required: self.config.sequence_length,
                })
            }
            _ => return Err(SchemeError::SessionClosed),
        }
        if session.user_id != record.user_id {
            return Err(SchemeError::RecordMismatch);
        }
        let keywords = session
            .visited
            .iter()
            .zip(&session.entered)
            .map(|(pid, &ord)| {
                self.set
                    .portfolio(pid)?
                    .entry(ord)
                    .map(|e| e.keyword.as_str())
                    .ok_or_else(|| SchemeError::UnknownPortfolio(pid.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(store::verify(&keywords, record)?)
    }

    /// The accounting half of [`Engine::finalize_login`]. A match while the
    /// account is locked still counts as a failure.
    pub fn settle_login(
        &self,
        session: &mut AuthSession,
        record: &mut CredentialRecord,
        matched: bool,
        now: UnixMillis,
    ) -> Result<FinalizeOutcome, SchemeError> {
        if session.mode != Mode::Login {
            return Err(SchemeError::WrongMode(session.mode.name()));
        }
        if session.status != SessionStatus::AwaitingFinalize {
            return Err(SchemeError::SessionClosed);
        }
        if matched && !record.is_locked(now) {
            record.record_success();
            session.status = SessionStatus::Succeeded;
        } else {
            record.record_failure(&self.config.lockout, now);
            session.status = if record.is_locked(now) {
                SessionStatus::Locked
            } else {
                SessionStatus::Failed
            };
        }
        Ok(FinalizeOutcome {
            authenticated: session.status == SessionStatus::Succeeded,
            locked: session.status == SessionStatus::Locked,
        })
    }
}
