//! An in-process [`AuthService`] with victims and attackers driving it
//! through its public operations.

use std::sync::Arc;

use cuedr_core::pack::LoadedPack;
use cuedr_core::store::MemoryStore;
use cuedr_core::{FeedbackKey, FeedbackKeyring};
use cuedr_service::config::RateLimitConfig;
use cuedr_service::{
    AuthService, ChallengeView, ManualClock, ServiceError, ServiceSettings, StepView,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::profile::DeskProfile;
use crate::AttackError;

const ENROLLMENT_TOKEN: &str = "arena-enrollment-token";
const ADMIN_TOKEN: &str = "arena-administrator-token";
const START_MILLIS: u64 = 1_700_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    Rejected,
    /// The account was locked before the attempt could start.
    Locked,
}

/// What a login attempt looked like from the client side: every render and
/// the key typed on it.
pub struct Attempt {
    pub outcome: Outcome,
    pub transcript: Vec<(ChallengeView, char)>,
}

pub struct Arena {
    service: AuthService,
    store: Arc<MemoryStore>,
    pub clock: Arc<ManualClock>,
}

impl Arena {
    /// A fresh service with its own feedback key, seeded from `rng`.
    pub fn new(
        profile: &DeskProfile,
        pack: &LoadedPack,
        rng: &mut ChaCha20Rng,
    ) -> Result<Self, AttackError> {
        let keyring = FeedbackKeyring::single(FeedbackKey::generate(1, rng));
        let service_rng = ChaCha20Rng::from_rng(rng);
        Self::with_parts(
            profile,
            pack,
            keyring,
            Arc::new(MemoryStore::new()),
            service_rng,
        )
    }

    pub fn with_parts(
        profile: &DeskProfile,
        pack: &LoadedPack,
        keyring: FeedbackKeyring,
        store: Arc<MemoryStore>,
        service_rng: ChaCha20Rng,
    ) -> Result<Self, AttackError> {
        let clock = Arc::new(ManualClock::new(START_MILLIS));
        let settings = ServiceSettings {
            enrollment_token: ENROLLMENT_TOKEN.into(),
            admin_token: ADMIN_TOKEN.into(),
            session_ttl_secs: 3600,
            rate_limit: RateLimitConfig {
                per_source_per_minute: 0,
                per_user_per_minute: 0,
            },
            uploaded_packs_dir: None,
        };
        let service = AuthService::new(
            settings,
            profile.scheme(),
            keyring,
            pack.clone(),
            store.clone(),
            clock.clone(),
            service_rng,
        )?;
        Ok(Self {
            service,
            store,
            clock,
        })
    }

    pub fn service(&self) -> &AuthService {
        &self.service
    }

    pub fn store(&self) -> &Arc<MemoryStore> {
        &self.store
    }

    /// Registers `user` the way a legitimate user would and returns the
    /// keywords they studied, in order.
    pub fn enroll(&self, user: &str) -> Result<Vec<String>, AttackError> {
        let mut view = self.service.register_start(Some(ENROLLMENT_TOKEN), user)?;
        let mut keywords = Vec::new();
        loop {
            let study = self.service.register_study(&view.session_id)?;
            let key = view
                .key_for(&study.keyword)
                .ok_or_else(|| AttackError::Invariant("studied keyword not on screen".into()))?;
            keywords.push(study.keyword);
            match self
                .service
                .register_key(&view.session_id, &key.to_string())?
            {
                StepView::Challenge { challenge } => view = challenge,
                StepView::Registered { .. } => return Ok(keywords),
                StepView::AwaitingFinalize { .. } => {
                    return Err(AttackError::Invariant(
                        "registration asked for finalize".into(),
                    ))
                }
            }
        }
    }

    /// Portfolios shown during the first `depth` registration steps.
    pub fn enroll_prefix(&self, user: &str, depth: usize) -> Result<Vec<String>, AttackError> {
        let mut view = self.service.register_start(Some(ENROLLMENT_TOKEN), user)?;
        let mut shown = vec![view.portfolio.id.clone()];
        while shown.len() < depth {
            let study = self.service.register_study(&view.session_id)?;
            let key = view
                .key_for(&study.keyword)
                .expect("studied keyword on screen");
            match self
                .service
                .register_key(&view.session_id, &key.to_string())?
            {
                StepView::Challenge { challenge } => {
                    shown.push(challenge.portfolio.id.clone());
                    view = challenge;
                }
                _ => {
                    return Err(AttackError::Invariant(
                        "depth exceeds sequence length".into(),
                    ))
                }
            }
        }
        Ok(shown)
    }

    /// One login attempt; `choose(step, render)` picks the key to type.
    pub fn attempt(
        &self,
        user: &str,
        mut choose: impl FnMut(usize, &ChallengeView) -> char,
    ) -> Result<Attempt, AttackError> {
        let mut view = match self.service.login_start(user, None) {
            Ok(v) => v,
            Err(ServiceError::Locked { .. }) => {
                return Ok(Attempt {
                    outcome: Outcome::Locked,
                    transcript: Vec::new(),
                })
            }
            Err(e) => return Err(e.into()),
        };
        let session = view.session_id.clone();
        let mut transcript = Vec::new();
        loop {
            let key = choose(transcript.len(), &view);
            let next = self.service.login_key(&session, &key.to_string())?;
            transcript.push((view, key));
            match next {
                StepView::Challenge { challenge } => view = challenge,
                StepView::AwaitingFinalize { .. } => break,
                StepView::Registered { .. } => {
                    return Err(AttackError::Invariant(
                        "login step reported registration".into(),
                    ))
                }
            }
        }
        let outcome = match self.service.login_finalize(&session) {
            Ok(v) if v.authenticated => Outcome::Accepted,
            Ok(_) | Err(ServiceError::AuthenticationFailed { .. }) => Outcome::Rejected,
            Err(e) => return Err(e.into()),
        };
        Ok(Attempt {
            outcome,
            transcript,
        })
    }

    /// A login by the legitimate user, who recognises each keyword on screen.
    pub fn legitimate_login(
        &self,
        user: &str,
        keywords: &[String],
    ) -> Result<Attempt, AttackError> {
        let attempt = self.attempt(user, |step, view| {
            view.key_for(&keywords[step])
                .unwrap_or_else(|| view.portfolio.entries[0].key.chars().next().expect("key"))
        })?;
        if attempt.outcome != Outcome::Accepted {
            return Err(AttackError::Invariant(
                "legitimate login was not accepted".into(),
            ));
        }
        Ok(attempt)
    }
}
