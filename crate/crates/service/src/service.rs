//! Transport-independent registration and login flows.
//!
//! Sessions live in memory behind opaque tokens. Each session holds its own
//! lock and a request that finds it held gets [`ServiceError::SessionBusy`]
//! rather than waiting, so one session never has two mutations in flight.
//! Sessions pin the pack they started on; uploading a new pack only affects
//! sessions started afterwards.

use std::collections::HashMap;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, TryLockError};

use base64::Engine as _;
use cuedr_core::pack::{Asset, Diagnostic, LoadedPack, PackBundle, PackError, PackManifest};
use cuedr_core::store::{CredentialStore, FileStore, UnixMillis};
use cuedr_core::{
    AuthSession, Challenge, Engine, FeedbackKeyring, Mode, SchemeConfig, StepOutcome,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use tracing::{debug, info, warn};

use crate::clock::{Clock, SystemClock};
use crate::config::{load_or_create_keyring, ConfigError, RateLimitConfig, ServiceConfig};
use crate::error::ServiceError;
use crate::limiter::RateLimiter;
use crate::views::{
    ChallengeView, FinalizeView, HealthView, PackInfo, PackUpload, StepView, StudyView,
};

const SWEEP_INTERVAL_MILLIS: u64 = 10_000;
const MAX_USER_ID_CHARS: usize = 64;

#[derive(Debug, Clone)]
pub struct ServiceSettings {
    pub enrollment_token: String,
    pub admin_token: String,
    pub session_ttl_secs: u64,
    pub rate_limit: RateLimitConfig,
    pub uploaded_packs_dir: Option<PathBuf>,
}

struct ActivePack {
    version: u64,
    manifest_version: u64,
    engine: Arc<Engine>,
}

struct SessionSlot {
    mode: Mode,
    session: Mutex<AuthSession>,
    pack: Arc<ActivePack>,
    expires_at: UnixMillis,
}

pub struct AuthService {
    settings: ServiceSettings,
    scheme: SchemeConfig,
    keyring: FeedbackKeyring,
    active: RwLock<Arc<ActivePack>>,
    assets: RwLock<HashMap<String, Asset>>,
    store: Arc<dyn CredentialStore>,
    clock: Arc<dyn Clock>,
    rng: Mutex<ChaCha20Rng>,
    sessions: Mutex<HashMap<String, Arc<SessionSlot>>>,
    next_sweep: AtomicU64,
    per_source: RateLimiter,
    per_user: RateLimiter,
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("pack {path}: {source}")]
    Pack { path: PathBuf, source: PackError },
    #[error("credential store {path}: {source}")]
    Store {
        path: PathBuf,
        source: cuedr_core::store::StoreError,
    },
    #[error(transparent)]
    Service(#[from] ServiceError),
}

impl AuthService {
    pub fn new(
        settings: ServiceSettings,
        scheme: SchemeConfig,
        keyring: FeedbackKeyring,
        pack: LoadedPack,
        store: Arc<dyn CredentialStore>,
        clock: Arc<dyn Clock>,
        rng: ChaCha20Rng,
    ) -> Result<Self, ServiceError> {
        let engine = Engine::new(scheme.clone(), Arc::new(pack.set), keyring.clone())?;
        let active = ActivePack {
            version: 1,
            manifest_version: pack.version,
            engine: Arc::new(engine),
        };
        Ok(Self {
            per_source: RateLimiter::per_minute(settings.rate_limit.per_source_per_minute),
            per_user: RateLimiter::per_minute(settings.rate_limit.per_user_per_minute),
            settings,
            scheme,
            keyring,
            active: RwLock::new(Arc::new(active)),
            assets: RwLock::new(pack.assets.into_iter().collect()),
            store,
            clock,
            rng: Mutex::new(rng),
            sessions: Mutex::new(HashMap::new()),
            next_sweep: AtomicU64::new(0),
        })
    }

    /// Builds the production service from configuration: keyring file (created on
    /// first start), newest uploaded pack or `pack_dir`, file-backed store and the
    /// system clock.
    pub fn open(config: &ServiceConfig) -> Result<Self, StartupError> {
        config.validate()?;
        let mut os_rng = rand::rng();
        let keyring = load_or_create_keyring(&config.keyring_path, &mut os_rng)?;
        let scheme = config.scheme_config();
        let pack_path = config
            .uploaded_packs_dir
            .as_deref()
            .and_then(newest_uploaded_pack)
            .unwrap_or_else(|| config.pack_dir.clone());
        let pack = PackBundle::load_dir(&pack_path)
            .and_then(|b| b.build(scheme.keywords_per_portfolio(), scheme.sequence_length))
            .map_err(|source| StartupError::Pack {
                path: pack_path.clone(),
                source,
            })?;
        if let Some(dir) = config
            .store_path
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
        {
            std::fs::create_dir_all(dir).map_err(|e| StartupError::Store {
                path: config.store_path.clone(),
                source: e.into(),
            })?;
        }
        let store = FileStore::open(&config.store_path).map_err(|source| StartupError::Store {
            path: config.store_path.clone(),
            source,
        })?;
        if let Ok(stats) = cuedr_core::store::kdf::bench(&scheme.kdf, 1) {
            if (stats.min_ms as u64) < scheme.kdf_floor.min_verify_millis {
                warn!(
                    measured_ms = stats.min_ms,
                    floor_ms = scheme.kdf_floor.min_verify_millis,
                    "KDF verification is faster than the configured floor"
                );
            }
        }
        info!(pack = %pack_path.display(), portfolios = pack.set.len(), "pack loaded");
        let settings = ServiceSettings {
            enrollment_token: config.enrollment_token.clone(),
            admin_token: config.admin_token.clone(),
            session_ttl_secs: config.session_ttl_secs,
            rate_limit: config.rate_limit,
            uploaded_packs_dir: config.uploaded_packs_dir.clone(),
        };
        let rng = ChaCha20Rng::from_rng(&mut os_rng);
        Ok(Self::new(
            settings,
            scheme,
            keyring,
            pack,
            Arc::new(store),
            Arc::new(SystemClock),
            rng,
        )?)
    }

    pub fn scheme(&self) -> &SchemeConfig {
        &self.scheme
    }

    pub fn store(&self) -> &Arc<dyn CredentialStore> {
        &self.store
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    fn active(&self) -> Arc<ActivePack> {
        Arc::clone(&self.active.read().expect("pack lock poisoned"))
    }

    /// A private generator for work that may take a while, so the shared
    /// one is never held across a slow hash.
    fn fork_rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::from_rng(&mut *self.rng.lock().expect("rng poisoned"))
    }

    // ---- registration ----------------------------------------------------

    pub fn register_start(
        &self,
        bearer: Option<&str>,
        user_id: &str,
    ) -> Result<ChallengeView, ServiceError> {
        if !token_matches(&self.settings.enrollment_token, bearer) {
            return Err(ServiceError::Unauthorized);
        }
        check_user_id(user_id)?;
        if self.store.load(user_id)?.is_some() {
            return Err(ServiceError::UserExists);
        }
        let pack = self.active();
        let mut rng = self.fork_rng();
        let assigned = pack.engine.assign(user_id, &mut rng)?;
        let (session, challenge) = pack.engine.start_registration(assigned, &mut rng);
        let view = self.open_session(pack, session, &challenge)?;
        info!(
            user = user_id,
            session = short(&view.session_id),
            "registration started"
        );
        Ok(view)
    }

    pub fn register_study(&self, session_id: &str) -> Result<StudyView, ServiceError> {
        let slot = self.lookup(session_id, Mode::Register)?;
        let session = lock_session(&slot)?;
        let engine = &slot.pack.engine;
        let entry = engine.study(&session)?;
        let portfolio = engine.portfolio(session.current_portfolio_id())?;
        Ok(StudyView::new(
            session_id,
            session.step(),
            engine.config().sequence_length,
            portfolio,
            entry,
        ))
    }

    pub fn register_key(&self, session_id: &str, key: &str) -> Result<StepView, ServiceError> {
        let symbol = parse_key(key)?;
        let slot = self.lookup(session_id, Mode::Register)?;
        let mut session = lock_session(&slot)?;
        let engine = &slot.pack.engine;
        let mut rng = self.fork_rng();
        match engine.submit_key(&mut session, symbol, &mut rng)? {
            StepOutcome::Next(challenge) => {
                debug!(
                    session = short(session_id),
                    step = challenge.step,
                    "registration step confirmed"
                );
                Ok(StepView::Challenge {
                    challenge: self.view(&slot.pack, session_id, Mode::Register, &challenge)?,
                })
            }
            StepOutcome::Mismatch { step } => {
                debug!(
                    session = short(session_id),
                    step, "registration key mismatch"
                );
                Err(ServiceError::WrongKey { step })
            }
            StepOutcome::Registered => {
                let record = engine.complete_registration(&session, &mut rng);
                self.close_session(session_id);
                let user_id = session.user_id().to_owned();
                self.store.insert(record?)?;
                info!(user = %user_id, "registration completed");
                Ok(StepView::Registered { user_id })
            }
            StepOutcome::AwaitingFinalize => Err(ServiceError::Internal(
                "registration awaiting finalize".into(),
            )),
        }
    }

    // ---- login -----------------------------------------------------------

    pub fn login_start(
        &self,
        user_id: &str,
        source: Option<IpAddr>,
    ) -> Result<ChallengeView, ServiceError> {
        check_user_id(user_id)?;
        let now = self.clock.now();
        if let Some(ip) = source {
            let key = ip.to_string();
            if !self.per_source.allow(&key, now) {
                warn!(source = %ip, "login rate limit hit for source");
                return Err(ServiceError::RateLimited {
                    retry_after_secs: self.per_source.retry_after_secs(&key, now),
                });
            }
        }
        if !self.per_user.allow(user_id, now) {
            warn!(user = user_id, "login rate limit hit for user");
            return Err(ServiceError::RateLimited {
                retry_after_secs: self.per_user.retry_after_secs(user_id, now),
            });
        }
        let pack = self.active();
        let Some(record) = self.store.load(user_id)? else {
            let mut rng = self.fork_rng();
            pack.engine.decoy_start(user_id, &mut rng);
            info!(user = user_id, "login start for unknown user");
            return Err(ServiceError::UnknownUser);
        };
        if let Some(until) = record.locked_until.filter(|_| record.is_locked(now)) {
            info!(user = user_id, "login start refused, account locked");
            return Err(ServiceError::Locked {
                retry_after_secs: (until - now).div_ceil(1000),
            });
        }
        let mut rng = self.fork_rng();
        let (session, challenge) = pack.engine.start_login(&record, now, &mut rng)?;
        let view = self.open_session(pack, session, &challenge)?;
        info!(
            user = user_id,
            session = short(&view.session_id),
            "login started"
        );
        Ok(view)
    }

    /// Records one key. The response has the same shape whether or not the
    /// key selected the right keyword.
    pub fn login_key(&self, session_id: &str, key: &str) -> Result<StepView, ServiceError> {
        let symbol = parse_key(key)?;
        let slot = self.lookup(session_id, Mode::Login)?;
        let mut session = lock_session(&slot)?;
        let mut rng = self.fork_rng();
        match slot
            .pack
            .engine
            .submit_key(&mut session, symbol, &mut rng)?
        {
            StepOutcome::Next(challenge) => {
                debug!(
                    session = short(session_id),
                    step = challenge.step,
                    "login step recorded"
                );
                Ok(StepView::Challenge {
                    challenge: self.view(&slot.pack, session_id, Mode::Login, &challenge)?,
                })
            }
            StepOutcome::AwaitingFinalize => Ok(StepView::AwaitingFinalize {
                session_id: session_id.to_owned(),
                entered: session.entries_recorded(),
            }),
            other => Err(ServiceError::Internal(format!(
                "unexpected login outcome {other:?}"
            ))),
        }
    }

    pub fn login_finalize(&self, session_id: &str) -> Result<FinalizeView, ServiceError> {
        let slot = self.lookup(session_id, Mode::Login)?;
        let mut session = lock_session(&slot)?;
        let engine = &slot.pack.engine;
        let user_id = session.user_id().to_owned();
        let Some(record) = self.store.load(&user_id)? else {
            self.close_session(session_id);
            return Err(ServiceError::AuthenticationFailed { locked: false });
        };
        let matched = engine.verify_login(&session, &record)?;
        let now = self.clock.now();
        let mut outcome = None;
        self.store.update(&user_id, &mut |r| {
            outcome = Some(engine.settle_login(&mut session, r, matched, now));
        })?;
        self.close_session(session_id);
        let outcome = outcome.ok_or(ServiceError::AuthenticationFailed { locked: false })??;
        info!(
            user = %user_id,
            authenticated = outcome.authenticated,
            locked = outcome.locked,
            "login finalized"
        );
        if outcome.authenticated {
            Ok(FinalizeView {
                authenticated: true,
            })
        } else {
            Err(ServiceError::AuthenticationFailed {
                locked: outcome.locked,
            })
        }
    }

    // ---- assets, packs, health --------------------------------------------

    pub fn asset(&self, asset_ref: &str) -> Option<Asset> {
        self.assets
            .read()
            .expect("asset lock poisoned")
            .get(asset_ref)
            .cloned()
    }

    /// Validates and activates a new pack. Sessions already in flight keep
    /// the pack they started with.
    pub fn upload_pack(
        &self,
        bearer: Option<&str>,
        upload: PackUpload,
    ) -> Result<PackInfo, ServiceError> {
        if !token_matches(&self.settings.admin_token, bearer) {
            return Err(ServiceError::Unauthorized);
        }
        let manifest = PackManifest::parse(&upload.manifest).map_err(|e| {
            ServiceError::InvalidPack(vec![Diagnostic::ManifestUnreadable {
                detail: match e {
                    PackError::Manifest(m) => m,
                    other => other.to_string(),
                },
            }])
        })?;
        let mut images = std::collections::BTreeMap::new();
        for (name, data) in upload.images {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(data.as_bytes())
                .map_err(|e| ServiceError::BadRequest(format!("image {name}: {e}")))?;
            images.insert(name, bytes);
        }
        let bundle = PackBundle { manifest, images };
        let loaded = bundle
            .build(
                self.scheme.keywords_per_portfolio(),
                self.scheme.sequence_length,
            )
            .map_err(|e| match e {
                PackError::Invalid(d) => ServiceError::InvalidPack(d),
                other => ServiceError::InvalidPack(vec![Diagnostic::ManifestUnreadable {
                    detail: other.to_string(),
                }]),
            })?;
        let engine = Engine::new(
            self.scheme.clone(),
            Arc::new(loaded.set),
            self.keyring.clone(),
        )?;
        let portfolios = engine.portfolios().len();

        let mut active = self.active.write().expect("pack lock poisoned");
        let version = active.version + 1;
        if let Some(dir) = &self.settings.uploaded_packs_dir {
            bundle
                .write_dir(dir.join(format!("v{version:06}")))
                .map_err(|e| ServiceError::Internal(e.to_string()))?;
        }
        self.assets
            .write()
            .expect("asset lock poisoned")
            .extend(loaded.assets);
        *active = Arc::new(ActivePack {
            version,
            manifest_version: loaded.version,
            engine: Arc::new(engine),
        });
        info!(pack_version = version, portfolios, "pack activated");
        Ok(PackInfo {
            pack_version: version,
            manifest_version: loaded.version,
            portfolios,
            keywords_per_portfolio: self.scheme.keywords_per_portfolio(),
        })
    }

    pub fn health(&self) -> HealthView {
        let pack = self.active();
        HealthView {
            status: "ok",
            pack_version: pack.version,
            manifest_version: pack.manifest_version,
            portfolios: pack.engine.portfolios().len(),
            keywords_per_portfolio: self.scheme.keywords_per_portfolio(),
            sequence_length: self.scheme.sequence_length,
            active_sessions: self.sessions.lock().expect("session table poisoned").len(),
        }
    }

    // ---- session table -----------------------------------------------------

    fn open_session(
        &self,
        pack: Arc<ActivePack>,
        session: AuthSession,
        challenge: &Challenge,
    ) -> Result<ChallengeView, ServiceError> {
        let now = self.clock.now();
        let id = session.id().as_str().to_owned();
        let mode = session.mode();
        let view = self.view(&pack, &id, mode, challenge)?;
        let slot = Arc::new(SessionSlot {
            mode,
            session: Mutex::new(session),
            pack,
            expires_at: now.saturating_add(self.settings.session_ttl_secs.saturating_mul(1000)),
        });
        let mut sessions = self.sessions.lock().expect("session table poisoned");
        if now >= self.next_sweep.load(Ordering::Relaxed) {
            sessions.retain(|_, s| now < s.expires_at);
            self.next_sweep
                .store(now + SWEEP_INTERVAL_MILLIS, Ordering::Relaxed);
        }
        sessions.insert(id, slot);
        Ok(view)
    }

    fn lookup(&self, session_id: &str, mode: Mode) -> Result<Arc<SessionSlot>, ServiceError> {
        let now = self.clock.now();
        let mut sessions = self.sessions.lock().expect("session table poisoned");
        let slot = sessions
            .get(session_id)
            .cloned()
            .ok_or(ServiceError::SessionGone)?;
        if now >= slot.expires_at {
            sessions.remove(session_id);
            debug!(session = short(session_id), "session expired");
            return Err(ServiceError::SessionGone);
        }
        if slot.mode != mode {
            return Err(ServiceError::WrongSessionMode);
        }
        Ok(slot)
    }

    fn close_session(&self, session_id: &str) {
        self.sessions
            .lock()
            .expect("session table poisoned")
            .remove(session_id);
    }

    fn view(
        &self,
        pack: &ActivePack,
        session_id: &str,
        mode: Mode,
        challenge: &Challenge,
    ) -> Result<ChallengeView, ServiceError> {
        let portfolio = pack.engine.portfolio(&challenge.portfolio_id)?;
        Ok(ChallengeView::new(
            session_id,
            mode,
            pack.engine.config().sequence_length,
            portfolio,
            challenge,
        ))
    }

    /// Number of live (unexpired, unfinished) sessions.
    pub fn active_sessions(&self) -> usize {
        let now = self.clock.now();
        self.sessions
            .lock()
            .expect("session table poisoned")
            .values()
            .filter(|s| now < s.expires_at)
            .count()
    }
}

fn lock_session(
    slot: &SessionSlot,
) -> Result<std::sync::MutexGuard<'_, AuthSession>, ServiceError> {
    match slot.session.try_lock() {
        Ok(guard) => Ok(guard),
        Err(TryLockError::WouldBlock) => Err(ServiceError::SessionBusy),
        Err(TryLockError::Poisoned(_)) => Err(ServiceError::SessionGone),
    }
}

/// Compares digests so neither length nor content leaks through timing.
fn token_matches(expected: &str, presented: Option<&str>) -> bool {
    let Some(presented) = presented else {
        return false;
    };
    if expected.is_empty() {
        return false;
    }
    Sha256::digest(expected.as_bytes())
        .ct_eq(&Sha256::digest(presented.as_bytes()))
        .into()
}

fn check_user_id(user_id: &str) -> Result<(), ServiceError> {
    let chars = user_id.chars().count();
    let ok = (1..=MAX_USER_ID_CHARS).contains(&chars)
        && user_id.trim() == user_id
        && !user_id.chars().any(char::is_control);
    ok.then_some(()).ok_or(ServiceError::InvalidUserId)
}

fn parse_key(key: &str) -> Result<char, ServiceError> {
    let mut chars = key.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(ServiceError::InvalidSymbol),
    }
}

fn short(session_id: &str) -> &str {
    &session_id[..session_id.len().min(8)]
}

fn newest_uploaded_pack(dir: &Path) -> Option<PathBuf> {
    std::fs::read_dir(dir)
        .ok()?
        .filter_map(Result::ok)
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let version: u64 = name.strip_prefix('v')?.parse().ok()?;
            Some((version, e.path()))
        })
        .max_by_key(|(v, _)| *v)
        .map(|(_, p)| p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens() {
        assert!(token_matches("secret-token", Some("secret-token")));
        assert!(!token_matches("secret-token", Some("secret-tokeN")));
        assert!(!token_matches("secret-token", None));
        assert!(!token_matches("", Some("")));
    }

    #[test]
    fn user_ids() {
        assert!(check_user_id("alice").is_ok());
        assert!(check_user_id("").is_err());
        assert!(check_user_id(" alice").is_err());
        assert!(check_user_id("a\u{0}b").is_err());
        assert!(check_user_id(&"x".repeat(65)).is_err());
    }

    #[test]
    fn keys() {
        assert_eq!(parse_key("Q").unwrap(), 'Q');
        assert!(parse_key("").is_err());
        assert!(parse_key("ab").is_err());
    }
}
