#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use cuedr_core::pack::{generate_fixture, LoadedPack};
use cuedr_core::store::{KdfParams, LockoutPolicy, MemoryStore};
use cuedr_core::{FeedbackKey, FeedbackKeyring, SchemeConfig};
use cuedr_service::config::RateLimitConfig;
use cuedr_service::{http, AuthService, ManualClock, ServiceSettings, SESSION_HEADER};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const ENROLL: &str = "enroll-token-0123456789";
pub const ADMIN: &str = "admin-token-0123456789";
pub const T0: u64 = 1_700_000_000_000;

pub struct Options {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub alphabet: Option<Vec<char>>,
    pub lockout: LockoutPolicy,
    pub kdf_iterations: u32,
    pub ttl_secs: u64,
    pub rate_limit: RateLimitConfig,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            n: 18,
            k: 26,
            m: 6,
            alphabet: None,
            lockout: LockoutPolicy::with_max_failures(3),
            kdf_iterations: 1,
            ttl_secs: 300,
            rate_limit: RateLimitConfig {
                per_source_per_minute: 0,
                per_user_per_minute: 0,
            },
        }
    }
}

pub struct Harness {
    pub service: Arc<AuthService>,
    pub router: Router,
    pub clock: Arc<ManualClock>,
    pub store: Arc<MemoryStore>,
    pub keyring: FeedbackKeyring,
    pub pack: LoadedPack,
    pub scheme: SchemeConfig,
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| {
            panic!(
                "{}: not JSON ({e}): {}",
                self.status,
                String::from_utf8_lossy(&self.bytes)
            )
        })
    }
}

/// One step of a secret: the portfolio shown and the keyword assigned in it.
#[derive(Debug, Clone)]
pub struct Step {
    pub portfolio_id: String,
    pub keyword: String,
}

pub fn harness(opts: Options) -> Harness {
    let pack = generate_fixture(2024, opts.n, opts.k)
        .build(opts.k, opts.m)
        .unwrap();
    let mut scheme = SchemeConfig::test_profile(opts.k, opts.m);
    if let Some(a) = opts.alphabet {
        scheme.alphabet = a;
    }
    scheme.kdf = KdfParams::Pbkdf2Sha256 {
        iterations: opts.kdf_iterations,
    };
    scheme.lockout = opts.lockout;
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let keyring = FeedbackKeyring::single(FeedbackKey::generate(1, &mut rng));
    let store = Arc::new(MemoryStore::new());
    let clock = Arc::new(ManualClock::new(T0));
    let settings = ServiceSettings {
        enrollment_token: ENROLL.into(),
        admin_token: ADMIN.into(),
        session_ttl_secs: opts.ttl_secs,
        rate_limit: opts.rate_limit,
        uploaded_packs_dir: None,
    };
    let service = Arc::new(
        AuthService::new(
            settings,
            scheme.clone(),
            keyring.clone(),
            pack.clone(),
            store.clone(),
            clock.clone(),
            rng,
        )
        .unwrap(),
    );
    Harness {
        router: http::router(service.clone()),
        service,
        clock,
        store,
        keyring,
        pack,
        scheme,
    }
}

impl Harness {
    pub async fn call(
        &self,
        method: Method,
        uri: &str,
        session: Option<&str>,
        bearer: Option<&str>,
        body: Option<Value>,
    ) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(s) = session {
            req = req.header(SESSION_HEADER, s);
        }
        if let Some(t) = bearer {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = match body {
            Some(v) => req
                .header("content-type", "application/json")
                .body(Body::from(v.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
            .await
            .unwrap()
            .to_vec();
        Reply {
            status,
            headers,
            bytes,
        }
    }

    pub async fn post(&self, uri: &str, session: Option<&str>, body: Value) -> Reply {
        self.call(Method::POST, uri, session, None, Some(body))
            .await
    }

    pub async fn register_start(&self, user: &str) -> Reply {
        self.call(
            Method::POST,
            "/register/start",
            None,
            Some(ENROLL),
            Some(json!({ "user_id": user })),
        )
        .await
    }

    /// Full registration through the HTTP API; returns what the user
    /// learned.
    pub async fn register(&self, user: &str) -> Vec<Step> {
        let start = self.register_start(user).await;
        assert_eq!(start.status, StatusCode::OK, "{}", start.json());
        let mut challenge = start.json();
        let sid = challenge["session_id"].as_str().unwrap().to_owned();
        let mut secret = Vec::new();
        loop {
            let study = self
                .call(Method::GET, "/register/study", Some(&sid), None, None)
                .await;
            assert_eq!(study.status, StatusCode::OK);
            let study = study.json();
            assert_eq!(study["portfolio_id"], challenge["portfolio"]["id"]);
            let keyword = study["keyword"].as_str().unwrap().to_owned();
            secret.push(Step {
                portfolio_id: study["portfolio_id"].as_str().unwrap().to_owned(),
                keyword: keyword.clone(),
            });
            let key = key_for(&challenge, &keyword);
            let r = self
                .post("/register/key", Some(&sid), json!({ "key": key }))
                .await;
            match r.status {
                StatusCode::OK => challenge = r.json()["challenge"].clone(),
                StatusCode::CREATED => {
                    assert_eq!(r.json()["status"], "registered");
                    return secret;
                }
                other => panic!("registration step failed: {other} {}", r.json()),
            }
        }
    }

    pub async fn login_start(&self, user: &str) -> Reply {
        self.post("/login/start", None, json!({ "user_id": user }))
            .await
    }

    /// Logs in, substituting `wrong(step, challenge)` for the correct key
    /// where it returns `Some`. Returns every per-step reply and the
    /// finalize reply.
    pub async fn login_with(
        &self,
        user: &str,
        secret: &[Step],
        mut wrong: impl FnMut(usize, &Value) -> Option<String>,
    ) -> (Reply, Vec<Reply>, Reply) {
        let start = self.login_start(user).await;
        assert_eq!(start.status, StatusCode::OK, "{}", start.json());
        let mut challenge = start.json();
        let sid = challenge["session_id"].as_str().unwrap().to_owned();
        let mut steps = Vec::new();
        for (i, step) in secret.iter().enumerate() {
            let key = wrong(i, &challenge).unwrap_or_else(|| {
                // a user who went astray still picks their keyword if it is shown
                challenge["portfolio"]["entries"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .find(|e| e["keyword"] == step.keyword.as_str())
                    .map(|e| e["key"].as_str().unwrap().to_owned())
                    .unwrap_or_else(|| {
                        challenge["portfolio"]["entries"][0]["key"]
                            .as_str()
                            .unwrap()
                            .to_owned()
                    })
            });
            let r = self
                .post("/login/key", Some(&sid), json!({ "key": key }))
                .await;
            assert_eq!(r.status, StatusCode::OK, "{}", r.json());
            if r.json()["status"] == "challenge" {
                challenge = r.json()["challenge"].clone();
            }
            steps.push(r);
        }
        let fin = self
            .call(Method::POST, "/login/finalize", Some(&sid), None, None)
            .await;
        (start, steps, fin)
    }

    pub async fn login(&self, user: &str, secret: &[Step]) -> Reply {
        self.login_with(user, secret, |_, _| None).await.2
    }
}

pub fn key_for(challenge: &Value, keyword: &str) -> String {
    challenge["portfolio"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["keyword"] == keyword)
        .unwrap_or_else(|| panic!("{keyword} not on screen"))["key"]
        .as_str()
        .unwrap()
        .to_owned()
}

/// A key for some keyword other than `keyword`.
pub fn other_key(challenge: &Value, keyword: &str) -> String {
    challenge["portfolio"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["keyword"] != keyword)
        .unwrap()["key"]
        .as_str()
        .unwrap()
        .to_owned()
}

/// Replaces every scalar with its type name so two documents can be
/// compared by shape alone.
pub fn shape(v: &Value) -> Value {
    match v {
        Value::Null => json!("null"),
        Value::Bool(_) => json!("bool"),
        Value::Number(_) => json!("number"),
        Value::String(_) => json!("string"),
        Value::Array(a) => Value::Array(a.iter().map(shape).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, v)| (k.clone(), shape(v))).collect()),
    }
}
