//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Runs without the libtest harness so the lines
//! are always visible.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use cuedr_attack::{
    exhaustive_guess_oracle, feedback_leak_probe, keylogger_advantage, mapping_uniformity,
    phishing_portfolio_guess, simulate_random_guesser, DeskProfile,
};
use cuedr_core::entropy::{entropy_grid, theoretical_entropy};
use cuedr_core::pack::{LoadedPack, PackBundle};
use cuedr_core::store::kdf::bench;
use cuedr_core::store::{FileStore, KdfFloor, KdfParams, LockoutPolicy};
use cuedr_core::{
    assign_credential, walk_chain, CredentialRecord, CredentialStore, FeedbackKey, FeedbackKeyring,
    SchemeConfig, StoreError,
};
use cuedr_service::config::RateLimitConfig;
use cuedr_service::{http, AuthService, ManualClock, ServiceSettings, SESSION_HEADER};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

const ENROLL: &str = "acceptance-enroll-token";
const ADMIN: &str = "acceptance-admin-token";
const TRIALS: u64 = 100_000;
const ALPHA: f64 = 0.01;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn profile(s: &str) -> DeskProfile {
    s.parse().expect("valid profile")
}

fn bundled_pack() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/pack-18")
}

fn entropy() -> Outcome {
    let bits = theoretical_entropy(26, 6);
    let expected = 6.0 * 26f64.ln() / 2f64.ln();
    ensure(
        (bits - 28.20).abs() <= 0.01 && (bits - expected).abs() < 1e-12,
        || format!("k=26 m=6 gives {bits} bits"),
    )?;
    let rows = entropy_grid(2..=26, 1..=8, None, Some(20.0));
    ensure(rows.len() == 25 * 8, || {
        format!("grid has {} rows", rows.len())
    })?;
    for r in &rows {
        let meets = r.m as f64 * (r.k as f64).log2() >= 20.0;
        ensure(r.meets_target == Some(meets), || {
            format!("row k={} m={} marked {:?}", r.k, r.m, r.meets_target)
        })?;
    }
    let marked = rows.iter().filter(|r| r.meets_target == Some(true)).count();
    Ok(format!(
        "{bits:.4} bits at k=26 m=6; {marked}/{} grid rows reach 20 bits",
        rows.len()
    ))
}

fn guessing() -> Outcome {
    let k4m2 = profile("k4m2");
    let oracle = exhaustive_guess_oracle(&k4m2, 1).map_err(|e| e.to_string())?;
    ensure(oracle.sequences == 16 && oracle.successes == 1, || {
        format!(
            "oracle: {} of {} sequences accepted",
            oracle.successes, oracle.sequences
        )
    })?;
    let mc = simulate_random_guesser(&k4m2, 1, TRIALS, 1).map_err(|e| e.to_string())?;
    ensure(mc.analytic_rate == 1.0 / 16.0, || {
        format!("analytic rate {}", mc.analytic_rate)
    })?;
    let dev = mc.deviation_sigmas.unwrap_or(f64::INFINITY);
    ensure(mc.within_3_sigma == Some(true), || {
        format!(
            "empirical {:?} is {dev:.2} sigma from 1/16",
            mc.empirical_rate
        )
    })?;
    Ok(format!(
        "oracle 1/16 sequences accepted; Monte Carlo {}/{} = {:.5} ({dev:.2} sigma from 0.0625)",
        mc.successes,
        mc.trials,
        mc.successes as f64 / mc.trials as f64
    ))
}

fn phishing() -> Outcome {
    let r =
        phishing_portfolio_guess(&profile("k4m2n10"), 2, TRIALS, 1).map_err(|e| e.to_string())?;
    ensure((r.analytic_rate - 1.0 / 90.0).abs() < 1e-15, || {
        format!("analytic rate {}", r.analytic_rate)
    })?;
    let dev = r.deviation_sigmas.unwrap_or(f64::INFINITY);
    ensure(r.within_3_sigma == Some(true), || {
        format!(
            "empirical {:?} is {dev:.2} sigma from 1/90",
            r.empirical_rate
        )
    })?;
    Ok(format!(
        "N=10 depth 2: {}/{} = {:.5} ({dev:.2} sigma from {:.5})",
        r.successes,
        r.trials,
        r.successes as f64 / r.trials as f64,
        1.0 / 90.0
    ))
}

fn variant_response() -> Outcome {
    let u = mapping_uniformity(26, TRIALS, 1).map_err(|e| e.to_string())?;
    ensure(u.positions.degrees_of_freedom == 625.0, || {
        format!("df {}", u.positions.degrees_of_freedom)
    })?;
    ensure(!u.positions.rejects_at(ALPHA), || {
        format!(
            "uniformity rejected: chi2={:.1} p={:.4}",
            u.positions.statistic, u.positions.p_value
        )
    })?;
    let adv =
        keylogger_advantage(&profile("k4m2"), 10, TRIALS, 1, ALPHA).map_err(|e| e.to_string())?;
    ensure(!adv.advantage_detected, || {
        format!(
            "replay beat random: z={:.2} p={:.4}",
            adv.test.z, adv.test.p_value
        )
    })?;
    Ok(format!(
        "mapping chi2={:.1} df=625 p={:.3}; keylogger (10 sessions) {} vs random {} hits, z={:.2} p={:.3}",
        u.positions.statistic,
        u.positions.p_value,
        adv.replay.successes,
        adv.random.successes,
        adv.test.z,
        adv.test.p_value
    ))
}

fn chain_round_trip() -> Outcome {
    let pack = PackBundle::load_dir(bundled_pack())
        .and_then(|b| b.build(26, 6))
        .map_err(|e| e.to_string())?;
    ensure(pack.set.len() == 18, || {
        format!("bundled pack has {} portfolios", pack.set.len())
    })?;
    let config = SchemeConfig::test_profile(26, 6);
    let mut rng = ChaCha20Rng::seed_from_u64(10_000);
    let key = FeedbackKey::generate(1, &mut rng);
    for u in 0..10_000 {
        let user = format!("user{u:05}");
        let assigned = assign_credential(&user, &pack.set, &config, &key, &mut rng)
            .map_err(|e| e.to_string())?;
        let expected = assigned.portfolio_ids();
        let walked = walk_chain(
            &key,
            &user,
            assigned.first_portfolio_id(),
            &assigned.ordinals(),
            &pack.set,
        )
        .map_err(|e| e.to_string())?;
        ensure(walked == expected, || {
            format!("{user}: walked {walked:?}, assigned {expected:?}")
        })?;
        let distinct: BTreeSet<_> = walked.iter().collect();
        ensure(distinct.len() == 6, || {
            format!("{user}: {} distinct portfolios", distinct.len())
        })?;
    }
    Ok("10000 credentials on the bundled 18x26 pack; all chains reproduce with 6 distinct portfolios".into())
}

struct Reply {
    status: StatusCode,
    retry_after: Option<String>,
    content_type: Option<String>,
    body: Value,
}

struct Desk {
    _dir: tempfile::TempDir,
    store_path: PathBuf,
    store: Arc<FileStore>,
    pack: LoadedPack,
    router: Router,
    runtime: tokio::runtime::Runtime,
}

impl Desk {
    fn new(lockout: LockoutPolicy) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store_path = dir.path().join("credentials.db");
        let store = Arc::new(FileStore::open(&store_path).unwrap());
        let pack = PackBundle::load_dir(bundled_pack())
            .unwrap()
            .build(26, 6)
            .unwrap();
        let mut scheme = SchemeConfig::test_profile(26, 6);
        scheme.kdf = KdfParams::Pbkdf2Sha256 { iterations: 10 };
        scheme.lockout = lockout;
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let keyring = FeedbackKeyring::single(FeedbackKey::generate(1, &mut rng));
        let settings = ServiceSettings {
            enrollment_token: ENROLL.into(),
            admin_token: ADMIN.into(),
            session_ttl_secs: 300,
            rate_limit: RateLimitConfig {
                per_source_per_minute: 0,
                per_user_per_minute: 0,
            },
            uploaded_packs_dir: None,
        };
        let service = AuthService::new(
            settings,
            scheme,
            keyring,
            pack.clone(),
            store.clone(),
            Arc::new(ManualClock::new(1_700_000_000_000)),
            rng,
        )
        .unwrap();
        Desk {
            _dir: dir,
            store_path,
            store,
            pack,
            router: http::router(Arc::new(service)),
            runtime: tokio::runtime::Builder::new_current_thread()
                .build()
                .unwrap(),
        }
    }

    fn call(
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
        self.runtime.block_on(async {
            let resp = self.router.clone().oneshot(req).await.unwrap();
            let status = resp.status();
            let header = |name: &str| {
                resp.headers()
                    .get(name)
                    .map(|v| v.to_str().unwrap().to_owned())
            };
            let retry_after = header("retry-after");
            let content_type = header("content-type");
            let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
                .await
                .unwrap();
            let body = if bytes.is_empty() {
                Value::Null
            } else {
                serde_json::from_slice(&bytes).unwrap()
            };
            Reply {
                status,
                retry_after,
                content_type,
                body,
            }
        })
    }

    fn post(&self, uri: &str, session: Option<&str>, body: Value) -> Reply {
        self.call(Method::POST, uri, session, None, Some(body))
    }

    /// Registers through the HTTP API and returns the keywords learned.
    fn register(&self, user: &str) -> Result<Vec<String>, String> {
        let start = self.call(
            Method::POST,
            "/register/start",
            None,
            Some(ENROLL),
            Some(json!({ "user_id": user })),
        );
        ensure(start.status == StatusCode::OK, || {
            format!("register/start: {} {}", start.status, start.body)
        })?;
        let mut challenge = start.body;
        let sid = challenge["session_id"].as_str().unwrap().to_owned();
        let mut secret = Vec::new();
        loop {
            let study = self.call(Method::GET, "/register/study", Some(&sid), None, None);
            ensure(study.status == StatusCode::OK, || {
                format!("register/study: {}", study.status)
            })?;
            let keyword = study.body["keyword"].as_str().unwrap().to_owned();
            let key =
                key_for(&challenge, &keyword).ok_or_else(|| format!("{keyword} not shown"))?;
            secret.push(keyword);
            let r = self.post("/register/key", Some(&sid), json!({ "key": key }));
            match r.status {
                StatusCode::OK => challenge = r.body["challenge"].clone(),
                StatusCode::CREATED => return Ok(secret),
                s => return Err(format!("register/key: {s} {}", r.body)),
            }
        }
    }

    /// Logs in, typing a key for some other keyword at `wrong_at`. Away
    /// from the true path the user still types their keyword if it is
    /// shown. Returns the per-step replies and the finalize reply.
    fn login(
        &self,
        user: &str,
        secret: &[String],
        wrong_at: Option<usize>,
    ) -> Result<(Vec<Reply>, Reply), String> {
        let start = self.post("/login/start", None, json!({ "user_id": user }));
        ensure(start.status == StatusCode::OK, || {
            format!("login/start: {} {}", start.status, start.body)
        })?;
        let mut challenge = start.body;
        let sid = challenge["session_id"].as_str().unwrap().to_owned();
        let mut steps = Vec::new();
        for (i, keyword) in secret.iter().enumerate() {
            let entries = challenge["portfolio"]["entries"].as_array().unwrap();
            let key = if wrong_at == Some(i) {
                entries
                    .iter()
                    .find(|e| e["keyword"] != keyword.as_str())
                    .unwrap()["key"]
                    .clone()
            } else {
                key_for(&challenge, keyword).map_or_else(|| entries[0]["key"].clone(), Value::from)
            };
            let r = self.post("/login/key", Some(&sid), json!({ "key": key }));
            ensure(r.status == StatusCode::OK, || {
                format!("login/key step {i}: {} {}", r.status, r.body)
            })?;
            if r.body["status"] == "challenge" {
                challenge = r.body["challenge"].clone();
            }
            steps.push(r);
        }
        let fin = self.call(Method::POST, "/login/finalize", Some(&sid), None, None);
        Ok((steps, fin))
    }
}

fn key_for(challenge: &Value, keyword: &str) -> Option<String> {
    challenge["portfolio"]["entries"]
        .as_array()?
        .iter()
        .find(|e| e["keyword"] == keyword)
        .map(|e| e["key"].as_str().unwrap().to_owned())
}

/// Every scalar replaced by its type name.
fn shape(v: &Value) -> Value {
    match v {
        Value::Null => json!("null"),
        Value::Bool(_) => json!("bool"),
        Value::Number(_) => json!("number"),
        Value::String(_) => json!("string"),
        Value::Array(a) => Value::Array(a.iter().map(shape).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, v)| (k.clone(), shape(v))).collect()),
    }
}

fn implicit_feedback() -> Outcome {
    let probe = feedback_leak_probe(&profile("k26m6n18"), 10_000, 1).map_err(|e| e.to_string())?;
    for s in &probe.steps {
        let expected = 1.0 / (18 - s.step - 1) as f64;
        ensure((s.analytic_rate - expected).abs() < 1e-12, || {
            format!(
                "step {}: analytic {} expected {expected}",
                s.step, s.analytic_rate
            )
        })?;
        ensure(s.within_3_sigma, || {
            format!(
                "step {}: {:.5} vs {expected:.5} ({:.2} sigma)",
                s.step, s.empirical_rate, s.deviation_sigmas
            )
        })?;
    }
    let worst = probe
        .steps
        .iter()
        .map(|s| s.deviation_sigmas)
        .fold(0.0, f64::max);

    let desk = Desk::new(LockoutPolicy::disabled());
    let secret = desk.register("ivan")?;
    let (good_steps, good_fin) = desk.login("ivan", &secret, None)?;
    ensure(good_fin.status == StatusCode::OK, || {
        format!("correct login gave {}", good_fin.status)
    })?;
    let good: Vec<Value> = good_steps.iter().map(|r| shape(&r.body)).collect();
    let mut failed_shape = None;
    for wrong_at in 0..secret.len() {
        let (steps, fin) = desk.login("ivan", &secret, Some(wrong_at))?;
        for (i, r) in steps.iter().enumerate() {
            ensure(
                r.status == good_steps[i].status && shape(&r.body) == good[i],
                || format!("step {i} differs with error at {wrong_at}: {}", r.body),
            )?;
            ensure(r.content_type == good_steps[i].content_type, || {
                format!("content type at step {i}")
            })?;
        }
        ensure(fin.status == StatusCode::UNAUTHORIZED, || {
            format!("error at {wrong_at}: finalize {}", fin.status)
        })?;
        let s = shape(&fin.body);
        ensure(*failed_shape.get_or_insert_with(|| s.clone()) == s, || {
            format!("finalize shape at {wrong_at}")
        })?;
    }
    Ok(format!(
        "collision rates 1/17..1/12 over 10000 trials, worst {worst:.2} sigma; step responses identical in shape for errors at all 6 positions"
    ))
}

fn storage() -> Outcome {
    let desk = Desk::new(LockoutPolicy::disabled());
    let users: Vec<String> = (0..40).map(|u| format!("user{u:02}")).collect();
    for u in &users {
        desk.register(u)?;
    }
    let live: Vec<CredentialRecord> = users
        .iter()
        .map(|u| desk.store.load(u).unwrap().unwrap())
        .collect();
    for r in &live {
        let bytes = r.encode().map_err(|e| e.to_string())?;
        let back = CredentialRecord::decode(&bytes).map_err(|e| e.to_string())?;
        ensure(back == *r && back.encode().unwrap() == bytes, || {
            format!("{} does not round-trip", r.user_id)
        })?;
    }
    let reopened = FileStore::open(&desk.store_path).map_err(|e| e.to_string())?;
    for r in &live {
        ensure(
            reopened.load(&r.user_id).unwrap().as_ref() == Some(r),
            || format!("{} changed on reopen", r.user_id),
        )?;
    }

    let mut rng = ChaCha20Rng::seed_from_u64(0xC0DE);
    let mut fuzzed = 0;
    for i in 0..20_000 {
        let clean = live[i % live.len()].encode().unwrap();
        let mut bytes = clean.clone();
        if rng.random_bool(0.2) {
            bytes.truncate(rng.random_range(0..bytes.len()));
        } else {
            for _ in 0..rng.random_range(1..=4) {
                let at = rng.random_range(0..bytes.len());
                bytes[at] ^= 1 << rng.random_range(0..8);
            }
        }
        if bytes == clean {
            continue;
        }
        fuzzed += 1;
        match CredentialRecord::decode(&bytes) {
            Err(StoreError::CorruptRecord(_)) => {}
            other => return Err(format!("mutation {i} not reported as corrupt: {other:?}")),
        }
    }
    let file = std::fs::read(&desk.store_path).unwrap();
    let scratch = tempfile::tempdir().unwrap();
    for i in 0..300 {
        let mut bytes = file.clone();
        let at = rng.random_range(0..bytes.len());
        bytes[at] ^= 1 << rng.random_range(0..8);
        let p = scratch.path().join(format!("flip-{i}.db"));
        std::fs::write(&p, &bytes).unwrap();
        match FileStore::open(&p) {
            Err(StoreError::CorruptRecord(_)) => {}
            Err(e) => return Err(format!("store bit flip at {at}: {e}")),
            Ok(_) => return Err(format!("store bit flip at {at} went unnoticed")),
        }
    }

    let haystack = String::from_utf8_lossy(&file).to_lowercase();
    let keywords: Vec<&str> = desk.pack.set.keywords().collect();
    if let Some(k) = keywords
        .iter()
        .find(|k| haystack.contains(&k.to_lowercase()))
    {
        return Err(format!("keyword {k:?} found in the store file"));
    }

    let floor = KdfFloor::production();
    let params = KdfParams::default();
    params.check_floor(&floor).map_err(|e| e.to_string())?;
    let stats = bench(&params, 3).map_err(|e| e.to_string())?;
    ensure(stats.min_ms >= floor.min_verify_millis as f64, || {
        format!(
            "production KDF took {:.1} ms, floor {} ms",
            stats.min_ms, floor.min_verify_millis
        )
    })?;
    Ok(format!(
        "{} records round-trip; {fuzzed} record mutations and 300 file bit flips all corrupt; none of {} keywords at rest; production KDF {:.1} ms >= {} ms",
        live.len(),
        keywords.len(),
        stats.min_ms,
        floor.min_verify_millis
    ))
}

fn service_flows() -> Outcome {
    let desk = Desk::new(LockoutPolicy::with_max_failures(3));
    let secret = desk.register("alice")?;
    ensure(secret.len() == 6, || {
        format!("{} keywords learned", secret.len())
    })?;
    let stored = desk
        .store
        .load("alice")
        .unwrap()
        .ok_or("no record after registration")?;
    ensure(stored.failure_count == 0, || {
        "fresh record has failures".into()
    })?;

    let (_, fin) = desk.login("alice", &secret, None)?;
    ensure(
        fin.status == StatusCode::OK && fin.body["authenticated"] == true,
        || format!("happy path finalize: {} {}", fin.status, fin.body),
    )?;

    let (_, fin) = desk.login("alice", &secret, Some(3))?;
    ensure(fin.status == StatusCode::UNAUTHORIZED, || {
        format!("wrong entry finalize: {}", fin.status)
    })?;
    ensure(fin.body["error"] == "authentication_failed", || {
        format!("wrong entry body: {}", fin.body)
    })?;
    let (_, fin) = desk.login("alice", &secret, None)?;
    ensure(fin.status == StatusCode::OK, || {
        format!("login after one failure: {}", fin.status)
    })?;

    for attempt in 1..=3 {
        let (_, fin) = desk.login("alice", &secret, Some(0))?;
        ensure(fin.status == StatusCode::UNAUTHORIZED, || {
            format!("failure {attempt}: {}", fin.status)
        })?;
    }
    let locked = desk.post("/login/start", None, json!({ "user_id": "alice" }));
    ensure(locked.status == StatusCode::LOCKED, || {
        format!("after 3 failures: {} {}", locked.status, locked.body)
    })?;
    ensure(locked.retry_after.as_deref() == Some("60"), || {
        format!("retry-after {:?}", locked.retry_after)
    })?;
    Ok("register + login 200; wrong entry 401 authentication_failed; 3 failures then 423 with retry-after 60".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("entropy", entropy),
        ("guessing", guessing),
        ("phishing", phishing),
        ("variant-response", variant_response),
        ("implicit-feedback", implicit_feedback),
        ("chain-round-trip", chain_round_trip),
        ("storage", storage),
        ("service-flows", service_flows),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1}s]"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
