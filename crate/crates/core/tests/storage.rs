use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use cuedr_core::pack::generate_fixture;
use cuedr_core::store::kdf::{KdfFloor, KdfParams, Verifier};
use cuedr_core::store::{
    derive_verifier, CredentialRecord, CredentialStore, FileStore, StoreError,
};
use cuedr_core::{Engine, FeedbackKey, FeedbackKeyring, PortfolioId, SchemeConfig, StepOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn pbkdf2_record() -> CredentialRecord {
    CredentialRecord {
        user_id: "alice".into(),
        first_portfolio_id: PortfolioId::new("p07-instruments"),
        salt: (0u8..16).collect(),
        verifier: Verifier([0xab; 32]),
        kdf: KdfParams::Pbkdf2Sha256 {
            iterations: 600_000,
        },
        prf_key_version: 1,
        failure_count: 2,
        lockout_level: 0,
        locked_until: None,
    }
}

fn argon2_record() -> CredentialRecord {
    CredentialRecord {
        user_id: "bø".into(),
        first_portfolio_id: PortfolioId::new("p18-fish"),
        salt: vec![0x11; 20],
        verifier: Verifier(std::array::from_fn(|i| i as u8)),
        kdf: KdfParams::Argon2id {
            memory_kib: 19_456,
            passes: 2,
            lanes: 1,
        },
        prf_key_version: 3,
        failure_count: 10,
        lockout_level: 2,
        locked_until: Some(1_700_000_123_456),
    }
}

/// Independent byte-level encoder written from the documented layout.
fn hand_encoded(r: &CredentialRecord) -> Vec<u8> {
    use sha2::{Digest, Sha256};
    let mut b = Vec::new();
    b.extend_from_slice(b"CDRR");
    b.extend_from_slice(&[1, 0]);
    for s in [r.user_id.as_str(), r.first_portfolio_id.as_str()] {
        b.extend_from_slice(&(s.len() as u16).to_le_bytes());
        b.extend_from_slice(s.as_bytes());
    }
    b.push(r.salt.len() as u8);
    b.extend_from_slice(&r.salt);
    match r.kdf {
        KdfParams::Pbkdf2Sha256 { iterations } => {
            b.push(1);
            b.extend_from_slice(&iterations.to_le_bytes());
        }
        KdfParams::Argon2id {
            memory_kib,
            passes,
            lanes,
        } => {
            b.push(2);
            for v in [memory_kib, passes, lanes] {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    b.push(32);
    b.extend_from_slice(&r.verifier.0);
    for v in [r.prf_key_version, r.failure_count, r.lockout_level] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.push(u8::from(r.locked_until.is_some()));
    b.extend_from_slice(&r.locked_until.unwrap_or(0).to_le_bytes());
    let digest = Sha256::digest(&b);
    b.extend_from_slice(&digest);
    b
}

#[test]
fn encoding_matches_documented_layout_and_golden_files() {
    for (name, record) in [
        ("record-pbkdf2.bin", pbkdf2_record()),
        ("record-argon2id.bin", argon2_record()),
    ] {
        let encoded = record.encode().unwrap();
        assert_eq!(encoded, hand_encoded(&record), "{name}");
        let path = golden_dir().join(name);
        if std::env::var_os("CUEDR_BLESS").is_some() {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, &encoded).unwrap();
        }
        let golden = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(
            encoded, golden,
            "{name} drifted from the committed golden bytes"
        );
        assert_eq!(CredentialRecord::decode(&golden).unwrap(), record);
    }
}

#[test]
fn fuzzed_record_corruption_is_always_detected() {
    let mut rng = ChaCha20Rng::seed_from_u64(0xF022);
    let base = [
        pbkdf2_record().encode().unwrap(),
        argon2_record().encode().unwrap(),
    ];
    for i in 0..20_000 {
        let mut bytes = base[i % 2].clone();
        match rng.random_range(0..3) {
            0 => {
                let flips = rng.random_range(1..=8);
                for _ in 0..flips {
                    let at = rng.random_range(0..bytes.len());
                    bytes[at] ^= 1 << rng.random_range(0..8);
                }
            }
            1 => {
                let at = rng.random_range(0..bytes.len());
                let replacement: u8 = rng.random();
                if bytes[at] == replacement {
                    continue;
                }
                bytes[at] = replacement;
            }
            _ => {
                let cut = rng.random_range(0..bytes.len());
                bytes.truncate(cut);
            }
        }
        if bytes == base[i % 2] {
            continue;
        }
        match CredentialRecord::decode(&bytes) {
            Err(StoreError::CorruptRecord(_)) => {}
            other => panic!("iteration {i}: corruption not reported: {other:?}"),
        }
    }
}

#[test]
fn fuzzed_store_file_corruption_is_always_detected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("creds.db");
    {
        let store = FileStore::open(&path).unwrap();
        store.insert(pbkdf2_record()).unwrap();
        store.insert(argon2_record()).unwrap();
    }
    let clean = std::fs::read(&path).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(0xF1);
    for i in 0..2_000 {
        let mut bytes = clean.clone();
        let at = rng.random_range(0..bytes.len());
        bytes[at] ^= 1 << rng.random_range(0..8);
        let p = dir.path().join(format!("fuzz-{i}.db"));
        std::fs::write(&p, &bytes).unwrap();
        match FileStore::open(&p) {
            Err(StoreError::CorruptRecord(_)) => {}
            Err(e) => panic!("byte {at}: unexpected error {e}"),
            Ok(_) => panic!("byte {at}: flipped bit went unnoticed"),
        }
        std::fs::remove_file(&p).unwrap();
    }
}

#[test]
fn stored_bytes_never_contain_pack_keywords() {
    let bundle = generate_fixture(18, 18, 26);
    let pack = bundle.build(26, 6).unwrap();
    let mut config = SchemeConfig::test_profile(26, 6);
    config.kdf = KdfParams::Pbkdf2Sha256 { iterations: 10 };
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let keyring = FeedbackKeyring::single(FeedbackKey::generate(1, &mut rng));
    let engine = Engine::new(config, Arc::new(pack.set.clone()), keyring).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("creds.db");
    let store = FileStore::open(&path).unwrap();
    for u in 0..50 {
        let user = format!("user{u:02}");
        let assigned = engine.assign(&user, &mut rng).unwrap();
        let secret: Vec<_> = assigned.steps().to_vec();
        let (mut session, mut challenge) = engine.start_registration(assigned, &mut rng);
        for step in &secret {
            let key = challenge.mapping.symbol_for(step.ordinal).unwrap();
            match engine.submit_key(&mut session, key, &mut rng).unwrap() {
                StepOutcome::Next(c) => challenge = c,
                StepOutcome::Registered => break,
                other => panic!("{other:?}"),
            }
        }
        store
            .insert(engine.complete_registration(&session, &mut rng).unwrap())
            .unwrap();
    }
    drop(store);

    let bytes = std::fs::read(&path).unwrap();
    let haystack = String::from_utf8_lossy(&bytes).to_lowercase();
    for keyword in pack.set.keywords() {
        assert!(
            !haystack.contains(&keyword.to_lowercase()),
            "keyword {keyword:?} found at rest"
        );
    }
    // Only first portfolios appear; later chain positions do not.
    let first_ids: std::collections::BTreeSet<_> = FileStore::open(&path)
        .map(|s| {
            (0..50)
                .map(|u| {
                    s.load(&format!("user{u:02}"))
                        .unwrap()
                        .unwrap()
                        .first_portfolio_id
                })
                .collect()
        })
        .unwrap();
    for id in pack.set.ids() {
        if !first_ids.contains(id) {
            assert!(
                !haystack.contains(id.as_str()),
                "non-first portfolio {id} stored"
            );
        }
    }
}

#[test]
fn concurrent_updates_to_distinct_users_all_persist() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("creds.db");
    let store = Arc::new(FileStore::open(&path).unwrap());
    let users: Vec<String> = (0..8).map(|i| format!("u{i}")).collect();
    for u in &users {
        let mut r = pbkdf2_record();
        r.user_id = u.clone();
        r.failure_count = 0;
        store.insert(r).unwrap();
    }
    let handles: Vec<_> = users
        .iter()
        .cloned()
        .map(|u| {
            let store = Arc::clone(&store);
            thread::spawn(move || {
                for _ in 0..25 {
                    store
                        .update(&u, &mut |r| r.failure_count += 1)
                        .unwrap()
                        .unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    drop(store);
    let reopened = FileStore::open(&path).unwrap();
    for u in &users {
        assert_eq!(reopened.load(u).unwrap().unwrap().failure_count, 25, "{u}");
    }
}

#[test]
fn different_salts_give_different_verifiers() {
    let kw = ["zebra", "mango", "tulip", "tram", "violin", "robin"];
    let params = KdfParams::Pbkdf2Sha256 { iterations: 1 };
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut seen = std::collections::HashSet::new();
    for _ in 0..500 {
        let salt: [u8; 16] = rng.random();
        let v = derive_verifier(&kw, &salt, &params, &KdfFloor::test()).unwrap();
        assert!(seen.insert(v.0));
    }
}
