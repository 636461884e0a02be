//! Attacker models. Each trial registers a fresh victim on an in-process
//! service and lets the attacker make its attempts through the same
//! operations the HTTP layer calls.

use std::collections::HashSet;
use std::sync::Arc;

use cuedr_core::entropy::{
    campaign_success_probability, guess_probability, portfolio_prefix_probability,
};
use cuedr_core::pack::LoadedPack;
use cuedr_core::store::MemoryStore;
use cuedr_core::{CredentialStore, FeedbackKey, FeedbackKeyring};
use cuedr_service::ChallengeView;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{Arena, Outcome};
use crate::engine::{chunk_rng, count};
use crate::profile::DeskProfile;
use crate::report::AttackReport;
use crate::stats::{two_proportion_test, TwoProportion};
use crate::AttackError;

pub const RANDOM_GUESSER: &str = "random-guesser";
pub const KEYLOGGER_REPLAY: &str = "keylogger-replay";
pub const PHISHING: &str = "phishing-portfolio-guess";

/// What a shoulder-surfer managed to record of the victim's logins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observation {
    /// Screen and keystrokes.
    Full,
    /// Keystrokes only; the same position as a keylogger.
    KeysOnly,
    /// The rendered portfolios and key letters, but not what was typed.
    ScreenOnly,
}

impl Observation {
    pub fn model_id(self) -> &'static str {
        match self {
            Observation::Full => "screen-observer:full",
            Observation::KeysOnly => "screen-observer:keys",
            Observation::ScreenOnly => "screen-observer:screen",
        }
    }
}

impl std::str::FromStr for Observation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Self::Full),
            "keys-only" | "keys" => Ok(Self::KeysOnly),
            "screen-only" | "screen" => Ok(Self::ScreenOnly),
            other => Err(format!(
                "unknown observation {other:?}; expected full, keys-only or screen-only"
            )),
        }
    }
}

fn random_key(view: &ChallengeView, rng: &mut impl Rng) -> char {
    let entries = &view.portfolio.entries;
    entries[rng.random_range(0..entries.len())]
        .key
        .chars()
        .next()
        .expect("one-character key")
}

fn run_victims(
    profile: &DeskProfile,
    trials: u64,
    seed: u64,
    trial: impl Fn(&Arena, &str, &mut ChaCha20Rng) -> Result<bool, AttackError> + Sync,
) -> Result<u64, AttackError> {
    let pack = profile.pack()?;
    count(trials, seed, |rng, range| {
        let arena = Arena::new(profile, &pack, rng)?;
        let mut hits = 0;
        for i in range {
            if trial(&arena, &format!("victim-{i}"), rng)? {
                hits += 1;
            }
        }
        Ok(hits)
    })
}

/// Allowed attempts before lockout stops the campaign.
fn effective_attempts(profile: &DeskProfile, attempts: u32) -> u32 {
    match profile.lockout {
        Some(max) if max > 0 => attempts.min(max),
        _ => attempts,
    }
}

/// An online guesser typing uniformly random keys, making up to `attempts`
/// logins per victim and stopping at the first success or lockout.
pub fn simulate_random_guesser(
    profile: &DeskProfile,
    attempts: u32,
    trials: u64,
    seed: u64,
) -> Result<AttackReport, AttackError> {
    let alphabet = profile.alphabet();
    let hits = run_victims(profile, trials, seed, |arena, user, rng| {
        arena.enroll(user)?;
        for _ in 0..attempts {
            let a = arena.attempt(user, |_, _| alphabet[rng.random_range(0..alphabet.len())])?;
            match a.outcome {
                Outcome::Accepted => return Ok(true),
                Outcome::Locked => return Ok(false),
                Outcome::Rejected => {}
            }
        }
        Ok(false)
    })?;
    let analytic =
        campaign_success_probability(profile.k, profile.m, effective_attempts(profile, attempts));
    Ok(
        AttackReport::new(RANDOM_GUESSER, *profile, seed, trials, hits, analytic)
            .attempts(attempts),
    )
}

/// Keys typed at each step, most frequent first across the observed
/// sessions; ties go to the key seen first.
fn majority_keys(sessions: &[Vec<char>], m: usize) -> Vec<char> {
    (0..m)
        .map(|step| {
            let mut tally: Vec<(char, usize)> = Vec::new();
            for keys in sessions {
                match tally.iter_mut().find(|(c, _)| *c == keys[step]) {
                    Some((_, n)) => *n += 1,
                    None => tally.push((keys[step], 1)),
                }
            }
            tally
                .iter()
                .rev()
                .max_by_key(|(_, n)| *n)
                .map(|(c, _)| *c)
                .expect("at least one session")
        })
        .collect()
}

fn observe_keys(
    arena: &Arena,
    user: &str,
    keywords: &[String],
    sessions: usize,
) -> Result<Vec<Vec<char>>, AttackError> {
    (0..sessions)
        .map(|_| {
            let a = arena.legitimate_login(user, keywords)?;
            Ok(a.transcript.iter().map(|(_, key)| *key).collect())
        })
        .collect()
}

/// An attacker holding the keystrokes of `observed` legitimate logins who
/// replays the most common key at each step.
pub fn simulate_keylogger_replay(
    profile: &DeskProfile,
    observed: usize,
    trials: u64,
    seed: u64,
) -> Result<AttackReport, AttackError> {
    if observed == 0 {
        return Err(AttackError::Invalid(
            "keylogger replay needs at least one observed session".into(),
        ));
    }
    let hits = run_victims(profile, trials, seed, |arena, user, _| {
        let keywords = arena.enroll(user)?;
        let replay = majority_keys(&observe_keys(arena, user, &keywords, observed)?, profile.m);
        let a = arena.attempt(user, |step, _| replay[step])?;
        Ok(a.outcome == Outcome::Accepted)
    })?;
    let analytic = guess_probability(profile.k, profile.m);
    Ok(
        AttackReport::new(KEYLOGGER_REPLAY, *profile, seed, trials, hits, analytic)
            .observed(observed),
    )
}

/// A shoulder-surfer who watched `observed` legitimate logins.
pub fn simulate_screen_observer(
    profile: &DeskProfile,
    observed: usize,
    view: Observation,
    trials: u64,
    seed: u64,
) -> Result<AttackReport, AttackError> {
    let hits = run_victims(profile, trials, seed, |arena, user, rng| {
        let keywords = arena.enroll(user)?;
        let outcome = match view {
            Observation::Full => {
                // the key typed under each render names the keyword
                let mut learned: Option<Vec<String>> = None;
                for _ in 0..observed {
                    let a = arena.legitimate_login(user, &keywords)?;
                    learned.get_or_insert_with(|| {
                        a.transcript
                            .iter()
                            .map(|(view, key)| {
                                view.portfolio
                                    .entries
                                    .iter()
                                    .find(|e| e.key.starts_with(*key))
                                    .expect("typed key is on screen")
                                    .keyword
                                    .clone()
                            })
                            .collect()
                    });
                }
                arena.attempt(user, |step, view| {
                    learned
                        .as_ref()
                        .and_then(|l| view.key_for(&l[step]))
                        .unwrap_or_else(|| random_key(view, rng))
                })?
            }
            Observation::KeysOnly => {
                if observed == 0 {
                    arena.attempt(user, |_, view| random_key(view, rng))?
                } else {
                    let replay =
                        majority_keys(&observe_keys(arena, user, &keywords, observed)?, profile.m);
                    arena.attempt(user, |step, _| replay[step])?
                }
            }
            Observation::ScreenOnly => {
                // every keyword on a render is shown alike, so the screens
                // narrow nothing down
                for _ in 0..observed {
                    arena.legitimate_login(user, &keywords)?;
                }
                arena.attempt(user, |_, view| random_key(view, rng))?
            }
        };
        Ok(outcome.outcome == Outcome::Accepted)
    })?;
    let analytic = match view {
        Observation::Full if observed > 0 => 1.0,
        _ => guess_probability(profile.k, profile.m),
    };
    Ok(
        AttackReport::new(view.model_id(), *profile, seed, trials, hits, analytic)
            .observed(observed),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdvantageReport {
    pub random: AttackReport,
    pub replay: AttackReport,
    pub test: TwoProportion,
    pub alpha: f64,
    /// The replay attacker did significantly better than random guessing.
    pub advantage_detected: bool,
}

/// Keylogger replay against a random guesser on independent seeds, compared
/// with a one-sided reading of the two-proportion test.
pub fn keylogger_advantage(
    profile: &DeskProfile,
    observed: usize,
    trials: u64,
    seed: u64,
    alpha: f64,
) -> Result<AdvantageReport, AttackError> {
    let random = simulate_random_guesser(profile, 1, trials, seed)?;
    let replay = simulate_keylogger_replay(profile, observed, trials, seed.wrapping_add(1))?;
    let test = two_proportion_test(
        replay.successes,
        replay.trials,
        random.successes,
        random.trials,
    );
    Ok(AdvantageReport {
        advantage_detected: test.z > 0.0 && test.p_value < alpha,
        random,
        replay,
        test,
        alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleReport {
    pub profile: DeskProfile,
    /// `k^m` key sequences tried.
    pub sequences: u64,
    pub successes: u64,
    /// Distinct (portfolio, keyword) paths the sequences selected.
    pub distinct_paths: u64,
    pub winning_sequence: Option<String>,
}

/// Tries every key sequence against one registered credential. Each attempt
/// runs on a service replaying the same random stream, so every attempt sees
/// the same key mapping at each step and the sequences are directly
/// comparable.
pub fn exhaustive_guess_oracle(
    profile: &DeskProfile,
    seed: u64,
) -> Result<OracleReport, AttackError> {
    let sequences = (profile.k as u64)
        .checked_pow(profile.m as u32)
        .filter(|&n| n <= 1_000_000)
        .ok_or_else(|| {
            AttackError::Invalid(format!("{profile} has too many sequences to enumerate"))
        })?;
    let profile = DeskProfile {
        lockout: None,
        ..*profile
    };
    let pack = profile.pack()?;
    let mut rng = chunk_rng(seed, 0);
    let keyring = FeedbackKeyring::single(FeedbackKey::generate(1, &mut rng));
    let store = Arc::new(MemoryStore::new());
    let enroll = Arena::with_parts(
        &profile,
        &pack,
        keyring.clone(),
        store.clone(),
        ChaCha20Rng::from_rng(&mut rng),
    )?;
    enroll.enroll("victim")?;
    let record = store.load("victim")?.expect("registered");
    let login_seed: [u8; 32] = rng.random();

    let alphabet = profile.alphabet();
    let mut successes = 0;
    let mut winning_sequence = None;
    let mut paths = HashSet::new();
    for index in 0..sequences {
        let mut digits = index;
        let keys: Vec<char> = (0..profile.m)
            .map(|_| {
                let c = alphabet[(digits % profile.k as u64) as usize];
                digits /= profile.k as u64;
                c
            })
            .collect();
        let store = Arc::new(MemoryStore::new());
        store.insert(record.clone())?;
        let arena = Arena::with_parts(
            &profile,
            &pack,
            keyring.clone(),
            store,
            ChaCha20Rng::from_seed(login_seed),
        )?;
        let attempt = arena.attempt("victim", |step, _| keys[step])?;
        let path: Vec<(String, String)> = attempt
            .transcript
            .iter()
            .map(|(view, key)| {
                let e = view
                    .portfolio
                    .entries
                    .iter()
                    .find(|e| e.key.starts_with(*key))
                    .expect("key on screen");
                (view.portfolio.id.clone(), e.keyword.clone())
            })
            .collect();
        paths.insert(path);
        if attempt.outcome == Outcome::Accepted {
            successes += 1;
            winning_sequence = Some(keys.iter().collect());
        }
    }
    Ok(OracleReport {
        profile,
        sequences,
        successes,
        distinct_paths: paths.len() as u64,
        winning_sequence,
    })
}

/// A phishing site guessing the ordered first `depth` portfolios of its
/// target, so it can mimic the start of a login.
pub fn phishing_portfolio_guess(
    profile: &DeskProfile,
    depth: usize,
    trials: u64,
    seed: u64,
) -> Result<AttackReport, AttackError> {
    if depth == 0 || depth > profile.m {
        return Err(AttackError::Invalid(format!(
            "depth must be in 1..={}",
            profile.m
        )));
    }
    let pack: LoadedPack = profile.pack()?;
    let ids: Vec<String> = pack.set.ids().map(|id| id.as_str().to_owned()).collect();
    let hits = count(trials, seed, |rng, range| {
        let arena = Arena::new(profile, &pack, rng)?;
        let mut ids = ids.clone();
        let mut hits = 0;
        for i in range {
            let shown = arena.enroll_prefix(&format!("victim-{i}"), depth)?;
            let (guess, _) = ids.partial_shuffle(rng, depth);
            if guess.iter().eq(shown.iter()) {
                hits += 1;
            }
        }
        Ok::<_, AttackError>(hits)
    })?;
    let analytic = portfolio_prefix_probability(profile.n, depth);
    Ok(AttackReport::new(
        PHISHING, *profile, seed, trials, hits, analytic,
    ))
}
