//! Statistical probes of the scheme's building blocks: how often a wrong
//! keyword lands on the true next portfolio, and how uniform the per-render
//! key mappings are.

use std::fmt;

use cuedr_core::{
    assign_credential, next_portfolio, sample_key_mapping, FeedbackKey, Ordinal, PortfolioId,
};
use serde::Serialize;

use crate::engine::count_vec;
use crate::profile::DeskProfile;
use crate::stats::{binomial_sigma, chi_square, deviation, ChiSquare};
use crate::AttackError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepLeak {
    /// 0-based step whose entry is wrong.
    pub step: usize,
    /// Portfolios the chain can still move to after this step.
    pub candidates: usize,
    pub samples: u64,
    pub collisions: u64,
    pub empirical_rate: f64,
    /// `1 / candidates`.
    pub analytic_rate: f64,
    pub sigma: f64,
    pub deviation_sigmas: f64,
    pub within_3_sigma: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackProbeReport {
    pub profile: DeskProfile,
    pub seed: u64,
    pub trials: u64,
    pub steps: Vec<StepLeak>,
}

impl FeedbackProbeReport {
    pub fn all_within_3_sigma(&self) -> bool {
        self.steps.iter().all(|s| s.within_3_sigma)
    }

    pub fn step(&self, step: usize) -> Option<&StepLeak> {
        self.steps.iter().find(|s| s.step == step)
    }
}

impl fmt::Display for FeedbackProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "feedback probe {} trials={} seed={}",
            self.profile, self.trials, self.seed
        )?;
        writeln!(
            f,
            "{:>4} {:>10} {:>10} {:>10} {:>10} {:>10} {:>7} {:>4}",
            "step", "candidates", "samples", "collisions", "empirical", "analytic", "sigmas", "ok"
        )?;
        for s in &self.steps {
            writeln!(
                f,
                "{:>4} {:>10} {:>10} {:>10} {:>10.6} {:>10.6} {:>7.2} {:>4}",
                s.step,
                s.candidates,
                s.samples,
                s.collisions,
                s.empirical_rate,
                s.analytic_rate,
                s.deviation_sigmas,
                if s.within_3_sigma { "yes" } else { "NO" }
            )?;
        }
        Ok(())
    }
}

/// For random credentials under fresh feedback keys, tries every wrong
/// keyword at every step and counts how often the chain still moves to the
/// portfolio the correct keyword leads to. At the last step the correct
/// keyword's successor is computed as if the sequence went on.
pub fn feedback_leak_probe(
    profile: &DeskProfile,
    trials: u64,
    seed: u64,
) -> Result<FeedbackProbeReport, AttackError> {
    let pack = profile.pack()?;
    let set = &pack.set;
    let scheme = profile.scheme();
    let (k, m, n) = (profile.k, profile.m, profile.n);
    let counters = count_vec(trials, seed, 2 * m, |rng, range| {
        let mut c = vec![0u64; 2 * m];
        for i in range {
            let user = format!("probe-{i}");
            let key = FeedbackKey::generate(1, rng);
            let credential = assign_credential(&user, set, &scheme, &key, rng)?;
            let visited: Vec<PortfolioId> = credential.portfolio_ids();
            let ordinals = credential.ordinals();
            for s in 0..m {
                if n - s - 1 == 0 {
                    continue;
                }
                let seen = &visited[..=s];
                let true_next = match visited.get(s + 1) {
                    Some(p) => p.clone(),
                    None => next_portfolio(&key, &user, &visited[s], ordinals[s], seen, set)?,
                };
                for wrong in (0..k)
                    .map(Ordinal::from_index)
                    .filter(|&o| o != ordinals[s])
                {
                    let next = next_portfolio(&key, &user, &visited[s], wrong, seen, set)?;
                    c[2 * s] += 1;
                    if next == true_next {
                        c[2 * s + 1] += 1;
                    }
                }
            }
        }
        Ok::<_, AttackError>(c)
    })?;
    let steps = (0..m)
        .filter(|s| n - s - 1 > 0)
        .map(|s| {
            let (samples, collisions) = (counters[2 * s], counters[2 * s + 1]);
            let candidates = n - s - 1;
            let analytic = 1.0 / candidates as f64;
            let empirical = if samples > 0 {
                collisions as f64 / samples as f64
            } else {
                0.0
            };
            let sigma = binomial_sigma(analytic, samples);
            let dev = deviation(empirical, analytic, sigma);
            StepLeak {
                step: s,
                candidates,
                samples,
                collisions,
                empirical_rate: empirical,
                analytic_rate: analytic,
                sigma,
                deviation_sigmas: dev,
                within_3_sigma: dev <= 3.0,
            }
        })
        .collect();
    Ok(FeedbackProbeReport {
        profile: *profile,
        seed,
        trials,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingUniformity {
    pub k: usize,
    pub samples: u64,
    /// Which symbol each keyword slot received, a `k × k` table tested for
    /// independence from uniform (`(k-1)^2` degrees of freedom).
    pub positions: ChiSquare,
    /// Whole permutations, `k!` cells; only for `k <= 6`.
    pub permutations: Option<ChiSquare>,
}

fn permutation_rank(symbols: &[usize]) -> usize {
    // Lehmer code
    let mut rank = 0;
    for (i, &s) in symbols.iter().enumerate() {
        let smaller_after = symbols[i + 1..].iter().filter(|&&t| t < s).count();
        rank = rank * (symbols.len() - i) + smaller_after;
    }
    rank
}

/// Samples `samples` key mappings with the production sampler and tests them
/// for uniformity.
pub fn mapping_uniformity(
    k: usize,
    samples: u64,
    seed: u64,
) -> Result<MappingUniformity, AttackError> {
    let scheme = DeskProfile::new(k, 1).scheme();
    let with_perms = k <= 6;
    let factorial: usize = if with_perms { (1..=k).product() } else { 0 };
    let cells = k * k + if with_perms { factorial } else { 0 };
    let counts = count_vec(samples, seed, cells, |rng, range| {
        let mut c = vec![0u64; cells];
        let mut symbols = vec![0usize; k];
        for _ in range {
            let mapping = sample_key_mapping(&scheme, rng);
            for (ordinal, symbol) in mapping.iter() {
                let s = scheme
                    .alphabet
                    .iter()
                    .position(|&a| a == symbol)
                    .expect("alphabet symbol");
                c[ordinal.index() * k + s] += 1;
                symbols[ordinal.index()] = s;
            }
            if with_perms {
                c[k * k + permutation_rank(&symbols)] += 1;
            }
        }
        Ok::<_, AttackError>(c)
    })?;
    let expected = samples as f64 / k as f64;
    let df = ((k - 1) * (k - 1)).max(1) as f64;
    let positions = chi_square(&counts[..k * k], &vec![expected; k * k], df);
    let permutations = with_perms.then(|| {
        chi_square(
            &counts[k * k..],
            &vec![samples as f64 / factorial as f64; factorial],
            (factorial - 1).max(1) as f64,
        )
    });
    Ok(MappingUniformity {
        k,
        samples,
        positions,
        permutations,
    })
}
