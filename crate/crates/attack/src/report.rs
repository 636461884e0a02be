use std::fmt;

use serde::Serialize;

use crate::profile::DeskProfile;
use crate::stats::{binomial_sigma, deviation, wilson_interval};

/// Empirical success of one attacker model next to its closed form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackReport {
    pub model: String,
    pub profile: DeskProfile,
    pub observed_sessions: Option<usize>,
    pub attempts_per_trial: u32,
    pub seed: u64,
    pub trials: u64,
    pub successes: u64,
    /// `None` for analytic-only rows.
    pub empirical_rate: Option<f64>,
    pub analytic_rate: f64,
    /// Binomial standard deviation of the empirical rate under the analytic
    /// rate.
    pub sigma: Option<f64>,
    /// `|empirical - analytic| / sigma`.
    pub deviation_sigmas: Option<f64>,
    /// 95% Wilson interval on the empirical rate.
    pub ci95: Option<(f64, f64)>,
    pub within_3_sigma: Option<bool>,
}

impl AttackReport {
    pub fn new(
        model: &str,
        profile: DeskProfile,
        seed: u64,
        trials: u64,
        successes: u64,
        analytic_rate: f64,
    ) -> Self {
        let mut r = Self::analytic(model, profile, analytic_rate);
        r.seed = seed;
        r.trials = trials;
        r.successes = successes;
        if trials > 0 {
            let empirical = successes as f64 / trials as f64;
            let sigma = binomial_sigma(analytic_rate, trials);
            let dev = deviation(empirical, analytic_rate, sigma);
            r.empirical_rate = Some(empirical);
            r.sigma = Some(sigma);
            r.deviation_sigmas = Some(dev);
            r.ci95 = Some(wilson_interval(successes, trials, 1.959_963_984_540_054));
            r.within_3_sigma = Some(dev <= 3.0);
        }
        r
    }

    /// A closed-form row for a configuration too large to simulate.
    pub fn analytic(model: &str, profile: DeskProfile, analytic_rate: f64) -> Self {
        Self {
            model: model.to_owned(),
            profile,
            observed_sessions: None,
            attempts_per_trial: 1,
            seed: 0,
            trials: 0,
            successes: 0,
            empirical_rate: None,
            analytic_rate,
            sigma: None,
            deviation_sigmas: None,
            ci95: None,
            within_3_sigma: None,
        }
    }

    pub fn observed(mut self, sessions: usize) -> Self {
        self.observed_sessions = Some(sessions);
        self
    }

    pub fn attempts(mut self, attempts: u32) -> Self {
        self.attempts_per_trial = attempts;
        self
    }

    pub fn table<'a>(reports: impl IntoIterator<Item = &'a AttackReport>) -> String {
        let mut out = format!(
            "{:<22} {:<12} {:>4} {:>4} {:>9} {:>9} {:>12} {:>12} {:>7} {:>5}\n",
            "model",
            "profile",
            "obs",
            "att",
            "trials",
            "hits",
            "empirical",
            "analytic",
            "sigmas",
            "ok"
        );
        for r in reports {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }
}

fn rate(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

impl fmt::Display for AttackReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<22} {:<12} {:>4} {:>4} {:>9} {:>9} {:>12} {:>12.6e} {:>7} {:>5}",
            self.model,
            self.profile.to_string(),
            self.observed_sessions
                .map_or_else(|| "-".into(), |o| o.to_string()),
            self.attempts_per_trial,
            self.trials,
            self.successes,
            rate(self.empirical_rate),
            self.analytic_rate,
            self.deviation_sigmas
                .map_or_else(|| "-".into(), |d| format!("{d:.2}")),
            match self.within_3_sigma {
                Some(true) => "yes",
                Some(false) => "NO",
                None => "-",
            }
        )
    }
}
