//! Password-space arithmetic for a `(k, m)` configuration.

use serde::Serialize;

/// `m · log2(k)` bits: `m` independent uniform choices among `k` keywords.
pub fn theoretical_entropy(k: usize, m: usize) -> f64 {
    assert!(k >= 1 && m >= 1, "k and m must be positive");
    m as f64 * (k as f64).log2()
}

/// Success probability of one uniformly random online guess, `k^-m`.
pub fn guess_probability(k: usize, m: usize) -> f64 {
    (k as f64).powi(-(m as i32))
}

/// Success probability of `attempts` independent uniform guesses,
/// `1 - (1 - p)^attempts`. Never exceeds `attempts · p`.
pub fn campaign_success_probability(k: usize, m: usize, attempts: u32) -> f64 {
    let p = guess_probability(k, m);
    -(f64::from(attempts) * (-p).ln_1p()).exp_m1()
}

/// Probability of guessing the ordered first `depth` portfolios out of `n`:
/// `1 / (n · (n-1) · … · (n-depth+1))`.
pub fn portfolio_prefix_probability(n: usize, depth: usize) -> f64 {
    assert!(depth <= n, "depth exceeds portfolio count");
    (0..depth).map(|i| 1.0 / (n - i) as f64).product()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyRow {
    pub k: usize,
    pub m: usize,
    pub bits: f64,
    pub guess_probability: f64,
    /// Upper bound on one account's compromise under lockout,
    /// `min(1, attempts · k^-m)`.
    pub lockout_bound: Option<f64>,
    pub meets_target: Option<bool>,
}

impl EntropyRow {
    pub fn new(
        k: usize,
        m: usize,
        lockout_attempts: Option<u32>,
        target_bits: Option<f64>,
    ) -> Self {
        let bits = theoretical_entropy(k, m);
        let p = guess_probability(k, m);
        Self {
            k,
            m,
            bits,
            guess_probability: p,
            lockout_bound: lockout_attempts.map(|a| (f64::from(a) * p).min(1.0)),
            meets_target: target_bits.map(|t| bits >= t),
        }
    }
}

/// Every `(k, m)` combination in the given ranges, in `k`-major order.
pub fn entropy_grid(
    ks: impl IntoIterator<Item = usize>,
    ms: impl IntoIterator<Item = usize> + Clone,
    lockout_attempts: Option<u32>,
    target_bits: Option<f64>,
) -> Vec<EntropyRow> {
    ks.into_iter()
        .flat_map(|k| {
            ms.clone()
                .into_iter()
                .map(move |m| EntropyRow::new(k, m, lockout_attempts, target_bits))
        })
        .collect()
}
