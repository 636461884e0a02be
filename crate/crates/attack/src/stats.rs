//! Binomial and chi-square helpers for comparing simulations with their
//! closed forms.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Standard deviation of a binomial proportion with rate `p` over `n` trials.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `|observed - expected|` in units of `sigma`. Zero sigma (a certain or
/// impossible event) gives 0 on exact agreement and infinity otherwise.
pub fn deviation(observed: f64, expected: f64, sigma: f64) -> f64 {
    let diff = (observed - expected).abs();
    if sigma > 0.0 {
        diff / sigma
    } else if diff <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoProportion {
    pub z: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Pooled two-proportion z-test.
pub fn two_proportion_test(s1: u64, n1: u64, s2: u64, n2: u64) -> TwoProportion {
    let p1 = s1 as f64 / n1 as f64;
    let p2 = s2 as f64 / n2 as f64;
    let pooled = (s1 + s2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        let z = if p1 == p2 { 0.0 } else { f64::INFINITY };
        return TwoProportion {
            z,
            p_value: if p1 == p2 { 1.0 } else { 0.0 },
        };
    }
    let z = (p1 - p2) / se;
    TwoProportion {
        z,
        p_value: 2.0 * Normal::standard().sf(z.abs()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
}

impl ChiSquare {
    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Pearson statistic for `observed` counts against `expected` counts.
pub fn chi_square(observed: &[u64], expected: &[f64], degrees_of_freedom: f64) -> ChiSquare {
    assert_eq!(observed.len(), expected.len());
    let statistic = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let p_value = ChiSquared::new(degrees_of_freedom)
        .expect("positive degrees of freedom")
        .sf(statistic);
    ChiSquare {
        statistic,
        degrees_of_freedom,
        p_value,
    }
}
