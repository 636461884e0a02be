use std::fmt;
use std::str::FromStr;

use cuedr_core::pack::{generate_fixture, LoadedPack, PackError};
use cuedr_core::store::LockoutPolicy;
use cuedr_core::SchemeConfig;
use serde::{Deserialize, Serialize};

pub const DEFAULT_PORTFOLIOS: usize = 18;

/// Seed of the synthetic pack every simulation runs against.
pub const FIXTURE_SEED: u64 = 0x5eed_cafe;

/// A scheme configuration small enough to observe by simulation.
///
/// Written `k<keys>m<length>[n<portfolios>][l<max failures>]`, e.g.
/// `k4m2`, `k4m2l3` or `k26m6n18`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeskProfile {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub lockout: Option<u32>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("profile {input:?}: {reason}")]
pub struct ProfileError {
    pub input: String,
    pub reason: String,
}

impl DeskProfile {
    pub fn new(k: usize, m: usize) -> Self {
        Self {
            k,
            m,
            n: DEFAULT_PORTFOLIOS,
            lockout: None,
        }
    }

    pub fn with_portfolios(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_lockout(mut self, max_failures: u32) -> Self {
        self.lockout = Some(max_failures);
        self
    }

    pub fn alphabet(&self) -> Vec<char> {
        ('a'..='z').take(self.k).collect()
    }

    pub fn scheme(&self) -> SchemeConfig {
        let mut scheme = SchemeConfig::test_profile(self.k, self.m);
        scheme.lockout = match self.lockout {
            Some(max) => LockoutPolicy::with_max_failures(max),
            None => LockoutPolicy::disabled(),
        };
        scheme
    }

    pub fn pack(&self) -> Result<LoadedPack, PackError> {
        generate_fixture(FIXTURE_SEED, self.n, self.k).build(self.k, self.m)
    }

    fn check(self, input: &str) -> Result<Self, ProfileError> {
        let fail = |reason: &str| ProfileError {
            input: input.to_owned(),
            reason: reason.to_owned(),
        };
        if !(1..=26).contains(&self.k) {
            return Err(fail("k must be in 1..=26"));
        }
        if self.m == 0 {
            return Err(fail("m must be positive"));
        }
        if self.n < self.m {
            return Err(fail("n must be at least m"));
        }
        Ok(self)
    }
}

impl fmt::Display for DeskProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k{}m{}n{}", self.k, self.m, self.n)?;
        if let Some(l) = self.lockout {
            write!(f, "l{l}")?;
        }
        Ok(())
    }
}

impl FromStr for DeskProfile {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason: String| ProfileError {
            input: s.to_owned(),
            reason,
        };
        let mut fields: [Option<u64>; 4] = [None; 4];
        let mut rest = s.trim();
        while let Some(tag) = rest.chars().next() {
            let slot = match tag {
                'k' => 0,
                'm' => 1,
                'n' => 2,
                'l' => 3,
                other => return Err(fail(format!("unexpected {other:?}"))),
            };
            let digits = rest[1..].chars().take_while(char::is_ascii_digit).count();
            if digits == 0 {
                return Err(fail(format!("{tag} needs a number")));
            }
            if fields[slot].is_some() {
                return Err(fail(format!("{tag} given twice")));
            }
            let value = rest[1..=digits]
                .parse()
                .map_err(|e| fail(format!("{tag}: {e}")))?;
            fields[slot] = Some(value);
            rest = &rest[1 + digits..];
        }
        let (Some(k), Some(m)) = (fields[0], fields[1]) else {
            return Err(fail("k and m are required".into()));
        };
        let lockout = fields[3]
            .map(|l| u32::try_from(l).map_err(|_| fail("l too large".into())))
            .transpose()?;
        DeskProfile {
            k: k as usize,
            m: m as usize,
            n: fields[2].map_or(DEFAULT_PORTFOLIOS, |n| n as usize),
            lockout,
        }
        .check(s)
    }
}
