//! Consecutive-failure lockout with escalating backoff.

use serde::{Deserialize, Serialize};

use crate::store::record::CredentialRecord;

/// Milliseconds since the Unix epoch.
pub type UnixMillis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LockoutPolicy {
    /// Consecutive failed finalizations that lock the account. 0 disables
    /// lockout.
    pub max_failures: u32,
    /// Lock duration for the first lockout.
    pub base_backoff_secs: u64,
    /// Each further lockout multiplies the duration by this factor.
    pub backoff_multiplier: u32,
    pub max_backoff_secs: u64,
}

impl Default for LockoutPolicy {
    fn default() -> Self {
        Self {
            max_failures: 10,
            base_backoff_secs: 60,
            backoff_multiplier: 2,
            max_backoff_secs: 24 * 60 * 60,
        }
    }
}

impl LockoutPolicy {
    pub fn disabled() -> Self {
        Self {
            max_failures: 0,
            ..Self::default()
        }
    }

    pub fn with_max_failures(max_failures: u32) -> Self {
        Self {
            max_failures,
            ..Self::default()
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.max_failures > 0
    }

    /// Lock duration in milliseconds for the `level`-th lockout (1-based).
    pub fn backoff_millis(&self, level: u32) -> u64 {
        let factor = u64::from(self.backoff_multiplier.max(1))
            .checked_pow(level.saturating_sub(1))
            .unwrap_or(u64::MAX);
        self.base_backoff_secs
            .saturating_mul(factor)
            .min(self.max_backoff_secs)
            .saturating_mul(1000)
    }
}

impl CredentialRecord {
    pub fn is_locked(&self, now: UnixMillis) -> bool {
        self.locked_until.is_some_and(|until| now < until)
    }

    /// Counts a failed finalization. Reaching the policy maximum locks the
    /// account; a failure while locked leaves the counter alone and pushes
    /// the lock horizon out by the next backoff step.
    pub fn record_failure(&mut self, policy: &LockoutPolicy, now: UnixMillis) {
        if !policy.is_enabled() {
            self.failure_count = self.failure_count.saturating_add(1);
            return;
        }
        if self.is_locked(now) {
            self.escalate(policy, now);
            return;
        }
        self.failure_count = self.failure_count.saturating_add(1);
        if self.failure_count >= policy.max_failures {
            self.escalate(policy, now);
        }
    }

    pub fn record_success(&mut self) {
        self.failure_count = 0;
        self.lockout_level = 0;
        self.locked_until = None;
    }

    fn escalate(&mut self, policy: &LockoutPolicy, now: UnixMillis) {
        self.lockout_level = self.lockout_level.saturating_add(1);
        let horizon = now.saturating_add(policy.backoff_millis(self.lockout_level));
        self.locked_until = Some(self.locked_until.map_or(horizon, |t| t.max(horizon)));
    }
}
