//! Fixed-window request counters keyed by user id or source address.

use std::collections::HashMap;
use std::sync::Mutex;

use cuedr_core::store::UnixMillis;

const WINDOW_MILLIS: u64 = 60_000;

#[derive(Debug)]
pub struct RateLimiter {
    per_window: u32,
    windows: Mutex<HashMap<String, (UnixMillis, u32)>>,
}

impl RateLimiter {
    /// `per_minute == 0` disables the limiter.
    pub fn per_minute(per_window: u32) -> Self {
        Self {
            per_window,
            windows: Mutex::new(HashMap::new()),
        }
    }

    /// Counts one request for `key`; `false` once the window's budget is
    /// spent.
    pub fn allow(&self, key: &str, now: UnixMillis) -> bool {
        if self.per_window == 0 {
            return true;
        }
        let mut windows = self.windows.lock().expect("limiter poisoned");
        if windows.len() > 100_000 {
            windows.retain(|_, (start, _)| now.saturating_sub(*start) < WINDOW_MILLIS);
        }
        let slot = windows.entry(key.to_owned()).or_insert((now, 0));
        if now.saturating_sub(slot.0) >= WINDOW_MILLIS {
            *slot = (now, 0);
        }
        slot.1 = slot.1.saturating_add(1);
        slot.1 <= self.per_window
    }

    /// Seconds until `key`'s window resets.
    pub fn retry_after_secs(&self, key: &str, now: UnixMillis) -> u64 {
        let windows = self.windows.lock().expect("limiter poisoned");
        windows.get(key).map_or(0, |(start, _)| {
            (start + WINDOW_MILLIS).saturating_sub(now).div_ceil(1000)
        })
    }
}
