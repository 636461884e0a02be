//! Request and response documents. Responses use the media type
//! [`MEDIA_TYPE`].

use std::collections::BTreeMap;

use cuedr_core::{Challenge, KeywordEntry, Mode, Portfolio};
use serde::{Deserialize, Serialize};

pub const MEDIA_TYPE: &str = "application/vnd.cuedr.v1+json";
pub const SESSION_HEADER: &str = "x-cuedr-session";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartRequest {
    pub user_id: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyRequest {
    pub key: String,
}

/// Admin pack upload: the manifest text and every image, base64-encoded.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackUpload {
    pub manifest: String,
    pub images: BTreeMap<String, String>,
}

/// One portfolio render. Entries keep the pack's layout order; `key` is the
/// symbol bound to that keyword for this render only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChallengeView {
    pub session_id: String,
    pub mode: Mode,
    pub step: usize,
    pub total_steps: usize,
    pub portfolio: PortfolioView,
    pub input: InputSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PortfolioView {
    pub id: String,
    pub category: String,
    pub entries: Vec<EntryView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntryView {
    pub keyword: String,
    pub ordinal: u16,
    pub fact: String,
    pub image_url: String,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputSpec {
    pub kind: &'static str,
    pub max_length: usize,
    pub masked: bool,
}

impl InputSpec {
    pub fn single_masked() -> Self {
        Self {
            kind: "single_character",
            max_length: 1,
            masked: true,
        }
    }
}

impl ChallengeView {
    pub fn new(
        session_id: &str,
        mode: Mode,
        total_steps: usize,
        portfolio: &Portfolio,
        challenge: &Challenge,
    ) -> Self {
        let entries = portfolio
            .entries()
            .iter()
            .map(|e| EntryView {
                keyword: e.keyword.clone(),
                ordinal: e.ordinal.get(),
                fact: e.fact.clone(),
                image_url: asset_url(&e.image_ref),
                key: challenge
                    .mapping
                    .symbol_for(e.ordinal)
                    .expect("mapping covers every ordinal")
                    .to_string(),
            })
            .collect();
        Self {
            session_id: session_id.to_owned(),
            mode,
            step: challenge.step,
            total_steps,
            portfolio: PortfolioView {
                id: portfolio.id().to_string(),
                category: portfolio.category().to_owned(),
                entries,
            },
            input: InputSpec::single_masked(),
        }
    }

    /// The symbol currently bound to `keyword`, if it is on screen.
    pub fn key_for(&self, keyword: &str) -> Option<char> {
        self.portfolio
            .entries
            .iter()
            .find(|e| e.keyword == keyword)
            .and_then(|e| e.key.chars().next())
    }
}

/// Registration study screen: the assigned keyword and all of its cues.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StudyView {
    pub session_id: String,
    pub step: usize,
    pub total_steps: usize,
    pub portfolio_id: String,
    pub category: String,
    pub keyword: String,
    pub ordinal: u16,
    pub fact: String,
    pub image_url: String,
}

impl StudyView {
    pub fn new(
        session_id: &str,
        step: usize,
        total_steps: usize,
        portfolio: &Portfolio,
        entry: &KeywordEntry,
    ) -> Self {
        Self {
            session_id: session_id.to_owned(),
            step,
            total_steps,
            portfolio_id: portfolio.id().to_string(),
            category: portfolio.category().to_owned(),
            keyword: entry.keyword.clone(),
            ordinal: entry.ordinal.get(),
            fact: entry.fact.clone(),
            image_url: asset_url(&entry.image_ref),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepView {
    Challenge { challenge: ChallengeView },
    AwaitingFinalize { session_id: String, entered: usize },
    Registered { user_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FinalizeView {
    pub authenticated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PackInfo {
    pub pack_version: u64,
    pub manifest_version: u64,
    pub portfolios: usize,
    pub keywords_per_portfolio: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HealthView {
    pub status: &'static str,
    pub pack_version: u64,
    pub manifest_version: u64,
    pub portfolios: usize,
    pub keywords_per_portfolio: usize,
    pub sequence_length: usize,
    pub active_sessions: usize,
}

pub fn asset_url(asset_ref: &str) -> String {
    format!("/assets/{asset_ref}")
}
