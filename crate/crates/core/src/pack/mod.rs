//! Portfolio packs on disk.
//!
//! A pack is a directory holding `pack.toml` and an `images/` directory:
//!
//! ```toml
//! version = 1
//!
//! [[portfolio]]
//! id = "p01-animals"
//! category = "Animals"
//!
//! [[portfolio.entry]]
//! keyword = "zebra"
//! ordinal = 2
//! fact = "Each zebra has a unique pattern of stripes."
//! image = "zebra.png"
//! ```
//!
//! Entry order in the manifest is the on-screen layout order.

mod fixture;
mod validate;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use fixture::{generate_fixture, FIXTURE_CATEGORIES};
pub use validate::{validate, validate_dir, Diagnostic, ValidationReport, FACT_MAX_CHARS};

use crate::portfolio::{KeywordEntry, Ordinal, Portfolio, PortfolioId, PortfolioSet};

pub const MANIFEST_FILE: &str = "pack.toml";
pub const IMAGES_DIR: &str = "images";

#[derive(Debug, Error)]
pub enum PackError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("manifest is not valid: {0}")]
    Manifest(String),
    #[error("pack has {} diagnostics", .0.len())]
    Invalid(Vec<Diagnostic>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackManifest {
    pub version: u64,
    #[serde(rename = "portfolio", default)]
    pub portfolios: Vec<PortfolioManifest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioManifest {
    pub id: String,
    pub category: String,
    #[serde(rename = "entry", default)]
    pub entries: Vec<EntryManifest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryManifest {
    pub keyword: String,
    pub ordinal: u32,
    pub fact: String,
    pub image: String,
}

impl PackManifest {
    pub fn parse(text: &str) -> Result<Self, PackError> {
        toml::from_str(text).map_err(|e| PackError::Manifest(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }
}

/// A manifest plus the bytes of the images it references (missing images
/// are simply absent from `images`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackBundle {
    pub manifest: PackManifest,
    pub images: BTreeMap<String, Vec<u8>>,
}

impl PackBundle {
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, PackError> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest_path).map_err(|source| PackError::Io {
            path: manifest_path,
            source,
        })?;
        let manifest = PackManifest::parse(&text)?;
        let mut images = BTreeMap::new();
        for entry in manifest.portfolios.iter().flat_map(|p| &p.entries) {
            if !validate::is_safe_file_name(&entry.image) || images.contains_key(&entry.image) {
                continue;
            }
            let path = dir.join(IMAGES_DIR).join(&entry.image);
            match fs::read(&path) {
                Ok(bytes) => {
                    images.insert(entry.image.clone(), bytes);
                }
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(source) => return Err(PackError::Io { path, source }),
            }
        }
        Ok(Self { manifest, images })
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), PackError> {
        let dir = dir.as_ref();
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| PackError::Io { path, source }
        };
        let images_dir = dir.join(IMAGES_DIR);
        fs::create_dir_all(&images_dir).map_err(io_err(&images_dir))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        fs::write(&manifest_path, self.manifest.to_toml()).map_err(io_err(&manifest_path))?;
        for (name, bytes) in &self.images {
            let path = images_dir.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        Ok(())
    }

    /// Validates the bundle and builds the runtime portfolio set with
    /// content-addressed assets.
    pub fn build(
        &self,
        keywords_per_portfolio: usize,
        min_portfolios: usize,
    ) -> Result<LoadedPack, PackError> {
        let report = validate(self, keywords_per_portfolio, min_portfolios);
        if !report.is_clean() {
            return Err(PackError::Invalid(report.diagnostics));
        }
        let mut assets = BTreeMap::new();
        let mut refs = BTreeMap::new();
        for (name, bytes) in &self.images {
            let ext = name
                .rsplit_once('.')
                .map_or("bin", |(_, e)| e)
                .to_ascii_lowercase();
            let asset_ref = format!("{}.{ext}", hex::encode(Sha256::digest(bytes)));
            refs.insert(name.as_str(), asset_ref.clone());
            assets.insert(
                asset_ref,
                Asset {
                    content_type: content_type_for(&ext),
                    bytes: Arc::from(bytes.as_slice()),
                },
            );
        }
        let portfolios = self
            .manifest
            .portfolios
            .iter()
            .map(|p| {
                let entries = p
                    .entries
                    .iter()
                    .map(|e| KeywordEntry {
                        keyword: e.keyword.clone(),
                        ordinal: Ordinal::new(e.ordinal as u16).expect("validated ordinal"),
                        fact: e.fact.clone(),
                        image_ref: refs[e.image.as_str()].clone(),
                    })
                    .collect();
                Portfolio::new(PortfolioId::new(p.id.clone()), p.category.clone(), entries)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PackError::Manifest(e.to_string()))?;
        let set = PortfolioSet::new(portfolios).map_err(|e| PackError::Manifest(e.to_string()))?;
        Ok(LoadedPack {
            version: self.manifest.version,
            set,
            assets,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Asset {
    pub content_type: &'static str,
    pub bytes: Arc<[u8]>,
}

#[derive(Debug, Clone)]
pub struct LoadedPack {
    pub version: u64,
    pub set: PortfolioSet,
    /// Keyed by content hash plus extension.
    pub assets: BTreeMap<String, Asset>,
}

fn content_type_for(ext: &str) -> &'static str {
    match ext {
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        _ => "application/octet-stream",
    }
}
