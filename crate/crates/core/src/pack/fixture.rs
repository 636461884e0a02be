//! Deterministic synthetic packs for tests, demos and attack simulations.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{EntryManifest, PackBundle, PackManifest, PortfolioManifest};

pub const FIXTURE_CATEGORIES: [&str; 18] = [
    "animals",
    "fruits",
    "flowers",
    "vehicles",
    "instruments",
    "birds",
    "tools",
    "sports",
    "countries",
    "vegetables",
    "furniture",
    "clothing",
    "insects",
    "weather",
    "kitchen",
    "trees",
    "gems",
    "fish",
];

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "st", "pl",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "l", "s", "m"];

fn pronounceable_word<R: Rng>(rng: &mut R) -> String {
    let syllables = rng.random_range(2..=3);
    let mut word = String::new();
    for _ in 0..syllables {
        word.push_str(ONSETS.choose(rng).unwrap());
        word.push_str(VOWELS.choose(rng).unwrap());
    }
    word.push_str(CODAS.choose(rng).unwrap());
    word
}

fn tile_png<R: Rng>(rng: &mut R, ordinal: u32) -> Vec<u8> {
    let bg = Rgb([rng.random(), rng.random(), rng.random()]);
    let fg = Rgb([255 - bg.0[0], 255 - bg.0[1], 255 - bg.0[2]]);
    let stride = 2 + ordinal % 5;
    let img = RgbImage::from_fn(16, 16, |x, y| {
        if (x + y * (ordinal % 3 + 1)) % stride == 0 {
            fg
        } else {
            bg
        }
    });
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("png encoding to memory");
    out.into_inner()
}

/// Builds a valid pack of `n` portfolios with `k` keywords each. The same
/// `(seed, n, k)` always yields byte-identical output. Keywords are unique
/// across the whole pack and entries are laid out in shuffled order.
pub fn generate_fixture(seed: u64, n: usize, k: usize) -> PackBundle {
    assert!(n >= 1 && k >= 1 && k <= u16::MAX as usize);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut used = BTreeSet::new();
    let mut images = BTreeMap::new();
    let mut portfolios = Vec::with_capacity(n);
    for p in 0..n {
        let category = FIXTURE_CATEGORIES[p % FIXTURE_CATEGORIES.len()];
        let round = p / FIXTURE_CATEGORIES.len();
        let id = if round == 0 {
            format!("p{:02}-{category}", p + 1)
        } else {
            format!("p{:02}-{category}-{round}", p + 1)
        };
        let mut entries = Vec::with_capacity(k);
        for ordinal in 1..=k as u32 {
            let keyword = loop {
                let w = pronounceable_word(&mut rng);
                if used.insert(w.clone()) {
                    break w;
                }
            };
            let image = format!("{id}-{ordinal:02}.png");
            images.insert(image.clone(), tile_png(&mut rng, ordinal));
            entries.push(EntryManifest {
                fact: format!("The {keyword} is entry {ordinal} of the {category} portfolio."),
                keyword,
                ordinal,
                image,
            });
        }
        entries.shuffle(&mut rng);
        portfolios.push(PortfolioManifest {
            id,
            category: capitalize(category),
            entries,
        });
    }
    PackBundle {
        manifest: PackManifest {
            version: 1,
            portfolios,
        },
        images,
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        assert_eq!(generate_fixture(42, 18, 26), generate_fixture(42, 18, 26));
        assert_ne!(generate_fixture(42, 3, 4), generate_fixture(43, 3, 4));
    }

    #[test]
    fn shapes() {
        let b = generate_fixture(1, 20, 5);
        assert_eq!(b.manifest.portfolios.len(), 20);
        assert!(b.manifest.portfolios.iter().all(|p| p.entries.len() == 5));
        assert_eq!(b.images.len(), 100);
        assert_eq!(b.manifest.portfolios[18].id, "p19-animals-1");
    }
}
