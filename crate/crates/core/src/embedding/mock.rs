//! Deterministic stand-in encoder for hermetic tests.
//!
//! An episode maps to `unit(a * u_author + (1 - a) * u_text)`, where both
//! components are pseudo-random unit vectors keyed by a hash. Each component
//! is drawn as follows, so the construction can be reproduced elsewhere:
//!
//! 1. `key = SHA-256("{seed}\x1f{tag}\x1f{payload}")`, state = first 8 bytes (LE)
//! 2. SplitMix64 stream from that state; each output `x` becomes the uniform
//!    `((x >> 11) + 1) * 2^-53` in `(0, 1]`
//! 3. Box-Muller on consecutive uniform pairs gives Gaussian coordinates
//! 4. normalize
//!
//! `tag` is `author` (payload: author id) or `text` (payload: the episode's
//! document texts joined with U+001E).

use sha2::{Digest, Sha256};

use crate::corpus::Episode;
use crate::error::Result;
use crate::par;
use crate::seed::splitmix64;

use super::{EmbeddingProvider, EmbeddingVector};

pub const DEFAULT_AUTHOR_WEIGHT: f64 = 0.8;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn unit_hash_vector(seed: u64, tag: &str, payload: &str, dimension: usize) -> Vec<f64> {
    let digest = Sha256::digest(format!("{seed}\x1f{tag}\x1f{payload}").as_bytes());
    let mut state = u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"));
    let mut uniform = || {
        // splitmix64 adds the gamma itself; track the pre-image counter here
        let x = splitmix64(state);
        state = state.wrapping_add(GOLDEN_GAMMA);
        ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    };
    let mut v = Vec::with_capacity(dimension + 1);
    while v.len() < dimension {
        let (u1, u2) = (uniform(), uniform());
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        v.push(r * theta.cos());
        v.push(r * theta.sin());
    }
    v.truncate(dimension);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        v[0] = 1.0;
    }
    v
}

pub fn mock_embed(episode: &Episode, dimension: usize, seed: u64) -> EmbeddingVector {
    mock_embed_weighted(episode, dimension, seed, DEFAULT_AUTHOR_WEIGHT)
}

pub(crate) fn mock_embed_weighted(
    episode: &Episode,
    dimension: usize,
    seed: u64,
    author_weight: f64,
) -> EmbeddingVector {
    let author = unit_hash_vector(seed, "author", &episode.author_id, dimension);
    let text = unit_hash_vector(seed, "text", &episode.texts().join("\u{1e}"), dimension);
    let mixed: Vec<f64> = author
        .iter()
        .zip(&text)
        .map(|(a, t)| author_weight * a + (1.0 - author_weight) * t)
        .collect();
    let norm = mixed.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return EmbeddingVector(author);
    }
    EmbeddingVector(mixed.into_iter().map(|x| x / norm).collect())
}

#[derive(Debug, Clone)]
pub struct MockProvider {
    dimension: usize,
    seed: u64,
    author_weight: f64,
}

impl MockProvider {
    pub fn new(dimension: usize, seed: u64) -> Self {
        MockProvider {
            dimension,
            seed,
            author_weight: DEFAULT_AUTHOR_WEIGHT,
        }
    }

    pub fn with_author_weight(mut self, author_weight: f64) -> Self {
        self.author_weight = author_weight;
        self
    }

    pub fn embed(&self, episode: &Episode) -> EmbeddingVector {
        mock_embed_weighted(episode, self.dimension, self.seed, self.author_weight)
    }
}

impl EmbeddingProvider for MockProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn batch_size(&self) -> usize {
        usize::MAX
    }

    fn embed_raw(&self, episodes: &[&Episode]) -> Result<Vec<Vec<f64>>> {
        Ok(par::map(episodes, |e| self.embed(e).0))
    }
}
