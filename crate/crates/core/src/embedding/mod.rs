//! Episode embeddings: the provider contract plus similarity and pooling.
//!
//! Every provider maps an episode to a fixed-dimension vector. The harness
//! validates and normalizes whatever comes back, so downstream code can rely
//! on finite unit vectors of the advertised dimension.

mod mock;
mod remote;
mod store;

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Episode;
use crate::error::{Error, Result};

pub use mock::{mock_embed, unit_hash_vector, MockProvider, DEFAULT_AUTHOR_WEIGHT};
pub use remote::{EmbedRequest, EmbedResponse, ErrorResponse, RemoteProvider};
pub use store::{
    read_store, write_store_jsonl, write_store_spev, FileProvider, StoreRecord, SPEV_MAGIC,
};

pub const DEFAULT_DIMENSION: usize = 512;
pub const RENORMALIZE_TOLERANCE: f64 = 1e-4;
pub const MIN_NORM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector(values)
    }

    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector(vec![0.0; dim])
    }

    /// Standard basis vector `e_i`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        EmbeddingVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        EmbeddingVector(self.0.iter().map(|x| x * c).collect())
    }
}

impl Index<usize> for EmbeddingVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn dot(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            actual: v.dim(),
        });
    }
    Ok(u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum())
}

/// Coordinate-wise mean. The result is not renormalized.
pub fn mean_pool(vectors: &[EmbeddingVector]) -> Result<EmbeddingVector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot pool an empty set of vectors".into()))?;
    let dim = first.dim();
    let mut acc = vec![0.0; dim];
    for v in vectors {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.dim(),
            });
        }
        for (a, x) in acc.iter_mut().zip(&v.0) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    Ok(EmbeddingVector(acc.into_iter().map(|a| a / n).collect()))
}

/// Check a raw provider output and bring it onto the unit sphere.
pub fn normalize_output(raw: Vec<f64>, dimension: usize, id: &str) -> Result<EmbeddingVector> {
    if raw.len() != dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            actual: raw.len(),
        });
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::Provider(format!("non-finite vector for {id}")));
    }
    let v = EmbeddingVector(raw);
    let norm = v.norm();
    if norm < MIN_NORM {
        return Err(Error::Provider(format!(
            "near-zero vector for {id} (norm {norm:e})"
        )));
    }
    if (norm - 1.0).abs() > RENORMALIZE_TOLERANCE {
        Ok(v.scaled(1.0 / norm))
    } else {
        Ok(v)
    }
}

/// Something that turns episodes into raw vectors of a fixed dimension.
///
/// Implementations must be safe to call from several threads at once.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// Preferred number of episodes per call.
    fn batch_size(&self) -> usize {
        64
    }

    /// Raw vectors, one per episode and in the same order.
    fn embed_raw(&self, episodes: &[&Episode]) -> Result<Vec<Vec<f64>>>;
}

/// Embed episodes in provider-sized batches; outputs are validated unit vectors.
pub fn embed_episodes(
    provider: &dyn EmbeddingProvider,
    episodes: &[&Episode],
) -> Result<Vec<EmbeddingVector>> {
    let dim = provider.dimension();
    let mut out = Vec::with_capacity(episodes.len());
    for batch in episodes.chunks(provider.batch_size().max(1)) {
        let raw = provider.embed_raw(batch)?;
        if raw.len() != batch.len() {
            return Err(Error::Provider(format!(
                "provider returned {} vectors for {} episodes",
                raw.len(),
                batch.len()
            )));
        }
        for (v, e) in raw.into_iter().zip(batch) {
            out.push(normalize_output(v, dim, &e.episode_id)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    File,
    Remote,
}

impl FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mock" => Ok(ProviderKind::Mock),
            "file" => Ok(ProviderKind::File),
            "remote" => Ok(ProviderKind::Remote),
            other => Err(Error::InvalidInput(format!(
                "unknown provider kind {other:?}"
            ))),
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Mock => "mock",
            ProviderKind::File => "file",
            ProviderKind::Remote => "remote",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub kind: ProviderKind,
    pub dimension: usize,
    /// Store path for `file`, base URL for `remote`.
    pub location: Option<String>,
    pub batch_size: usize,
    pub mock_seed: u64,
    pub author_weight: f64,
}

impl ProviderSpec {
    pub fn mock(dimension: usize, seed: u64) -> Self {
        ProviderSpec {
            kind: ProviderKind::Mock,
            dimension,
            location: None,
            batch_size: 64,
            mock_seed: seed,
            author_weight: DEFAULT_AUTHOR_WEIGHT,
        }
    }

    pub fn file(path: impl Into<String>, dimension: usize) -> Self {
        ProviderSpec {
            kind: ProviderKind::File,
            location: Some(path.into()),
            ..ProviderSpec::mock(dimension, 0)
        }
    }

    pub fn remote(url: impl Into<String>, dimension: usize) -> Self {
        ProviderSpec {
            kind: ProviderKind::Remote,
            location: Some(url.into()),
            ..ProviderSpec::mock(dimension, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch_size must be at least 1".into()));
        }
        if self.kind != ProviderKind::Mock && self.location.is_none() {
            return Err(Error::InvalidInput(format!(
                "{} provider needs a location",
                self.kind
            )));
        }
        if !(0.0..=1.0).contains(&self.author_weight) {
            return Err(Error::InvalidInput(
                "mock author weight must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        self.validate()?;
        let location = self.location.as_deref().unwrap_or_default();
        Ok(match self.kind {
            ProviderKind::Mock => Box::new(
                MockProvider::new(self.dimension, self.mock_seed)
                    .with_author_weight(self.author_weight),
            ),
            ProviderKind::File => Box::new(FileProvider::open(location, self.dimension)?),
            ProviderKind::Remote => Box::new(RemoteProvider::new(
                location,
                self.dimension,
                self.batch_size,
            )),
        })
    }
}
