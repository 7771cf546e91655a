//! Precomputed vector stores, as JSONL or the binary `SPEV` layout:
//! magic `SPEV`, u32 LE dimension, then per record a u32 LE id length,
//! the UTF-8 id, and `dimension` f32 LE values.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{read_jsonl, write_jsonl, Episode};
use crate::error::{Error, Result};

use super::EmbeddingProvider;

pub const SPEV_MAGIC: &[u8; 4] = b"SPEV";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub episode_id: String,
    pub vector: Vec<f64>,
}

pub fn write_store_jsonl(path: impl AsRef<Path>, records: &[StoreRecord]) -> Result<()> {
    write_jsonl(path, records)
}

pub fn write_store_spev(path: impl AsRef<Path>, records: &[StoreRecord]) -> Result<()> {
    let path = path.as_ref();
    let dim = records.first().map_or(0, |r| r.vector.len());
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(SPEV_MAGIC)?;
    put(&(dim as u32).to_le_bytes())?;
    for r in records {
        if r.vector.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.vector.len(),
            });
        }
        put(&(r.episode_id.len() as u32).to_le_bytes())?;
        put(r.episode_id.as_bytes())?;
        for &x in &r.vector {
            put(&(x as f32).to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn decode_spev(bytes: &[u8]) -> Result<Vec<StoreRecord>> {
    let truncated = || Error::Provider("truncated SPEV store".into());
    let mut pos = 4;
    let mut take = |n: usize| -> Result<&[u8]> {
        let slice = bytes.get(pos..pos + n).ok_or_else(truncated)?;
        pos += n;
        Ok(slice)
    };
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
    let dim = u32_at(take(4)?);
    let mut records = Vec::new();
    loop {
        let Ok(len) = take(4) else { break };
        let len = u32_at(len);
        let id = std::str::from_utf8(take(len)?)
            .map_err(|_| Error::Provider("SPEV id is not UTF-8".into()))?
            .to_string();
        let raw = take(dim * 4)?;
        let vector = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        records.push(StoreRecord {
            episode_id: id,
            vector,
        });
    }
    Ok(records)
}

/// Read a store, detecting the binary form by its magic bytes.
pub fn read_store(path: impl AsRef<Path>) -> Result<Vec<StoreRecord>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(SPEV_MAGIC) {
        decode_spev(&bytes)
    } else {
        read_jsonl(path).map_err(|e| Error::Provider(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct FileProvider {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl FileProvider {
    pub fn open(path: impl AsRef<Path>, dimension: usize) -> Result<Self> {
        let path = path.as_ref();
        let records = read_store(path).map_err(|e| match e {
            Error::Io { path, source } => Error::Provider(format!("{}: {source}", path.display())),
            other => other,
        })?;
        Self::from_records(records, dimension)
    }

    pub fn from_records(records: Vec<StoreRecord>, dimension: usize) -> Result<Self> {
        let mut vectors = HashMap::with_capacity(records.len());
        for r in records {
            if r.vector.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: r.vector.len(),
                });
            }
            if vectors.insert(r.episode_id.clone(), r.vector).is_some() {
                return Err(Error::Provider(format!(
                    "duplicate episode {} in store",
                    r.episode_id
                )));
            }
        }
        Ok(FileProvider { dimension, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl EmbeddingProvider for FileProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn batch_size(&self) -> usize {
        usize::MAX
    }

    fn embed_raw(&self, episodes: &[&Episode]) -> Result<Vec<Vec<f64>>> {
        episodes
            .iter()
            .map(|e| {
                self.vectors
                    .get(&e.episode_id)
                    .cloned()
                    .ok_or_else(|| Error::Provider(format!("unknown episode {}", e.episode_id)))
            })
            .collect()
    }
}
