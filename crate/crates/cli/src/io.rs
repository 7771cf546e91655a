use std::path::Path;

use anyhow::Context as _;
use serde::{Deserialize, Serialize};

use styleprobe::corpus::read_jsonl;

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn print_json<T: Serialize + ?Sized>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Read a JSONL file, naming the file in any error.
pub fn load_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    read_jsonl(path).with_context(|| format!("reading {}", path.display()))
}

/// A document for TF-IDF work: explicit `tokens`, or `text` split on whitespace.
#[derive(Debug, Clone, Deserialize)]
pub struct TokenRecord {
    pub doc_id: String,
    #[serde(default)]
    pub author_id: Option<String>,
    #[serde(default)]
    pub timestamp: i64,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub tokens: Option<Vec<String>>,
}

impl TokenRecord {
    pub fn token_list(&self) -> anyhow::Result<Vec<String>> {
        match (&self.tokens, &self.text) {
            (Some(t), _) => Ok(t.clone()),
            (None, Some(text)) => Ok(text.split_whitespace().map(String::from).collect()),
            (None, None) => anyhow::bail!("document {} has neither tokens nor text", self.doc_id),
        }
    }
}

pub fn load_token_records(path: &Path) -> anyhow::Result<Vec<TokenRecord>> {
    let records: Vec<TokenRecord> = load_jsonl(path)?;
    anyhow::ensure!(
        !records.is_empty(),
        "{} contains no documents",
        path.display()
    );
    Ok(records)
}

/// Byte spans of the whitespace-separated tokens of `text`.
pub fn whitespace_spans(text: &str) -> Vec<(usize, usize)> {
    let base = text.as_ptr() as usize;
    text.split_whitespace()
        .map(|t| {
            let start = t.as_ptr() as usize - base;
            (start, start + t.len())
        })
        .collect()
}
