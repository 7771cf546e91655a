//! HTTP embedding service client.
//!
//! `POST {base}/embed` with `{"texts": [[doc, ...], ...]}` (one inner list per
//! episode) answers `{"vectors": [[f64; D], ...]}` with status 200. Any other
//! status carries `{"error": "..."}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::Episode;
use crate::error::{Error, Result};

use super::EmbeddingProvider;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

pub struct RemoteProvider {
    endpoint: String,
    dimension: usize,
    batch_size: usize,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(base_url: &str, dimension: usize, batch_size: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        RemoteProvider {
            endpoint: format!("{}/embed", base_url.trim_end_matches('/')),
            dimension,
            batch_size: batch_size.max(1),
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn embed_raw(&self, episodes: &[&Episode]) -> Result<Vec<Vec<f64>>> {
        let body = EmbedRequest {
            texts: episodes
                .iter()
                .map(|e| e.documents.iter().map(|d| d.text.clone()).collect())
                .collect(),
        };
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| Error::Transport(format!("{}: {e}", self.endpoint)))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Transport(format!("{}: {e}", self.endpoint)))?;
        if status != 200 {
            let msg = serde_json::from_str::<ErrorResponse>(&text)
                .map(|e| e.error)
                .unwrap_or(text);
            return Err(Error::Provider(format!(
                "{} returned {status}: {msg}",
                self.endpoint
            )));
        }
        let parsed: EmbedResponse = serde_json::from_str(&text)
            .map_err(|e| Error::Provider(format!("{}: malformed response: {e}", self.endpoint)))?;
        Ok(parsed.vectors)
    }
}
