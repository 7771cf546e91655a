use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Document frequencies fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    pub n_docs: usize,
    pub casefold: bool,
    pub df: BTreeMap<String, usize>,
}

impl TfIdfModel {
    fn key(&self, token: &str) -> String {
        if self.casefold {
            token.to_lowercase()
        } else {
            token.to_string()
        }
    }

    pub fn document_frequency(&self, token: &str) -> usize {
        self.df.get(&self.key(token)).copied().unwrap_or(0)
    }

    /// Smoothed inverse document frequency, `ln((1 + n) / (1 + df)) + 1`.
    pub fn idf(&self, token: &str) -> f64 {
        let n = self.n_docs as f64;
        let df = self.document_frequency(token) as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }
}

pub fn fit_tfidf<S: AsRef<str>>(docs: &[Vec<S>], casefold: bool) -> Result<TfIdfModel> {
    if docs.is_empty() {
        return Err(Error::InvalidInput(
            "cannot fit TF-IDF on an empty corpus".into(),
        ));
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in docs {
        let terms: HashSet<String> = doc
            .iter()
            .map(|t| {
                let t = t.as_ref();
                if casefold {
                    t.to_lowercase()
                } else {
                    t.to_string()
                }
            })
            .collect();
        for t in terms {
            *df.entry(t).or_default() += 1;
        }
    }
    Ok(TfIdfModel {
        n_docs: docs.len(),
        casefold,
        df,
    })
}

/// Raw in-document term count times smoothed idf, one entry per token position.
pub fn tfidf_score<S: AsRef<str>>(model: &TfIdfModel, doc: &[S]) -> Vec<(usize, f64)> {
    let mut tf: BTreeMap<String, usize> = BTreeMap::new();
    for t in doc {
        *tf.entry(model.key(t.as_ref())).or_default() += 1;
    }
    doc.iter()
        .enumerate()
        .map(|(i, t)| {
            let count = tf[&model.key(t.as_ref())] as f64;
            (i, count * model.idf(t.as_ref()))
        })
        .collect()
}
