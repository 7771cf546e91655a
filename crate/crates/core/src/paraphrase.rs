//! Paraphrase ingestion, semantic-retention scoring, episode gating, and
//! surface-change measurement.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{read_jsonl, Document, Episode, SentenceSpan};
use crate::error::{Error, Result};

pub const GATE_EPISODE_LEN: usize = 16;
pub const GATE_KEEP: usize = 8;
const SCORE_RANGE_TOLERANCE: f64 = 1e-6;

/// One line of a paraphrase pair file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub orig_id: String,
    pub para_id: String,
    pub orig_text: String,
    pub para_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences_orig: Option<Vec<SentenceSpan>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences_para: Option<Vec<SentenceSpan>>,
    /// Human paraphrase judgement, for labeled baselines such as MRPC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<bool>,
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<PairRecord>> {
    read_jsonl(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParaphrasePair {
    pub original: Document,
    pub paraphrase: Document,
    /// Positional 1:1 sentence alignment over `min` of the two counts.
    pub sentence_alignment: Vec<(usize, usize)>,
    /// Whether one side had extra sentences that were ignored.
    pub truncated: bool,
}

impl ParaphrasePair {
    pub fn new(original: Document, paraphrase: Document) -> Result<Self> {
        if original.text.trim().is_empty() || paraphrase.text.trim().is_empty() {
            return Err(Error::InvalidInput(format!(
                "empty document in pair {} / {}",
                original.doc_id, paraphrase.doc_id
            )));
        }
        let n_orig = original.sentence_spans().len();
        let n_para = paraphrase.sentence_spans().len();
        let n = n_orig.min(n_para);
        let truncated = n_orig != n_para;
        if truncated {
            log::warn!(
                "sentence count mismatch for {} ({n_orig}) / {} ({n_para}); aligning the first {n}",
                original.doc_id,
                paraphrase.doc_id
            );
        }
        Ok(ParaphrasePair {
            original,
            paraphrase,
            sentence_alignment: (0..n).map(|i| (i, i)).collect(),
            truncated,
        })
    }

    pub fn from_record(r: &PairRecord) -> Result<Self> {
        let mut original = Document::new(&r.orig_id, "", &r.orig_text);
        original.sentences = r.sentences_orig.clone();
        let mut paraphrase = Document::new(&r.para_id, "", &r.para_text);
        paraphrase.sentences = r.sentences_para.clone();
        Self::new(original, paraphrase)
    }

    /// Aligned `(original sentence, paraphrase sentence)` texts.
    pub fn aligned_sentences(&self) -> Vec<(String, String)> {
        let a = self.original.sentence_texts();
        let b = self.paraphrase.sentence_texts();
        self.sentence_alignment
            .iter()
            .map(|&(i, j)| (a[i].clone(), b[j].clone()))
            .collect()
    }
}

/// Externally computed similarity scores keyed by `(orig_id, para_id)`.
///
/// Sentence-level scores use ids of the form `doc_id#k` (0-based sentence index).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    scores: HashMap<(String, String), f64>,
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, orig_id: &str, para_id: &str) -> Option<f64> {
        self.scores
            .get(&(orig_id.to_string(), para_id.to_string()))
            .copied()
    }

    pub fn insert(&mut self, orig_id: &str, para_id: &str, score: f64) -> Result<()> {
        let key = (orig_id.to_string(), para_id.to_string());
        if self.scores.contains_key(&key) {
            return Err(Error::Integrity(format!(
                "duplicate score for {orig_id},{para_id}"
            )));
        }
        if !score.is_finite()
            || !(-SCORE_RANGE_TOLERANCE..=1.0 + SCORE_RANGE_TOLERANCE).contains(&score)
        {
            return Err(Error::InvalidInput(format!(
                "score {score} for {orig_id},{para_id} outside [0, 1]"
            )));
        }
        self.scores.insert(key, score.clamp(0.0, 1.0));
        Ok(())
    }
}

#[derive(Deserialize)]
struct ScoreRow {
    orig_id: String,
    para_id: String,
    score: f64,
}

/// Read a `orig_id,para_id,score` CSV (with header).
pub fn ingest_scores(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path, e.into()))?;
    let mut table = ScoreTable::default();
    for (i, row) in reader.deserialize::<ScoreRow>().enumerate() {
        // header is line 1
        let row = row.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        table.insert(&row.orig_id, &row.para_id, row.score)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimilarityScorer {
    /// Built-in token-overlap fallback.
    TokenF1,
    External(ScoreTable),
}

impl SimilarityScorer {
    pub fn name(&self) -> &'static str {
        match self {
            SimilarityScorer::TokenF1 => "token_f1 (built-in fallback)",
            SimilarityScorer::External(_) => "external",
        }
    }
}

/// Mean sentence-level similarity between a document and its paraphrase, in `[0, 1]`.
pub fn score_pair(pair: &ParaphrasePair, scorer: &SimilarityScorer) -> Result<f64> {
    if pair.sentence_alignment.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no aligned sentences in pair {} / {}",
            pair.original.doc_id, pair.paraphrase.doc_id
        )));
    }
    let scores: Vec<f64> = match scorer {
        SimilarityScorer::TokenF1 => pair
            .aligned_sentences()
            .iter()
            .map(|(a, b)| token_f1(a, b))
            .collect(),
        SimilarityScorer::External(table) => {
            let (o, p) = (&pair.original.doc_id, &pair.paraphrase.doc_id);
            if let Some(s) = table.get(o, p) {
                return Ok(s);
            }
            pair.sentence_alignment
                .iter()
                .map(|&(i, j)| {
                    table
                        .get(&format!("{o}#{i}"), &format!("{p}#{j}"))
                        .ok_or_else(|| {
                            Error::InvalidInput(format!("no external score for {o} / {p}"))
                        })
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Multiset token F1 over casefolded whitespace tokens.
pub fn token_f1(a: &str, b: &str) -> f64 {
    let ta: Vec<String> = a.split_whitespace().map(str::to_lowercase).collect();
    let tb: Vec<String> = b.split_whitespace().map(str::to_lowercase).collect();
    match (ta.is_empty(), tb.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for t in &ta {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &tb {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / tb.len() as f64;
    let r = overlap as f64 / ta.len() as f64;
    2.0 * p * r / (p + r)
}

/// Character-level Levenshtein distance, two-row dynamic program.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance over the longer string's character count; 0 for two empty strings.
pub fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / longest as f64
}

/// Mean normalized edit distance over a pair's aligned sentences.
pub fn pair_edit_distance(pair: &ParaphrasePair) -> Result<f64> {
    let aligned = pair.aligned_sentences();
    if aligned.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no aligned sentences in pair {} / {}",
            pair.original.doc_id, pair.paraphrase.doc_id
        )));
    }
    Ok(aligned
        .iter()
        .map(|(a, b)| normalized_edit_distance(a, b))
        .sum::<f64>()
        / aligned.len() as f64)
}

/// Indices of the `keep` highest scores, lowest index first on ties, returned ascending.
pub fn top_indices(scores: &[f64], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
    kept.sort_unstable();
    kept
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatedEpisodePair {
    pub original_episode: Episode,
    pub paraphrased_episode: Episode,
    pub per_doc_scores: Vec<f64>,
    pub kept_indices: Vec<usize>,
}

impl GatedEpisodePair {
    /// Mean similarity over the kept documents.
    pub fn kept_mean_score(&self) -> f64 {
        let s: f64 = self
            .kept_indices
            .iter()
            .map(|&i| self.per_doc_scores[i])
            .sum();
        s / self.kept_indices.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateConfig {
    pub episode_len: usize,
    pub keep: usize,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            episode_len: GATE_EPISODE_LEN,
            keep: GATE_KEEP,
        }
    }
}

pub fn gate_episode(
    orig: &Episode,
    para: &Episode,
    scorer: &SimilarityScorer,
) -> Result<GatedEpisodePair> {
    gate_episode_with(orig, para, scorer, GateConfig::default())
}

/// Keep the documents whose paraphrases best preserve meaning, dropping
/// the same positions from both episodes.
pub fn gate_episode_with(
    orig: &Episode,
    para: &Episode,
    scorer: &SimilarityScorer,
    config: GateConfig,
) -> Result<GatedEpisodePair> {
    for (name, e) in [("original", orig), ("paraphrased", para)] {
        if e.len() != config.episode_len {
            return Err(Error::InvalidInput(format!(
                "{name} episode {} has {} documents, expected {}",
                e.episode_id,
                e.len(),
                config.episode_len
            )));
        }
    }
    if config.keep > config.episode_len {
        return Err(Error::InvalidInput(
            "cannot keep more documents than an episode holds".into(),
        ));
    }
    let per_doc_scores = orig
        .documents
        .iter()
        .zip(&para.documents)
        .map(|(o, p)| score_pair(&ParaphrasePair::new(o.clone(), p.clone())?, scorer))
        .collect::<Result<Vec<_>>>()?;
    let kept_indices = top_indices(&per_doc_scores, config.keep);
    let pick = |e: &Episode| Episode {
        episode_id: e.episode_id.clone(),
        author_id: e.author_id.clone(),
        documents: kept_indices
            .iter()
            .map(|&i| e.documents[i].clone())
            .collect(),
    };
    Ok(GatedEpisodePair {
        original_episode: pick(orig),
        paraphrased_episode: Episode {
            episode_id: orig.episode_id.clone(),
            ..pick(para)
        },
        per_doc_scores,
        kept_indices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

/// Equal-width histogram over `[lo, hi]`; the last bin is closed on the right
/// and values outside the range are clamped into the end bins.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Vec<HistogramBin>> {
    if bins == 0 || hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidInput(
            "histogram needs bins >= 1 and hi > lo".into(),
        ));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = ((v - lo) / width).floor();
        let idx = if idx.is_nan() {
            0.0
        } else {
            idx.clamp(0.0, (bins - 1) as f64)
        };
        counts[idx as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            bin_lo: lo + i as f64 * width,
            bin_hi: if i + 1 == bins {
                hi
            } else {
                lo + (i + 1) as f64 * width
            },
            count,
        })
        .collect())
}

/// CSV `bin_lo,bin_hi,count`.
pub fn write_histogram(path: impl AsRef<Path>, bins: &[HistogramBin]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "bin_lo,bin_hi,count").map_err(io)?;
    for b in bins {
        writeln!(w, "{},{},{}", b.bin_lo, b.bin_hi, b.count).map_err(io)?;
    }
    w.flush().map_err(io)
}
