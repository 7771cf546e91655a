//! Author-labeled documents, fixed-length episodes, and query/target sets.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_EPISODE_LEN: usize = 16;

/// Half-open `[start, end)` span in characters (not bytes).
pub type SentenceSpan = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub author_id: String,
    #[serde(default)]
    pub timestamp: i64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<Vec<SentenceSpan>>,
}

impl Document {
    pub fn new(
        doc_id: impl Into<String>,
        author_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        Document {
            doc_id: doc_id.into(),
            author_id: author_id.into(),
            timestamp: 0,
            text: text.into(),
            sentences: None,
        }
    }

    pub fn with_timestamp(mut self, timestamp: i64) -> Self {
        self.timestamp = timestamp;
        self
    }

    /// Sentence spans, either as supplied or from [`split_sentences`].
    pub fn sentence_spans(&self) -> Vec<SentenceSpan> {
        match &self.sentences {
            Some(spans) => spans.clone(),
            None => split_sentences(&self.text),
        }
    }

    pub fn sentence_texts(&self) -> Vec<String> {
        let chars: Vec<char> = self.text.chars().collect();
        self.sentence_spans()
            .into_iter()
            .map(|(s, e)| {
                chars[s.min(chars.len())..e.min(chars.len())]
                    .iter()
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &documents {
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::Integrity(format!("duplicate doc_id {}", d.doc_id)));
            }
        }
        Ok(Corpus { documents })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub author_id: String,
    pub documents: Vec<Document>,
}

impl Episode {
    pub fn texts(&self) -> Vec<&str> {
        self.documents.iter().map(|d| d.text.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// A document treated as a length-1 episode.
    pub fn singleton(doc: &Document) -> Self {
        Episode {
            episode_id: doc.doc_id.clone(),
            author_id: doc.author_id.clone(),
            documents: vec![doc.clone()],
        }
    }
}

/// Queries `q_0..q_{M-1}` and targets `t_0..t_{N-1}`; `q_i` pairs with `t_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTargetSet {
    pub queries: Vec<Episode>,
    pub targets: Vec<Episode>,
}

impl QueryTargetSet {
    /// Build from parts, checking pairing and author-distinctness invariants.
    pub fn new(queries: Vec<Episode>, targets: Vec<Episode>) -> Result<Self> {
        let qts = QueryTargetSet { queries, targets };
        qts.validate()?;
        Ok(qts)
    }

    pub fn m(&self) -> usize {
        self.queries.len()
    }

    pub fn n(&self) -> usize {
        self.targets.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.queries.len() > self.targets.len() {
            return Err(Error::Integrity(format!(
                "{} queries but only {} targets",
                self.queries.len(),
                self.targets.len()
            )));
        }
        let mut authors = HashSet::new();
        for t in &self.targets {
            if !authors.insert(t.author_id.as_str()) {
                return Err(Error::Integrity(format!(
                    "author {} has more than one target",
                    t.author_id
                )));
            }
        }
        for (i, (q, t)) in self.queries.iter().zip(&self.targets).enumerate() {
            if q.author_id != t.author_id {
                return Err(Error::Integrity(format!(
                    "query {i} ({}) is not paired with a same-author target ({})",
                    q.episode_id, t.episode_id
                )));
            }
            let target_docs: HashSet<&str> =
                t.documents.iter().map(|d| d.doc_id.as_str()).collect();
            if let Some(d) = q
                .documents
                .iter()
                .find(|d| target_docs.contains(d.doc_id.as_str()))
            {
                return Err(Error::Integrity(format!(
                    "query {} and target {} share document {}",
                    q.episode_id, t.episode_id, d.doc_id
                )));
            }
        }
        Ok(())
    }
}

fn required_str(obj: &serde_json::Map<String, Value>, key: &str, line: usize) -> Result<String> {
    match obj.get(key) {
        None | Some(Value::Null) => Err(Error::parse(line, format!("missing {key}"))),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(Error::parse(line, format!("{key} must be a string"))),
    }
}

/// Parse one corpus JSONL record. `line` is 1-based and only used in messages.
pub fn parse_document(raw: &str, line: usize) -> Result<Document> {
    let value: Value = serde_json::from_str(raw).map_err(|e| Error::parse(line, e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::parse(line, "record is not a JSON object"))?;
    let doc_id = required_str(obj, "doc_id", line)?;
    let author_id = required_str(obj, "author_id", line)?;
    let text = required_str(obj, "text", line)?;
    if text.trim().is_empty() {
        return Err(Error::parse(line, "text is empty"));
    }
    let timestamp = match obj.get("timestamp") {
        None | Some(Value::Null) => 0,
        Some(v) => v
            .as_i64()
            .ok_or_else(|| Error::parse(line, "timestamp must be an integer"))?,
    };
    let sentences = match obj.get("sentences") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let spans: Vec<SentenceSpan> = serde_json::from_value(v.clone())
                .map_err(|e| Error::parse(line, format!("sentences: {e}")))?;
            let n_chars = text.chars().count();
            let mut prev_end = 0;
            for &(s, e) in &spans {
                if s > e || e > n_chars || s < prev_end {
                    return Err(Error::parse(
                        line,
                        "sentences must be ascending, non-overlapping spans within the text",
                    ));
                }
                prev_end = e;
            }
            Some(spans)
        }
    };
    Ok(Document {
        doc_id,
        author_id,
        timestamp,
        text,
        sentences,
    })
}

/// Load a JSONL corpus. Blank lines are skipped; duplicate ids are rejected.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_document(&line, i + 1)?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::Integrity(format!(
                "line {}: duplicate doc_id {}",
                i + 1,
                doc.doc_id
            )));
        }
        documents.push(doc);
    }
    Ok(Corpus { documents })
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    write_jsonl(path, docs)
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Blank lines are skipped; a bad record fails with its 1-based line number.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_episodes(path: impl AsRef<Path>, episodes: &[Episode]) -> Result<()> {
    write_jsonl(path, episodes)
}

pub fn load_episodes(path: impl AsRef<Path>) -> Result<Vec<Episode>> {
    read_jsonl(path)
}

/// Chunk each author's documents, ordered by `(timestamp, doc_id)`, into
/// consecutive windows of `episode_len`. Trailing partial windows are dropped.
pub fn build_episodes(corpus: &Corpus, episode_len: usize) -> Result<Vec<Episode>> {
    if episode_len == 0 {
        return Err(Error::InvalidInput("episode_len must be at least 1".into()));
    }
    let mut by_author: BTreeMap<&str, Vec<&Document>> = BTreeMap::new();
    for d in &corpus.documents {
        by_author.entry(d.author_id.as_str()).or_default().push(d);
    }
    let mut episodes = Vec::new();
    for (author, mut docs) in by_author {
        docs.sort_by(|a, b| (a.timestamp, &a.doc_id).cmp(&(b.timestamp, &b.doc_id)));
        for (k, window) in docs.chunks_exact(episode_len).enumerate() {
            episodes.push(Episode {
                episode_id: format!("{author}/{k}"),
                author_id: author.to_string(),
                documents: window.iter().map(|d| (*d).clone()).collect(),
            });
        }
    }
    Ok(episodes)
}

/// Pick one target per author and, for authors with at least two episodes,
/// one further episode as that author's query.
///
/// Authors with queries come first (in author-id order) so that `q_i` pairs
/// with `t_i`; single-episode authors follow as distractor targets.
pub fn build_query_target(episodes: &[Episode], rng_seed: u64) -> Result<QueryTargetSet> {
    let mut by_author: BTreeMap<&str, Vec<&Episode>> = BTreeMap::new();
    for e in episodes {
        by_author.entry(e.author_id.as_str()).or_default().push(e);
    }
    if by_author.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "ranking needs at least 2 authors, found {}",
            by_author.len()
        )));
    }
    let mut rng = seed::rng(rng_seed);
    let mut queries = Vec::new();
    let mut paired_targets = Vec::new();
    let mut distractors = Vec::new();
    for (_, eps) in by_author {
        if eps.len() >= 2 {
            let t = rng.random_range(0..eps.len());
            let mut q = rng.random_range(0..eps.len() - 1);
            if q >= t {
                q += 1;
            }
            paired_targets.push(eps[t].clone());
            queries.push(eps[q].clone());
        } else {
            distractors.push((*eps.choose(&mut rng).expect("non-empty group")).clone());
        }
    }
    paired_targets.extend(distractors);
    QueryTargetSet::new(queries, paired_targets)
}

const ABBREVIATIONS: [&str; 7] = ["Mr.", "Mrs.", "Dr.", "St.", "vs.", "e.g.", "i.e."];

/// Rule-based sentence splitter returning character spans.
///
/// A sentence ends at `.`, `!` or `?` followed by whitespace or end of text,
/// unless the word ending there is a known abbreviation. Leading and
/// trailing whitespace is excluded from each span.
pub fn split_sentences(text: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let mut spans = Vec::new();
    let mut start = 0;
    let push = |spans: &mut Vec<SentenceSpan>, s: usize, e: usize| {
        let mut s = s;
        let mut e = e;
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if s < e {
            spans.push((s, e));
        }
    };
    for i in 0..chars.len() {
        let c = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let at_boundary = i + 1 == chars.len() || chars[i + 1].is_whitespace();
        if !at_boundary {
            continue;
        }
        if c == '.' {
            let word_start = chars[..=i]
                .iter()
                .rposition(|c| c.is_whitespace())
                .map_or(0, |p| p + 1);
            let word: String = chars[word_start..=i].iter().collect();
            if ABBREVIATIONS.contains(&word.as_str()) {
                continue;
            }
        }
        push(&mut spans, start, i + 1);
        start = i + 1;
    }
    push(&mut spans, start, chars.len());
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    fn author_docs(author: &str, n: usize) -> Vec<Document> {
        (0..n)
            .map(|i| {
                Document::new(format!("{author}-{i:03}"), author, format!("text {i}"))
                    .with_timestamp(i as i64)
            })
            .collect()
    }

    fn tmp_with(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_empty_file() {
        let f = tmp_with("");
        assert_eq!(load_corpus(f.path()).unwrap().len(), 0);
    }

    #[test]
    fn load_two_records() {
        let f = tmp_with(
            "{\"doc_id\":\"a\",\"author_id\":\"x\",\"text\":\"hi there\"}\n\
             {\"doc_id\":\"b\",\"author_id\":\"y\",\"timestamp\":5,\"text\":\"yo\",\"sentences\":[[0,2]]}\n",
        );
        let c = load_corpus(f.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.documents[1].timestamp, 5);
        assert_eq!(c.documents[1].sentences, Some(vec![(0, 2)]));
    }

    #[test]
    fn missing_author_names_line() {
        let f = tmp_with(
            "{\"doc_id\":\"a\",\"author_id\":\"x\",\"text\":\"hi\"}\n{\"doc_id\":\"b\",\"text\":\"yo\"}\n",
        );
        let err = load_corpus(f.path()).unwrap_err();
        assert_eq!(err.to_string(), "line 2: missing author_id");
    }

    #[test]
    fn duplicate_doc_id_rejected() {
        let f = tmp_with(
            "{\"doc_id\":\"a\",\"author_id\":\"x\",\"text\":\"hi\"}\n{\"doc_id\":\"a\",\"author_id\":\"y\",\"text\":\"yo\"}\n",
        );
        assert!(matches!(load_corpus(f.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn blank_text_rejected() {
        let f = tmp_with("{\"doc_id\":\"a\",\"author_id\":\"x\",\"text\":\"  \"}\n");
        assert!(matches!(
            load_corpus(f.path()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn episode_windows() {
        let c = Corpus::new(author_docs("a", 16)).unwrap();
        assert_eq!(build_episodes(&c, 16).unwrap().len(), 1);
        let c = Corpus::new(author_docs("a", 15)).unwrap();
        assert!(build_episodes(&c, 16).unwrap().is_empty());

        let c = Corpus::new(author_docs("a", 35)).unwrap();
        let eps = build_episodes(&c, 16).unwrap();
        assert_eq!(eps.len(), 2);
        let ids = |e: &Episode| {
            e.documents
                .iter()
                .map(|d| d.doc_id.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(
            ids(&eps[0]),
            (0..16).map(|i| format!("a-{i:03}")).collect::<Vec<_>>()
        );
        assert_eq!(
            ids(&eps[1]),
            (16..32).map(|i| format!("a-{i:03}")).collect::<Vec<_>>()
        );
    }

    #[test]
    fn episodes_ordered_by_timestamp_then_id() {
        let docs = vec![
            Document::new("z", "a", "t").with_timestamp(1),
            Document::new("y", "a", "t").with_timestamp(0),
            Document::new("x", "a", "t").with_timestamp(1),
        ];
        let eps = build_episodes(&Corpus::new(docs).unwrap(), 3).unwrap();
        let ids: Vec<_> = eps[0].documents.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["y", "x", "z"]);
        assert!(build_episodes(&Corpus::default(), 0).is_err());
    }

    #[test]
    fn query_target_shapes() {
        let mut docs = Vec::new();
        for a in ["a", "b", "c"] {
            docs.extend(author_docs(a, 4));
        }
        let eps = build_episodes(&Corpus::new(docs).unwrap(), 2).unwrap();
        let qts = build_query_target(&eps, 1).unwrap();
        assert_eq!((qts.m(), qts.n()), (3, 3));
        for (q, t) in qts.queries.iter().zip(&qts.targets) {
            assert_eq!(q.author_id, t.author_id);
            assert_ne!(q.episode_id, t.episode_id);
        }

        let mut docs = author_docs("a", 4);
        docs.extend(author_docs("b", 2));
        let eps = build_episodes(&Corpus::new(docs).unwrap(), 2).unwrap();
        let qts = build_query_target(&eps, 1).unwrap();
        assert_eq!((qts.m(), qts.n()), (1, 2));

        let eps = build_episodes(&Corpus::new(author_docs("a", 4)).unwrap(), 2).unwrap();
        assert!(build_query_target(&eps, 1).is_err());
    }

    #[test]
    fn query_target_seeds() {
        let mut docs = Vec::new();
        for a in 0..100 {
            docs.extend(author_docs(&format!("au{a:03}"), 3));
        }
        let eps = build_episodes(&Corpus::new(docs).unwrap(), 1).unwrap();
        let s1 = build_query_target(&eps, 11).unwrap();
        let s2 = build_query_target(&eps, 12).unwrap();
        for s in [&s1, &s2] {
            assert_eq!((s.m(), s.n()), (100, 100));
            s.validate().unwrap();
        }
        assert_ne!(s1, s2);
        assert_eq!(s1, build_query_target(&eps, 11).unwrap());
    }

    #[test]
    fn splitter_handles_abbreviations() {
        let text = "Mr. Smith went home. Did he? Yes! See e.g. the notes";
        let doc = Document::new("d", "a", text);
        assert_eq!(
            doc.sentence_texts(),
            [
                "Mr. Smith went home.",
                "Did he?",
                "Yes!",
                "See e.g. the notes"
            ]
        );
        assert!(split_sentences("   ").is_empty());
        assert_eq!(split_sentences("3.14 is pi."), vec![(0, 11)]);
    }
}
