//! Content-masking interventions.
//!
//! PertLE replaces every token whose universal POS tag falls in a level's
//! mask set; TertLE replaces the highest TF-IDF-scoring share of tokens in
//! each document. Both keep token count and every unmasked surface intact.

mod conllu;
mod tfidf;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conllu::{parse_conllu, parse_conllu_str};
pub use tfidf::{fit_tfidf, tfidf_score, TfIdfModel};

pub const DEFAULT_MASK_TOKEN: &str = "<mask>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Upos {
    Noun,
    Propn,
    Verb,
    Aux,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Cconj,
    Sconj,
    Part,
    Num,
    Intj,
    Sym,
    Punct,
    X,
    Unknown,
}

impl Upos {
    pub const ALL: [Upos; 18] = [
        Upos::Noun,
        Upos::Propn,
        Upos::Verb,
        Upos::Aux,
        Upos::Adj,
        Upos::Adv,
        Upos::Pron,
        Upos::Det,
        Upos::Adp,
        Upos::Cconj,
        Upos::Sconj,
        Upos::Part,
        Upos::Num,
        Upos::Intj,
        Upos::Sym,
        Upos::Punct,
        Upos::X,
        Upos::Unknown,
    ];

    /// Map a UPOS column value; anything outside the tagset is `Unknown`.
    pub fn parse(tag: &str) -> Upos {
        match tag {
            "NOUN" => Upos::Noun,
            "PROPN" => Upos::Propn,
            "VERB" => Upos::Verb,
            "AUX" => Upos::Aux,
            "ADJ" => Upos::Adj,
            "ADV" => Upos::Adv,
            "PRON" => Upos::Pron,
            "DET" => Upos::Det,
            "ADP" => Upos::Adp,
            "CCONJ" => Upos::Cconj,
            "SCONJ" => Upos::Sconj,
            "PART" => Upos::Part,
            "NUM" => Upos::Num,
            "INTJ" => Upos::Intj,
            "SYM" => Upos::Sym,
            "PUNCT" => Upos::Punct,
            "X" => Upos::X,
            _ => Upos::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub surface: String,
    pub upos: Upos,
    /// Start id of the multi-word token this syntactic word belongs to.
    pub mwt_group: Option<u32>,
    pub space_after: bool,
}

impl TaggedToken {
    pub fn new(surface: impl Into<String>, upos: Upos) -> Self {
        TaggedToken {
            surface: surface.into(),
            upos,
            mwt_group: None,
            space_after: true,
        }
    }
}

/// An orthographic word spanning tokens `first..=last` of its document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiwordToken {
    pub first: usize,
    pub last: usize,
    pub surface: String,
    pub space_after: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedDocument {
    pub doc_id: String,
    pub author_id: Option<String>,
    pub timestamp: i64,
    pub tokens: Vec<TaggedToken>,
    pub multiword: Vec<MultiwordToken>,
}

impl TaggedDocument {
    pub fn new(doc_id: impl Into<String>) -> Self {
        TaggedDocument {
            doc_id: doc_id.into(),
            author_id: None,
            timestamp: 0,
            tokens: Vec::new(),
            multiword: Vec::new(),
        }
    }

    pub fn detokenize(&self) -> String {
        let surfaces: Vec<&str> = self.tokens.iter().map(|t| t.surface.as_str()).collect();
        render(self, &surfaces, &vec![false; surfaces.len()])
    }
}

/// Join surfaces honoring `SpaceAfter` and multi-word tokens.
///
/// A multi-word token is written with its own surface unless one of its
/// sub-tokens was masked, in which case the sub-token surfaces are
/// concatenated so that unmasked particles survive (`wanna` -> `<mask>na`).
fn render(doc: &TaggedDocument, surfaces: &[&str], masked: &[bool]) -> String {
    let mut out = String::new();
    let mut mwt = doc.multiword.iter().peekable();
    let mut i = 0;
    while i < surfaces.len() {
        while mwt.peek().is_some_and(|m| m.last < i) {
            mwt.next();
        }
        if let Some(m) = mwt
            .peek()
            .filter(|m| m.first == i && m.last < surfaces.len())
        {
            if masked[m.first..=m.last].iter().any(|&b| b) {
                for s in &surfaces[m.first..=m.last] {
                    out.push_str(s);
                }
            } else {
                out.push_str(&m.surface);
            }
            if m.space_after {
                out.push(' ');
            }
            i = m.last + 1;
            mwt.next();
            continue;
        }
        out.push_str(surfaces[i]);
        if doc.tokens[i].space_after {
            out.push(' ');
        }
        i += 1;
    }
    out.truncate(out.trim_end().len());
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PertleLevel {
    Grande,
    Lite,
    XtraLite,
}

impl PertleLevel {
    /// NOUN/PROPN/VERB/ADJ/ADV for Grande, NOUN/PROPN for Lite, PROPN for Xtra-Lite.
    /// AUX, PART, NUM, SYM and the closed classes are never masked.
    pub fn masks(self, upos: Upos) -> bool {
        match self {
            PertleLevel::Grande => matches!(
                upos,
                Upos::Noun | Upos::Propn | Upos::Verb | Upos::Adj | Upos::Adv
            ),
            PertleLevel::Lite => matches!(upos, Upos::Noun | Upos::Propn),
            PertleLevel::XtraLite => upos == Upos::Propn,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PertleLevel::Grande => "grande",
            PertleLevel::Lite => "lite",
            PertleLevel::XtraLite => "xtra_lite",
        }
    }
}

impl fmt::Display for PertleLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PertleLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "grande" => Ok(PertleLevel::Grande),
            "lite" => Ok(PertleLevel::Lite),
            "xtra_lite" | "xtralite" => Ok(PertleLevel::XtraLite),
            other => Err(Error::InvalidInput(format!(
                "unknown PertLE level {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskSchema {
    Pertle {
        level: PertleLevel,
        mask_token: String,
    },
    Tertle {
        p: f64,
        mask_token: String,
    },
}

impl MaskSchema {
    pub fn pertle(level: PertleLevel) -> Self {
        MaskSchema::Pertle {
            level,
            mask_token: DEFAULT_MASK_TOKEN.into(),
        }
    }

    pub fn tertle(p: f64) -> Result<Self> {
        let schema = MaskSchema::Tertle {
            p,
            mask_token: DEFAULT_MASK_TOKEN.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn mask_token(&self) -> &str {
        match self {
            MaskSchema::Pertle { mask_token, .. } | MaskSchema::Tertle { mask_token, .. } => {
                mask_token
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mask_token().is_empty() {
            return Err(Error::InvalidInput("mask token must be non-empty".into()));
        }
        if let MaskSchema::Tertle { p, .. } = self {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidInput(format!(
                    "proportion {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Short label stored alongside masked output, e.g. `pertle:grande`.
    pub fn label(&self) -> String {
        match self {
            MaskSchema::Pertle { level, .. } => format!("pertle:{level}"),
            MaskSchema::Tertle { p, .. } => format!("tertle:{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedDocument {
    pub doc_id: String,
    /// Token surfaces after masking.
    pub tokens: Vec<String>,
    pub masked: Vec<bool>,
    pub text: String,
}

impl MaskedDocument {
    pub fn masked_indices(&self) -> Vec<usize> {
        self.masked
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    pub fn n_masked(&self) -> usize {
        self.masked.iter().filter(|&&m| m).count()
    }
}

pub fn mask_pertle(doc: &TaggedDocument, level: PertleLevel, mask_token: &str) -> MaskedDocument {
    let masked: Vec<bool> = doc.tokens.iter().map(|t| level.masks(t.upos)).collect();
    let surfaces: Vec<&str> = doc
        .tokens
        .iter()
        .zip(&masked)
        .map(|(t, &m)| if m { mask_token } else { t.surface.as_str() })
        .collect();
    let text = render(doc, &surfaces, &masked);
    MaskedDocument {
        doc_id: doc.doc_id.clone(),
        tokens: surfaces.iter().map(|s| s.to_string()).collect(),
        masked,
        text,
    }
}

/// `round(x)` with halves rounded up.
fn round_half_up(x: f64) -> usize {
    // absorbs representation error in products such as (1/3)*3
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// Number of tokens TertLE masks in a document of `n_tokens` at proportion `p`.
pub fn tertle_budget(p: f64, n_tokens: usize) -> usize {
    round_half_up(p * n_tokens as f64).min(n_tokens)
}

/// Mask the `round_half_up(p * n)` highest-scoring tokens, earliest first on ties.
///
/// Tokens already equal to `mask_token` score minus infinity and count
/// against the budget, so re-masking a masked document is a no-op.
pub fn mask_tertle<S: AsRef<str>>(
    doc_id: &str,
    tokens: &[S],
    model: &TfIdfModel,
    p: f64,
    mask_token: &str,
) -> Result<MaskedDocument> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!(
            "proportion {p} outside [0, 1]"
        )));
    }
    let k = tertle_budget(p, tokens.len());
    let mut masked: Vec<bool> = tokens.iter().map(|t| t.as_ref() == mask_token).collect();
    let already = masked.iter().filter(|&&m| m).count();
    let mut scored: Vec<(usize, f64)> = tfidf_score(model, tokens)
        .into_iter()
        .map(|(i, s)| (i, if masked[i] { f64::NEG_INFINITY } else { s }))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let chosen: Vec<usize> = scored
        .iter()
        .filter(|(i, _)| !masked[*i])
        .take(k.saturating_sub(already))
        .map(|&(i, _)| i)
        .collect();
    for i in chosen {
        masked[i] = true;
    }
    let out: Vec<String> = tokens
        .iter()
        .zip(&masked)
        .map(|(t, &m)| {
            if m {
                mask_token.to_string()
            } else {
                t.as_ref().to_string()
            }
        })
        .collect();
    Ok(MaskedDocument {
        doc_id: doc_id.to_string(),
        text: out.join(" "),
        tokens: out,
        masked,
    })
}

/// Share of tokens that were masked; a partially masked multi-word token
/// contributes only its masked sub-tokens. Empty documents give 0.
pub fn masked_proportion(masked: &MaskedDocument) -> f64 {
    if masked.tokens.is_empty() {
        return 0.0;
    }
    masked.n_masked() as f64 / masked.tokens.len() as f64
}
