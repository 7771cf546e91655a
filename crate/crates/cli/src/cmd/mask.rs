use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use serde::Serialize;

use styleprobe::corpus::write_jsonl;
use styleprobe::masking::{
    fit_tfidf, mask_pertle, mask_tertle, masked_proportion, parse_conllu, MaskSchema,
    MaskedDocument, PertleLevel, TfIdfModel, DEFAULT_MASK_TOKEN,
};
use styleprobe::par;

use crate::config::Context;
use crate::io::{load_token_records, whitespace_spans, write_json, TokenRecord};

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    /// Corpus JSONL with the masked text and a `mask_schema` field
    Jsonl,
    /// One masked document per line
    Text,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// CoNLL-U file (PertLE) or JSONL documents with `tokens` or `text` (TertLE)
    #[arg(long)]
    input: PathBuf,

    /// PertLE level: grande, lite or xtra-lite
    #[arg(long)]
    level: Option<PertleLevel>,

    /// Mask by TF-IDF instead of POS tags
    #[arg(long)]
    tertle: bool,

    /// TertLE proportion of tokens to mask, in [0, 1]
    #[arg(long)]
    p: Option<f64>,

    /// TF-IDF model from `tfidf-fit`; fitted on the input when omitted
    #[arg(long)]
    model: Option<PathBuf>,

    /// Keep case when fitting a TF-IDF model on the input
    #[arg(long)]
    no_casefold: bool,

    /// Replacement for masked tokens [default: <mask>]
    #[arg(long)]
    mask_token: Option<String>,

    #[arg(long)]
    output: PathBuf,

    #[arg(long, value_enum, default_value = "jsonl")]
    format: OutputFormat,

    /// Also write per-document and overall masked proportions (JSON)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Serialize)]
struct MaskedRecord<'a> {
    doc_id: &'a str,
    author_id: &'a str,
    timestamp: i64,
    text: &'a str,
    mask_schema: &'a MaskSchema,
}

#[derive(Serialize)]
struct DocProportion<'a> {
    doc_id: &'a str,
    tokens: usize,
    masked: usize,
    proportion: f64,
}

#[derive(Serialize)]
struct Report<'a> {
    schema: String,
    documents: usize,
    tokens: usize,
    masked: usize,
    /// Masked share of all tokens.
    proportion: f64,
    /// Mean of the per-document shares.
    mean_document_proportion: f64,
    per_document: Vec<DocProportion<'a>>,
}

struct Output {
    doc_id: String,
    author_id: String,
    timestamp: i64,
    masked: MaskedDocument,
}

pub fn run(args: Args, ctx: &Context) -> anyhow::Result<()> {
    let cfg = &ctx.config;
    let mask_token = args
        .mask_token
        .clone()
        .or_else(|| cfg.mask_token.clone())
        .unwrap_or_else(|| DEFAULT_MASK_TOKEN.to_string());
    let tertle = args.tertle || args.p.is_some();
    let schema = if tertle {
        let p = args
            .p
            .or(cfg.p)
            .context("TertLE masking needs --p (or `p` in the config file)")?;
        MaskSchema::Tertle { p, mask_token }
    } else {
        let level = match (args.level, &cfg.level) {
            (Some(l), _) => l,
            (None, Some(s)) => s.parse()?,
            (None, None) => anyhow::bail!("choose a PertLE --level or pass --tertle"),
        };
        MaskSchema::Pertle { level, mask_token }
    };
    schema.validate()?;

    let outputs = match &schema {
        MaskSchema::Pertle { level, mask_token } => pertle(&args.input, *level, mask_token)?,
        MaskSchema::Tertle { p, mask_token } => {
            let casefold = !args.no_casefold && cfg.casefold.unwrap_or(true);
            tertle_outputs(&args.input, args.model.as_deref(), *p, mask_token, casefold)?
        }
    };

    match args.format {
        OutputFormat::Jsonl => {
            let records: Vec<MaskedRecord> = outputs
                .iter()
                .map(|o| MaskedRecord {
                    doc_id: &o.doc_id,
                    author_id: &o.author_id,
                    timestamp: o.timestamp,
                    text: &o.masked.text,
                    mask_schema: &schema,
                })
                .collect();
            write_jsonl(&args.output, &records)
                .with_context(|| format!("writing {}", args.output.display()))?;
        }
        OutputFormat::Text => {
            let mut text = String::new();
            for o in &outputs {
                writeln!(text, "{}", o.masked.text.replace(['\n', '\r'], " "))?;
            }
            std::fs::write(&args.output, text)
                .with_context(|| format!("writing {}", args.output.display()))?;
        }
    }

    if let Some(path) = &args.report {
        write_json(path, &report(&schema, &outputs))?;
    }
    log::info!("masked {} documents with {}", outputs.len(), schema.label());
    Ok(())
}

fn pertle(input: &Path, level: PertleLevel, mask_token: &str) -> anyhow::Result<Vec<Output>> {
    let docs = parse_conllu(input).with_context(|| format!("reading {}", input.display()))?;
    Ok(par::map(&docs, |d| Output {
        doc_id: d.doc_id.clone(),
        author_id: d.author_id.clone().unwrap_or_default(),
        timestamp: d.timestamp,
        masked: mask_pertle(d, level, mask_token),
    }))
}

/// Rebuild the text with masked tokens replaced in place, so unmasked
/// stretches keep their original spacing.
fn splice(text: &str, masked: &MaskedDocument, mask_token: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut at = 0;
    for ((start, end), &m) in whitespace_spans(text).into_iter().zip(&masked.masked) {
        if m {
            out.push_str(&text[at..start]);
            out.push_str(mask_token);
            at = end;
        }
    }
    out.push_str(&text[at..]);
    out
}

fn tertle_outputs(
    input: &Path,
    model_path: Option<&Path>,
    p: f64,
    mask_token: &str,
    casefold: bool,
) -> anyhow::Result<Vec<Output>> {
    let records = load_token_records(input)?;
    let tokens = records
        .iter()
        .map(TokenRecord::token_list)
        .collect::<anyhow::Result<Vec<_>>>()?;
    let model: TfIdfModel = match model_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing TF-IDF model {}", path.display()))?
        }
        None => {
            log::info!("no --model given; fitting TF-IDF on the input");
            fit_tfidf(&tokens, casefold)?
        }
    };
    let pairs: Vec<(&TokenRecord, &Vec<String>)> = records.iter().zip(&tokens).collect();
    let masked = par::try_map(&pairs, |(r, toks)| {
        mask_tertle(&r.doc_id, toks, &model, p, mask_token)
    })?;
    Ok(pairs
        .into_iter()
        .zip(masked)
        .map(|((r, _), mut m)| {
            if r.tokens.is_none() {
                if let Some(text) = &r.text {
                    m.text = splice(text, &m, mask_token);
                }
            }
            Output {
                doc_id: r.doc_id.clone(),
                author_id: r.author_id.clone().unwrap_or_default(),
                timestamp: r.timestamp,
                masked: m,
            }
        })
        .collect())
}

fn report<'a>(schema: &MaskSchema, outputs: &'a [Output]) -> Report<'a> {
    let per_document: Vec<DocProportion> = outputs
        .iter()
        .map(|o| DocProportion {
            doc_id: &o.doc_id,
            tokens: o.masked.tokens.len(),
            masked: o.masked.n_masked(),
            proportion: masked_proportion(&o.masked),
        })
        .collect();
    let tokens: usize = per_document.iter().map(|d| d.tokens).sum();
    let masked: usize = per_document.iter().map(|d| d.masked).sum();
    let mean = if per_document.is_empty() {
        0.0
    } else {
        per_document.iter().map(|d| d.proportion).sum::<f64>() / per_document.len() as f64
    };
    Report {
        schema: schema.label(),
        documents: outputs.len(),
        tokens,
        masked,
        proportion: if tokens == 0 {
            0.0
        } else {
            masked as f64 / tokens as f64
        },
        mean_document_proportion: mean,
        per_document,
    }
}
