use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::Context as _;
use serde::Serialize;

use styleprobe::corpus::{
    build_episodes, build_query_target, load_corpus, write_episodes, DEFAULT_EPISODE_LEN,
};
use styleprobe::seed;

use crate::config::Context;
use crate::io::write_json;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Corpus JSONL (doc_id, author_id, timestamp?, text)
    #[arg(long)]
    corpus: PathBuf,

    /// Documents per episode [default: 16]
    #[arg(long)]
    episode_len: Option<usize>,

    /// Directory for episodes.jsonl, queries.jsonl, targets.jsonl and summary.json
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct Summary {
    documents: usize,
    authors: usize,
    episode_len: usize,
    episodes: usize,
    m: usize,
    n: usize,
}

pub fn run(args: Args, ctx: &Context) -> anyhow::Result<()> {
    let root = ctx.seed()?;
    let out = ctx.out_dir(args.out_dir)?;
    let episode_len = args
        .episode_len
        .or(ctx.config.episode_len)
        .unwrap_or(DEFAULT_EPISODE_LEN);
    let corpus =
        load_corpus(&args.corpus).with_context(|| format!("reading {}", args.corpus.display()))?;
    let episodes = build_episodes(&corpus, episode_len)?;
    let qts = build_query_target(&episodes, seed::derive(root, "query-target"))?;

    write_episodes(out.join("episodes.jsonl"), &episodes)?;
    write_episodes(out.join("queries.jsonl"), &qts.queries)?;
    write_episodes(out.join("targets.jsonl"), &qts.targets)?;
    let authors: BTreeSet<&str> = corpus
        .documents
        .iter()
        .map(|d| d.author_id.as_str())
        .collect();
    write_json(
        &out.join("summary.json"),
        &Summary {
            documents: corpus.len(),
            authors: authors.len(),
            episode_len,
            episodes: episodes.len(),
            m: qts.m(),
            n: qts.n(),
        },
    )?;
    Ok(())
}
