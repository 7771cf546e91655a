use std::path::PathBuf;

use styleprobe::masking::fit_tfidf;

use crate::config::Context;
use crate::io::{load_token_records, write_json, TokenRecord};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// JSONL documents with `tokens` or whitespace-tokenized `text`
    #[arg(long)]
    input: PathBuf,

    /// Where to write the model (JSON)
    #[arg(long)]
    output: PathBuf,

    /// Keep case when counting terms
    #[arg(long)]
    no_casefold: bool,
}

pub fn run(args: Args, ctx: &Context) -> anyhow::Result<()> {
    let records = load_token_records(&args.input)?;
    let tokens = records
        .iter()
        .map(TokenRecord::token_list)
        .collect::<anyhow::Result<Vec<_>>>()?;
    let casefold = !args.no_casefold && ctx.config.casefold.unwrap_or(true);
    let model = fit_tfidf(&tokens, casefold)?;
    write_json(&args.output, &model)?;
    log::info!(
        "fitted TF-IDF on {} documents, {} terms",
        model.n_docs,
        model.df.len()
    );
    Ok(())
}
