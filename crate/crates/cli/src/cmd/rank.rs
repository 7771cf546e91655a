use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use serde::{Deserialize, Serialize};

use styleprobe::corpus::{load_episodes, Episode, QueryTargetSet};
use styleprobe::embedding::{embed_episodes, EmbeddingProvider};
use styleprobe::ranking::{compare_rankings, evaluate_vectors, RankingReport};
use styleprobe::stats::{t_paired, TestResult};

use crate::config::Context;
use crate::io::write_json;
use crate::provider::ProviderArgs;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Query episodes (JSONL); query i pairs with target i
    #[arg(long)]
    queries: PathBuf,

    /// Target episodes (JSONL), one per author
    #[arg(long)]
    targets: PathBuf,

    /// Paraphrased versions of the queries, same episode ids and order;
    /// adds para_ranks.csv, drift.csv and drift_summary.json
    #[arg(long)]
    paraphrased_queries: Option<PathBuf>,

    /// CSV `query_id,similarity` relating each query to its paraphrase
    #[arg(long, requires = "paraphrased_queries")]
    similarities: Option<PathBuf>,

    /// Directory for ranks.csv and summary.json
    #[arg(long)]
    out_dir: Option<PathBuf>,

    #[command(flatten)]
    provider: ProviderArgs,
}

#[derive(Serialize)]
struct DriftSummary {
    mrr_original: f64,
    mrr_paraphrased: f64,
    /// Paired t-test on per-query reciprocal ranks, original minus paraphrased.
    t_paired: Option<TestResult>,
    kendall_tau: Option<f64>,
    kendall_p: Option<f64>,
}

#[derive(Deserialize)]
struct SimilarityRow {
    query_id: String,
    similarity: f64,
}

fn episodes(path: &Path) -> anyhow::Result<Vec<Episode>> {
    load_episodes(path).with_context(|| format!("reading {}", path.display()))
}

fn similarities(path: &Path, report: &RankingReport) -> anyhow::Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut by_id = HashMap::new();
    for (i, row) in reader.deserialize::<SimilarityRow>().enumerate() {
        let row = row.with_context(|| format!("{}: line {}", path.display(), i + 2))?;
        anyhow::ensure!(
            by_id.insert(row.query_id.clone(), row.similarity).is_none(),
            "{}: duplicate query id {}",
            path.display(),
            row.query_id
        );
    }
    report
        .per_query
        .iter()
        .map(|q| {
            by_id.get(&q.query_id).copied().with_context(|| {
                format!("{}: no similarity for query {}", path.display(), q.query_id)
            })
        })
        .collect()
}

fn rank_with(
    provider: &dyn EmbeddingProvider,
    queries: &[Episode],
    target_vecs: &[styleprobe::embedding::EmbeddingVector],
) -> anyhow::Result<RankingReport> {
    let refs: Vec<&Episode> = queries.iter().collect();
    let qv = embed_episodes(provider, &refs)?;
    let ids: Vec<String> = queries.iter().map(|q| q.episode_id.clone()).collect();
    Ok(evaluate_vectors(&ids, &qv, target_vecs)?)
}

pub fn run(args: Args, ctx: &Context) -> anyhow::Result<()> {
    let out = ctx.out_dir(args.out_dir.clone())?;
    let qts = QueryTargetSet::new(episodes(&args.queries)?, episodes(&args.targets)?)?;
    let para_queries = args
        .paraphrased_queries
        .as_deref()
        .map(episodes)
        .transpose()?;
    if let Some(para) = &para_queries {
        anyhow::ensure!(
            para.len() == qts.queries.len()
                && para
                    .iter()
                    .zip(&qts.queries)
                    .all(|(p, q)| p.episode_id == q.episode_id),
            "paraphrased queries must list the same episode ids as the queries, in the same order"
        );
    }

    let provider = args.provider.build(ctx)?;
    let target_refs: Vec<&Episode> = qts.targets.iter().collect();
    let tv = embed_episodes(provider.as_ref(), &target_refs)?;
    let report = rank_with(provider.as_ref(), &qts.queries, &tv)?;
    report.write_csv(out.join("ranks.csv"))?;
    report.write_summary(out.join("summary.json"))?;

    if let Some(para) = para_queries {
        let para_report = rank_with(provider.as_ref(), &para, &tv)?;
        para_report.write_csv(out.join("para_ranks.csv"))?;
        para_report.write_summary(out.join("para_summary.json"))?;
        let sims = args
            .similarities
            .as_deref()
            .map(|p| similarities(p, &report))
            .transpose()?;
        let drift = compare_rankings(&report, &para_report, sims.as_deref())?;
        drift.write_csv(out.join("drift.csv"))?;
        let t = (report.m >= 2)
            .then(|| t_paired(&report.reciprocal_ranks(), &para_report.reciprocal_ranks()))
            .transpose()?;
        write_json(
            &out.join("drift_summary.json"),
            &DriftSummary {
                mrr_original: report.mrr,
                mrr_paraphrased: para_report.mrr,
                t_paired: t,
                kendall_tau: drift.kendall_tau,
                kendall_p: drift.kendall_p,
            },
        )?;
    }
    Ok(())
}
