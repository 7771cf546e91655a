use std::path::PathBuf;

use anyhow::Context as _;

use styleprobe::discrimination::{load_labeled, sweep_group_size, write_sweep_csv, SweepConfig};
use styleprobe::seed;

use crate::config::Context;
use crate::provider::ProviderArgs;

const DEFAULT_SIZES: [usize; 5] = [1, 2, 4, 8, 16];

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Labeled documents (JSONL: doc_id, labels, text)
    #[arg(long)]
    input: PathBuf,

    /// Group sizes to sweep [default: 1,2,4,8,16]
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,

    /// Trials per group size [default: 1000]
    #[arg(long)]
    n_trials: Option<usize>,

    /// Share of same-label trials [default: 0.5]
    #[arg(long)]
    positive_fraction: Option<f64>,

    /// Draw each trial's label independently instead of fixing the positive count
    #[arg(long)]
    unstratified: bool,

    /// Bootstrap resamples for the EER interval [default: 1000]
    #[arg(long)]
    n_boot: Option<usize>,

    /// Interval confidence level [default: 0.95]
    #[arg(long)]
    confidence: Option<f64>,

    /// Directory for sweep.csv and roc_g{size}.csv
    #[arg(long)]
    out_dir: Option<PathBuf>,

    #[command(flatten)]
    provider: ProviderArgs,
}

pub fn run(args: Args, ctx: &Context) -> anyhow::Result<()> {
    let cfg = &ctx.config;
    let root = ctx.seed()?;
    let out = ctx.out_dir(args.out_dir.clone())?;
    let sizes = args
        .sizes
        .clone()
        .or_else(|| cfg.sizes.clone())
        .unwrap_or_else(|| DEFAULT_SIZES.to_vec());
    anyhow::ensure!(!sizes.is_empty(), "no group sizes given");

    let mut config = SweepConfig::new(
        args.n_trials.or(cfg.n_trials).unwrap_or(1000),
        seed::derive(root, "sweep"),
    );
    if let Some(f) = args.positive_fraction.or(cfg.positive_fraction) {
        config.positive_fraction = f;
    }
    config.stratified = !(args.unstratified || cfg.unstratified.unwrap_or(false));
    if let Some(n) = args.n_boot.or(cfg.n_boot) {
        config.n_boot = n;
    }
    if let Some(c) = args.confidence.or(cfg.confidence) {
        config.confidence = c;
    }

    let docs =
        load_labeled(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    anyhow::ensure!(
        !docs.is_empty(),
        "{} contains no documents",
        args.input.display()
    );
    let provider = args.provider.build(ctx)?;
    let rows = sweep_group_size(&docs, &sizes, provider.as_ref(), config)?;

    write_sweep_csv(out.join("sweep.csv"), &rows)?;
    let mut failed = Vec::new();
    for row in &rows {
        match &row.outcome {
            Ok((m, curve)) => {
                curve.write_csv(out.join(format!("roc_g{}.csv", row.group_size)))?;
                log::info!("g={}: auc {:.4}, eer {:.4}", row.group_size, m.auc, m.eer);
            }
            Err(e) => {
                eprintln!("warning: group size {}: {e}", row.group_size);
                failed.push(row.group_size);
            }
        }
    }
    anyhow::ensure!(
        failed.len() < rows.len(),
        "every group size failed ({failed:?}); see the warnings above"
    );
    Ok(())
}
