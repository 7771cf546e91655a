use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use serde::{Deserialize, Serialize};

use styleprobe::seed;
use styleprobe::stats::{anova_oneway, bootstrap_ci, kendall_tau, quantile_sorted, t_paired};

use crate::config::Context;
use crate::io::{print_json, write_json};

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(subcommand)]
    test: Test,

    /// Write the JSON result here instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(clap::Subcommand, Debug)]
enum Test {
    /// One-way ANOVA over a CSV with columns group,value
    Anova { input: PathBuf },
    /// Paired t-test over a CSV with columns a,b
    Ttest { input: PathBuf },
    /// Kendall's tau-b over a CSV with columns x,y
    Kendall { input: PathBuf },
    /// Percentile bootstrap interval over a CSV with a `value` column
    Bootstrap {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "mean")]
        statistic: Statistic,
        /// Resamples [default: 1000]
        #[arg(long)]
        n_boot: Option<usize>,
        /// Interval confidence level [default: 0.95]
        #[arg(long)]
        confidence: Option<f64>,
    },
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
enum Statistic {
    Mean,
    Median,
}

#[derive(Deserialize)]
struct GroupRow {
    group: String,
    value: f64,
}

#[derive(Deserialize)]
struct PairRow {
    a: f64,
    b: f64,
}

#[derive(Deserialize)]
struct XyRow {
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct ValueRow {
    value: f64,
}

#[derive(Serialize)]
struct BootstrapResult {
    statistic: Statistic,
    estimate: f64,
    lo: f64,
    hi: f64,
    n: usize,
    n_boot: usize,
    confidence: f64,
}

fn rows<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let out = reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("{}: line {}", path.display(), i + 2)))
        .collect::<anyhow::Result<Vec<T>>>()?;
    anyhow::ensure!(!out.is_empty(), "{} has no data rows", path.display());
    Ok(out)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.5)
}

pub fn run(args: Args, ctx: &Context) -> anyhow::Result<()> {
    let value = match args.test {
        Test::Anova { input } => {
            let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in rows::<GroupRow>(&input)? {
                groups.entry(r.group).or_default().push(r.value);
            }
            let values: Vec<Vec<f64>> = groups.into_values().collect();
            serde_json::to_value(anova_oneway(&values)?)?
        }
        Test::Ttest { input } => {
            let (a, b): (Vec<f64>, Vec<f64>) = rows::<PairRow>(&input)?
                .into_iter()
                .map(|r| (r.a, r.b))
                .unzip();
            serde_json::to_value(t_paired(&a, &b)?)?
        }
        Test::Kendall { input } => {
            let (x, y): (Vec<f64>, Vec<f64>) = rows::<XyRow>(&input)?
                .into_iter()
                .map(|r| (r.x, r.y))
                .unzip();
            serde_json::to_value(kendall_tau(&x, &y)?)?
        }
        Test::Bootstrap {
            input,
            statistic,
            n_boot,
            confidence,
        } => {
            let values: Vec<f64> = rows::<ValueRow>(&input)?
                .into_iter()
                .map(|r| r.value)
                .collect();
            let n_boot = n_boot.or(ctx.config.n_boot).unwrap_or(1000);
            let confidence = confidence.or(ctx.config.confidence).unwrap_or(0.95);
            let f: fn(&[f64]) -> f64 = match statistic {
                Statistic::Mean => mean,
                Statistic::Median => median,
            };
            let (lo, hi) = bootstrap_ci(
                &values,
                f,
                n_boot,
                confidence,
                seed::derive(ctx.seed()?, "bootstrap"),
            )?;
            serde_json::to_value(BootstrapResult {
                statistic,
                estimate: f(&values),
                lo,
                hi,
                n: values.len(),
                n_boot,
                confidence,
            })?
        }
    };
    match &args.output {
        Some(path) => write_json(path, &value),
        None => print_json(&value),
    }
}
