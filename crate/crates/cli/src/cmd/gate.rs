use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use serde::Serialize;

use styleprobe::corpus::{
    build_episodes, load_corpus, load_episodes, write_episodes, Document, Episode,
};
use styleprobe::par;
use styleprobe::paraphrase::{
    gate_episode_with, histogram, ingest_scores, load_pairs, pair_edit_distance, score_pair,
    GateConfig, GatedEpisodePair, PairRecord, ParaphrasePair, SimilarityScorer,
};

use crate::config::Context;
use crate::io::write_json;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Paraphrase pairs (JSONL: orig_id, para_id, orig_text, para_text,
    /// sentences_orig?, sentences_para?, label?)
    #[arg(long, required_unless_present = "original_episodes")]
    pairs: Option<PathBuf>,

    /// Original corpus (JSONL) to cut into episodes; without it (and without
    /// episode files) only the histograms are produced
    #[arg(long, requires = "pairs", conflicts_with = "original_episodes")]
    corpus: Option<PathBuf>,

    /// Original episodes (JSONL), aligned position by position with
    /// --paraphrased-episodes
    #[arg(long, requires = "paraphrased_episodes")]
    original_episodes: Option<PathBuf>,

    #[arg(long, requires = "original_episodes", conflicts_with = "pairs")]
    paraphrased_episodes: Option<PathBuf>,

    /// Similarity scores (CSV orig_id,para_id,score); the built-in token F1
    /// is used when omitted
    #[arg(long)]
    scores: Option<PathBuf>,

    /// Documents per episode [default: 16]
    #[arg(long)]
    episode_len: Option<usize>,

    /// Documents kept per episode [default: 8]
    #[arg(long)]
    keep: Option<usize>,

    /// Histogram bins over [0, 1] [default: 20]
    #[arg(long)]
    bins: Option<usize>,

    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct Summary<'a> {
    scorer: &'a str,
    pairs: usize,
    episodes: usize,
    kept_per_episode: usize,
    mean_score: f64,
    mean_kept_score: Option<f64>,
    mean_edit_distance: f64,
}

struct PairStats {
    score: f64,
    edit: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn write_histograms(out: &Path, stem: &str, values: &[f64], bins: usize) -> anyhow::Result<()> {
    let h = histogram(values, bins, 0.0, 1.0)?;
    styleprobe::paraphrase::write_histogram(out.join(format!("{stem}.csv")), &h)?;
    Ok(())
}

fn pair_stats(
    pairs: &[ParaphrasePair],
    scorer: &SimilarityScorer,
) -> anyhow::Result<Vec<PairStats>> {
    Ok(par::try_map(
        pairs,
        |pair| -> styleprobe::Result<PairStats> {
            Ok(PairStats {
                score: score_pair(pair, scorer)?,
                edit: pair_edit_distance(pair)?,
            })
        },
    )?)
}

fn load_episode_file(path: &Path) -> anyhow::Result<Vec<Episode>> {
    let episodes = load_episodes(path).with_context(|| format!("reading {}", path.display()))?;
    anyhow::ensure!(
        !episodes.is_empty(),
        "{} contains no episodes",
        path.display()
    );
    Ok(episodes)
}

fn check_aligned(orig: &[Episode], para: &[Episode]) -> anyhow::Result<()> {
    anyhow::ensure!(
        orig.len() == para.len(),
        "{} original episodes but {} paraphrased ones",
        orig.len(),
        para.len()
    );
    for (o, p) in orig.iter().zip(para) {
        anyhow::ensure!(
            o.episode_id == p.episode_id,
            "misaligned episodes: original {} faces paraphrased {}",
            o.episode_id,
            p.episode_id
        );
        anyhow::ensure!(
            o.len() == p.len(),
            "episode {}: {} original documents but {} paraphrased",
            o.episode_id,
            o.len(),
            p.len()
        );
    }
    Ok(())
}

fn episode_pairs(orig: &[Episode], para: &[Episode]) -> anyhow::Result<Vec<ParaphrasePair>> {
    let mut out = Vec::new();
    for (o, p) in orig.iter().zip(para) {
        for (a, b) in o.documents.iter().zip(&p.documents) {
            out.push(ParaphrasePair::new(a.clone(), b.clone())?);
        }
    }
    Ok(out)
}

fn paraphrased_episodes(
    episodes: &[Episode],
    pairs: &[PairRecord],
) -> anyhow::Result<Vec<Episode>> {
    let mut by_orig: HashMap<&str, &PairRecord> = HashMap::new();
    for p in pairs {
        anyhow::ensure!(
            by_orig.insert(p.orig_id.as_str(), p).is_none(),
            "pair file lists original {} more than once",
            p.orig_id
        );
    }
    let mut used = 0;
    let out = episodes
        .iter()
        .map(|e| {
            let documents = e
                .documents
                .iter()
                .map(|d| {
                    let p = by_orig.get(d.doc_id.as_str()).with_context(|| {
                        format!(
                            "episode {}: no paraphrase for document {}",
                            e.episode_id, d.doc_id
                        )
                    })?;
                    anyhow::ensure!(
                        p.orig_text == d.text,
                        "pair {} / {}: original text differs from the corpus",
                        p.orig_id,
                        p.para_id
                    );
                    used += 1;
                    let mut para = Document::new(&p.para_id, &d.author_id, &p.para_text)
                        .with_timestamp(d.timestamp);
                    para.sentences = p.sentences_para.clone();
                    Ok(para)
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            Ok(Episode {
                episode_id: e.episode_id.clone(),
                author_id: e.author_id.clone(),
                documents,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    if used < pairs.len() {
        log::warn!(
            "{} pairs refer to documents outside every episode",
            pairs.len() - used
        );
    }
    Ok(out)
}

fn with_sentences(episodes: &mut [Episode], pairs: &[PairRecord]) {
    let spans: HashMap<&str, &PairRecord> = pairs.iter().map(|p| (p.orig_id.as_str(), p)).collect();
    for d in episodes.iter_mut().flat_map(|e| e.documents.iter_mut()) {
        if d.sentences.is_none() {
            if let Some(p) = spans.get(d.doc_id.as_str()) {
                d.sentences = p.sentences_orig.clone();
            }
        }
    }
}

fn write_gate_scores(
    path: &Path,
    gated: &[GatedEpisodePair],
    orig: &[Episode],
    para: &[Episode],
) -> anyhow::Result<()> {
    let mut text = String::from("episode_id,position,orig_id,para_id,score,kept\n");
    for ((g, o), p) in gated.iter().zip(orig).zip(para) {
        for (i, score) in g.per_doc_scores.iter().enumerate() {
            writeln!(
                text,
                "{},{},{},{},{},{}",
                o.episode_id,
                i,
                o.documents[i].doc_id,
                p.documents[i].doc_id,
                score,
                g.kept_indices.contains(&i)
            )?;
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run(args: Args, ctx: &Context) -> anyhow::Result<()> {
    let cfg = &ctx.config;
    let out = ctx.out_dir(args.out_dir.clone())?;
    let bins = args.bins.or(cfg.bins).unwrap_or(20);
    let config = GateConfig {
        episode_len: args
            .episode_len
            .or(cfg.episode_len)
            .unwrap_or(GateConfig::default().episode_len),
        keep: args.keep.or(cfg.keep).unwrap_or(GateConfig::default().keep),
    };

    let scorer = match &args.scores {
        Some(path) => SimilarityScorer::External(
            ingest_scores(path).with_context(|| format!("reading {}", path.display()))?,
        ),
        None => {
            log::warn!("no --scores given; using the built-in token F1 scorer");
            SimilarityScorer::TokenF1
        }
    };

    let mut records: Vec<PairRecord> = Vec::new();
    let episodes = match (&args.original_episodes, &args.paraphrased_episodes) {
        (Some(o), Some(p)) => {
            let (o, p) = (load_episode_file(o)?, load_episode_file(p)?);
            check_aligned(&o, &p)?;
            Some((o, p))
        }
        _ => {
            let path = args
                .pairs
                .as_deref()
                .context("--pairs is required without episode files")?;
            records = load_pairs(path).with_context(|| format!("reading {}", path.display()))?;
            anyhow::ensure!(
                !records.is_empty(),
                "{} contains no paraphrase pairs",
                path.display()
            );
            match &args.corpus {
                Some(corpus_path) => {
                    let corpus = load_corpus(corpus_path)
                        .with_context(|| format!("reading {}", corpus_path.display()))?;
                    anyhow::ensure!(
                        !corpus.is_empty(),
                        "{} contains no documents",
                        corpus_path.display()
                    );
                    let mut originals = build_episodes(&corpus, config.episode_len)?;
                    anyhow::ensure!(
                        !originals.is_empty(),
                        "no author has {} documents, so there are no episodes to gate",
                        config.episode_len
                    );
                    with_sentences(&mut originals, &records);
                    let paraphrased = paraphrased_episodes(&originals, &records)?;
                    Some((originals, paraphrased))
                }
                None => None,
            }
        }
    };

    let (pairs, labels): (Vec<ParaphrasePair>, Vec<Option<bool>>) = match &episodes {
        Some((o, p)) if records.is_empty() => {
            let pairs = episode_pairs(o, p)?;
            let n = pairs.len();
            (pairs, vec![None; n])
        }
        _ => (
            records
                .iter()
                .map(ParaphrasePair::from_record)
                .collect::<styleprobe::Result<Vec<_>>>()?,
            records.iter().map(|r| r.label).collect(),
        ),
    };

    let stats = pair_stats(&pairs, &scorer)?;
    let scores: Vec<f64> = stats.iter().map(|s| s.score).collect();
    let edits: Vec<f64> = stats.iter().map(|s| s.edit).collect();
    let mut table = String::from("orig_id,para_id,score,edit_distance,label\n");
    for ((p, s), label) in pairs.iter().zip(&stats).zip(&labels) {
        let label = label.map(|l| l.to_string()).unwrap_or_default();
        writeln!(
            table,
            "{},{},{},{},{}",
            p.original.doc_id, p.paraphrase.doc_id, s.score, s.edit, label
        )?;
    }
    std::fs::write(out.join("pair_scores.csv"), table)?;
    write_histograms(&out, "score_hist", &scores, bins)?;
    write_histograms(&out, "edit_hist", &edits, bins)?;
    if labels.iter().any(Option::is_some) {
        for (want, tag) in [(true, "pos"), (false, "neg")] {
            let pick = |v: &[f64]| -> Vec<f64> {
                labels
                    .iter()
                    .zip(v)
                    .filter(|(l, _)| **l == Some(want))
                    .map(|(_, x)| *x)
                    .collect()
            };
            write_histograms(&out, &format!("score_hist_{tag}"), &pick(&scores), bins)?;
            write_histograms(&out, &format!("edit_hist_{tag}"), &pick(&edits), bins)?;
        }
    }

    let mut summary = Summary {
        scorer: scorer.name(),
        pairs: pairs.len(),
        episodes: 0,
        kept_per_episode: config.keep,
        mean_score: mean(&scores),
        mean_kept_score: None,
        mean_edit_distance: mean(&edits),
    };

    if let Some((originals, paraphrased)) = &episodes {
        let jobs: Vec<(&Episode, &Episode)> = originals.iter().zip(paraphrased).collect();
        let gated = par::try_map(&jobs, |(o, p)| gate_episode_with(o, p, &scorer, config))?;

        let kept_o: Vec<Episode> = gated.iter().map(|g| g.original_episode.clone()).collect();
        let kept_p: Vec<Episode> = gated
            .iter()
            .map(|g| g.paraphrased_episode.clone())
            .collect();
        write_episodes(out.join("gated_original.jsonl"), &kept_o)?;
        write_episodes(out.join("gated_paraphrase.jsonl"), &kept_p)?;
        write_gate_scores(&out.join("gate_scores.csv"), &gated, originals, paraphrased)?;
        summary.episodes = gated.len();
        summary.mean_kept_score = Some(mean(
            &gated
                .iter()
                .map(|g| g.kept_mean_score())
                .collect::<Vec<_>>(),
        ));
    }
    write_json(&out.join("summary.json"), &summary)
}
