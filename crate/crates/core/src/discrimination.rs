//! Group-pooled label discrimination.
//!
//! Trials pair two disjoint groups of documents. A trial is positive when
//! both groups were drawn from the same label. Its score is the dot product
//! of the two groups' mean embeddings; ROC, EER and AUC summarize how well
//! scores separate positive from negative trials.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_jsonl, Document, Episode};
use crate::embedding::{dot, embed_episodes, mean_pool, EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};
use crate::stats::{normal_quantile, percentile_interval};
use crate::{par, seed};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub doc_id: String,
    pub labels: Vec<String>,
    pub text: String,
}

impl LabeledDocument {
    /// The document as a length-1 episode.
    ///
    /// The sorted, `|`-joined label set stands in for the author id; only the
    /// mock provider reads it.
    pub fn to_episode(&self) -> Episode {
        let mut labels = self.labels.clone();
        labels.sort();
        let author = labels.join("|");
        Episode::singleton(&Document::new(&self.doc_id, author, &self.text))
    }
}

pub fn load_labeled(path: impl AsRef<Path>) -> Result<Vec<LabeledDocument>> {
    let docs: Vec<LabeledDocument> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    for (i, d) in docs.iter().enumerate() {
        if d.labels.is_empty() {
            return Err(Error::InvalidInput(format!(
                "document {} has no labels",
                d.doc_id
            )));
        }
        if !seen.insert(d.doc_id.as_str()) {
            return Err(Error::Integrity(format!(
                "record {}: duplicate doc_id {}",
                i + 1,
                d.doc_id
            )));
        }
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub group_a: Vec<String>,
    pub group_b: Vec<String>,
    pub label_a: String,
    pub label_b: String,
    pub same_label: bool,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
    pub group_size: usize,
}

impl TrialSet {
    /// Scores and labels of scored trials; errors if any trial is unscored.
    pub fn scores_and_labels(&self) -> Result<(Vec<f64>, Vec<bool>)> {
        self.trials
            .iter()
            .map(|t| {
                t.score
                    .map(|s| (s, t.same_label))
                    .ok_or_else(|| Error::InvalidInput("trial set has not been scored".into()))
            })
            .collect::<Result<Vec<_>>>()
            .map(|v| v.into_iter().unzip())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub group_size: usize,
    pub n_trials: usize,
    pub positive_fraction: f64,
    /// Fix the positive count at `round(n_trials * positive_fraction)`.
    /// When false, both labels are drawn independently and the positive
    /// share follows the label distribution.
    pub stratified: bool,
}

impl SamplingConfig {
    pub fn new(group_size: usize, n_trials: usize) -> Self {
        SamplingConfig {
            group_size,
            n_trials,
            positive_fraction: 0.5,
            stratified: true,
        }
    }
}

const MAX_REDRAWS: usize = 1000;

struct LabelIndex<'a> {
    members: BTreeMap<&'a str, Vec<usize>>,
}

impl<'a> LabelIndex<'a> {
    fn new(docs: &'a [LabeledDocument]) -> Self {
        let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, d) in docs.iter().enumerate() {
            let mut seen = HashSet::new();
            for l in &d.labels {
                if seen.insert(l.as_str()) {
                    members.entry(l.as_str()).or_default().push(i);
                }
            }
        }
        LabelIndex { members }
    }

    fn with_at_least(&self, n: usize) -> Vec<&'a str> {
        self.members
            .iter()
            .filter(|(_, m)| m.len() >= n)
            .map(|(l, _)| *l)
            .collect()
    }
}

fn draw(rng: &mut seed::Rng, pool: &[usize], k: usize) -> Vec<usize> {
    sample_indices(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

fn positive_trial(
    rng: &mut seed::Rng,
    idx: &LabelIndex,
    labels: &[&str],
    g: usize,
) -> (Vec<usize>, Vec<usize>, String) {
    let label = labels[rng.random_range(0..labels.len())];
    let picked = draw(rng, &idx.members[label], 2 * g);
    (
        picked[..g].to_vec(),
        picked[g..].to_vec(),
        label.to_string(),
    )
}

fn negative_trial(
    rng: &mut seed::Rng,
    idx: &LabelIndex,
    labels: &[&str],
    g: usize,
) -> Result<(Vec<usize>, Vec<usize>, String, String)> {
    for _ in 0..MAX_REDRAWS {
        let a = rng.random_range(0..labels.len());
        let mut b = rng.random_range(0..labels.len() - 1);
        if b >= a {
            b += 1;
        }
        let group_a = draw(rng, &idx.members[labels[a]], g);
        let taken: HashSet<usize> = group_a.iter().copied().collect();
        let pool: Vec<usize> = idx.members[labels[b]]
            .iter()
            .copied()
            .filter(|i| !taken.contains(i))
            .collect();
        if pool.len() < g {
            continue;
        }
        let group_b = draw(rng, &pool, g);
        return Ok((
            group_a,
            group_b,
            labels[a].to_string(),
            labels[b].to_string(),
        ));
    }
    Err(Error::Infeasible(format!(
        "could not draw disjoint groups of {g} from two distinct labels"
    )))
}

/// Draw trials deterministically from `rng_seed`.
pub fn sample_trials(
    docs: &[LabeledDocument],
    config: SamplingConfig,
    rng_seed: u64,
) -> Result<TrialSet> {
    let g = config.group_size;
    if g == 0 {
        return Err(Error::InvalidInput("group_size must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&config.positive_fraction) {
        return Err(Error::InvalidInput(
            "positive_fraction must lie in [0, 1]".into(),
        ));
    }
    let idx = LabelIndex::new(docs);
    let pos_labels = idx.with_at_least(2 * g);
    let neg_labels = idx.with_at_least(g);
    let mut rng = seed::rng(rng_seed);

    let make =
        |ids: &[usize]| -> Vec<String> { ids.iter().map(|&i| docs[i].doc_id.clone()).collect() };
    let mut trials = Vec::with_capacity(config.n_trials);

    if config.stratified {
        let n_pos = (config.n_trials as f64 * config.positive_fraction).round() as usize;
        let n_neg = config.n_trials - n_pos;
        if n_pos > 0 && pos_labels.is_empty() {
            return Err(Error::Infeasible(format!(
                "no label has the {} documents a positive trial at group size {g} needs",
                2 * g
            )));
        }
        if n_neg > 0 && neg_labels.len() < 2 {
            return Err(Error::Infeasible(format!(
                "negative trials need two labels with at least {g} documents"
            )));
        }
        for i in 0..config.n_trials {
            if i < n_pos {
                let (a, b, label) = positive_trial(&mut rng, &idx, &pos_labels, g);
                trials.push(Trial {
                    group_a: make(&a),
                    group_b: make(&b),
                    label_a: label.clone(),
                    label_b: label,
                    same_label: true,
                    score: None,
                });
            } else {
                let (a, b, la, lb) = negative_trial(&mut rng, &idx, &neg_labels, g)?;
                trials.push(Trial {
                    group_a: make(&a),
                    group_b: make(&b),
                    label_a: la,
                    label_b: lb,
                    same_label: false,
                    score: None,
                });
            }
        }
    } else {
        if neg_labels.is_empty() {
            return Err(Error::Infeasible(format!("no label has {g} documents")));
        }
        for _ in 0..config.n_trials {
            let mut drawn = None;
            for _ in 0..MAX_REDRAWS {
                let la = neg_labels[rng.random_range(0..neg_labels.len())];
                let lb = neg_labels[rng.random_range(0..neg_labels.len())];
                if la == lb {
                    if idx.members[la].len() < 2 * g {
                        continue;
                    }
                    let (a, b, label) = positive_trial(&mut rng, &idx, &[la], g);
                    drawn = Some((a, b, label.clone(), label, true));
                } else {
                    let pair = [la, lb];
                    let (a, b, la, lb) = negative_trial(&mut rng, &idx, &pair, g)?;
                    // negative_trial may swap the order; keep whatever it chose
                    drawn = Some((a, b, la, lb, false));
                }
                break;
            }
            let (a, b, la, lb, same) = drawn.ok_or_else(|| {
                Error::Infeasible("unstratified sampling kept drawing infeasible pairs".into())
            })?;
            trials.push(Trial {
                group_a: make(&a),
                group_b: make(&b),
                label_a: la,
                label_b: lb,
                same_label: same,
                score: None,
            });
        }
    }
    Ok(TrialSet {
        trials,
        group_size: g,
    })
}

/// Embed every document referenced by the trial sets, once each.
pub fn embed_documents(
    docs: &[LabeledDocument],
    sets: &[&TrialSet],
    provider: &dyn EmbeddingProvider,
) -> Result<HashMap<String, EmbeddingVector>> {
    let by_id: HashMap<&str, &LabeledDocument> =
        docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let mut order = Vec::new();
    let mut seen = HashSet::new();
    for set in sets {
        for t in &set.trials {
            for id in t.group_a.iter().chain(&t.group_b) {
                if seen.insert(id.as_str()) {
                    order.push(id.as_str());
                }
            }
        }
    }
    let episodes = order
        .iter()
        .map(|id| {
            by_id.get(id).map(|d| d.to_episode()).ok_or_else(|| {
                Error::InvalidInput(format!("trial references unknown document {id}"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Episode> = episodes.iter().collect();
    let vectors = embed_episodes(provider, &refs)?;
    Ok(order.into_iter().map(String::from).zip(vectors).collect())
}

/// Score trials from precomputed document vectors.
pub fn score_trials_with(
    ts: &TrialSet,
    vectors: &HashMap<String, EmbeddingVector>,
) -> Result<TrialSet> {
    let lookup = |ids: &[String]| -> Result<EmbeddingVector> {
        let vs = ids
            .iter()
            .map(|id| {
                vectors
                    .get(id)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("no vector for document {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        mean_pool(&vs)
    };
    let scores = par::try_map(&ts.trials, |t| {
        dot(&lookup(&t.group_a)?, &lookup(&t.group_b)?)
    })?;
    let mut out = ts.clone();
    for (t, s) in out.trials.iter_mut().zip(scores) {
        t.score = Some(s);
    }
    Ok(out)
}

/// `score = dot(mean(embed(group_a)), mean(embed(group_b)))` for every trial.
pub fn score_trials(
    ts: &TrialSet,
    docs: &[LabeledDocument],
    provider: &dyn EmbeddingProvider,
) -> Result<TrialSet> {
    let vectors = embed_documents(docs, &[ts], provider)?;
    score_trials_with(ts, &vectors)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub eer: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl RocCurve {
    /// CSV `fpr,tpr,threshold`; the origin carries threshold `inf`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "fpr,tpr,threshold").map_err(io)?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.fpr, p.tpr, p.threshold).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

fn label_counts(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(
            "scores and labels differ in length".into(),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate(
            "ROC needs at least one positive and one negative".into(),
        ));
    }
    Ok((n_pos, n_neg))
}

/// EER of a piecewise-linear ROC: the point where `fpr = 1 - tpr`, linearly
/// interpolated within the crossing segment.
fn eer_from_points(points: &[RocPoint]) -> f64 {
    let gap = |p: &RocPoint| p.fpr + p.tpr - 1.0;
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (ga, gb) = (gap(a), gap(b));
        if ga == 0.0 {
            return a.fpr;
        }
        if ga < 0.0 && gb >= 0.0 {
            let t = -ga / (gb - ga);
            return a.fpr + t * (b.fpr - a.fpr);
        }
    }
    points.last().map_or(0.5, |p| p.fpr)
}

/// ROC by sweeping thresholds over distinct scores, high to low. Tied scores
/// form a single (diagonal) step. AUC is the trapezoid area.
pub fn roc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let (n_pos, n_neg) = label_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area2 = 0u128; // twice the area, in units of 1/(n_pos*n_neg)
    for run in order.chunk_by(|&i, &j| scores[i] == scores[j]) {
        let dp = run.iter().filter(|&&i| labels[i]).count();
        let dn = run.len() - dp;
        area2 += (dn as u128) * (2 * tp as u128 + dp as u128);
        tp += dp;
        fp += dn;
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold: scores[run[0]],
        });
    }
    let auc = area2 as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    let eer = eer_from_points(&points);
    Ok(RocCurve {
        points,
        auc,
        eer,
        n_pos,
        n_neg,
    })
}

/// Hanley-McNeil standard error of an AUC estimate.
pub fn hanley_mcneil_se(auc: f64, n_pos: usize, n_neg: usize) -> f64 {
    let a = auc;
    let q1 = a / (2.0 - a);
    let q2 = 2.0 * a * a / (1.0 + a);
    let (np, nn) = (n_pos as f64, n_neg as f64);
    let var = (a * (1.0 - a) + (np - 1.0) * (q1 - a * a) + (nn - 1.0) * (q2 - a * a)) / (np * nn);
    var.max(0.0).sqrt()
}

/// Normal-approximation interval `auc ± z * SE`, clipped to `[0, 1]`.
pub fn auc_ci(auc: f64, n_pos: usize, n_neg: usize, confidence: f64) -> Result<(f64, f64)> {
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput(
            "AUC interval needs n_pos, n_neg >= 1".into(),
        ));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    let z = normal_quantile(0.5 + confidence / 2.0);
    let se = hanley_mcneil_se(auc, n_pos, n_neg);
    Ok(((auc - z * se).max(0.0), (auc + z * se).min(1.0)))
}

const MAX_RESAMPLE_RETRIES: usize = 100;

/// Percentile bootstrap interval of the EER over resampled trials.
///
/// Resample `b` uses its own generator seeded with `rng_seed + b`; a
/// resample lacking either class is redrawn from the same generator.
pub fn eer_ci(
    scores: &[f64],
    labels: &[bool],
    n_boot: usize,
    confidence: f64,
    rng_seed: u64,
) -> Result<(f64, f64)> {
    label_counts(scores, labels)?;
    if n_boot == 0 {
        return Err(Error::InvalidInput("n_boot must be at least 1".into()));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    let n = scores.len();
    let replicates = par::map_range(n_boot, |b| -> Result<f64> {
        let mut rng = seed::rng(rng_seed.wrapping_add(b as u64));
        for _ in 0..MAX_RESAMPLE_RETRIES {
            let picks: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let s: Vec<f64> = picks.iter().map(|&i| scores[i]).collect();
            let l: Vec<bool> = picks.iter().map(|&i| labels[i]).collect();
            match roc(&s, &l) {
                Ok(curve) => return Ok(curve.eer),
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Degenerate(format!(
            "resample {b} lacked a class after {MAX_RESAMPLE_RETRIES} redraws"
        )))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(percentile_interval(replicates, confidence))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_trials: usize,
    pub positive_fraction: f64,
    pub stratified: bool,
    pub n_boot: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(n_trials: usize, seed: u64) -> Self {
        SweepConfig {
            n_trials,
            positive_fraction: 0.5,
            stratified: true,
            n_boot: 1000,
            confidence: 0.95,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepMetrics {
    pub auc: f64,
    pub auc_lo: f64,
    pub auc_hi: f64,
    pub eer: f64,
    pub eer_lo: f64,
    pub eer_hi: f64,
}

#[derive(Debug)]
pub struct SweepRow {
    pub group_size: usize,
    pub n_trials: usize,
    pub outcome: Result<(SweepMetrics, RocCurve)>,
}

impl SweepRow {
    pub fn metrics(&self) -> Option<&SweepMetrics> {
        self.outcome.as_ref().ok().map(|(m, _)| m)
    }

    pub fn roc(&self) -> Option<&RocCurve> {
        self.outcome.as_ref().ok().map(|(_, r)| r)
    }
}

fn summarize(ts: &TrialSet, config: &SweepConfig) -> Result<(SweepMetrics, RocCurve)> {
    let (scores, labels) = ts.scores_and_labels()?;
    let curve = roc(&scores, &labels)?;
    let (auc_lo, auc_hi) = auc_ci(curve.auc, curve.n_pos, curve.n_neg, config.confidence)?;
    let boot_seed = seed::derive(config.seed, &format!("eer/{}", ts.group_size));
    let (eer_lo, eer_hi) = eer_ci(
        &scores,
        &labels,
        config.n_boot,
        config.confidence,
        boot_seed,
    )?;
    Ok((
        SweepMetrics {
            auc: curve.auc,
            auc_lo,
            auc_hi,
            eer: curve.eer,
            eer_lo,
            eer_hi,
        },
        curve,
    ))
}

/// One row per group size; an infeasible size fails only its own row.
/// Provider failures abort the whole sweep.
pub fn sweep_group_size(
    docs: &[LabeledDocument],
    sizes: &[usize],
    provider: &dyn EmbeddingProvider,
    config: SweepConfig,
) -> Result<Vec<SweepRow>> {
    let sampled: Vec<Result<TrialSet>> = sizes
        .iter()
        .map(|&g| {
            let sampling = SamplingConfig {
                group_size: g,
                n_trials: config.n_trials,
                positive_fraction: config.positive_fraction,
                stratified: config.stratified,
            };
            sample_trials(
                docs,
                sampling,
                seed::derive(config.seed, &format!("trials/{g}")),
            )
        })
        .collect();
    let feasible: Vec<&TrialSet> = sampled.iter().filter_map(|s| s.as_ref().ok()).collect();
    let vectors = embed_documents(docs, &feasible, provider)?;
    Ok(sizes
        .iter()
        .zip(sampled)
        .map(|(&g, set)| SweepRow {
            group_size: g,
            n_trials: config.n_trials,
            outcome: set
                .and_then(|ts| score_trials_with(&ts, &vectors))
                .and_then(|ts| summarize(&ts, &config)),
        })
        .collect())
}

/// CSV `group_size,n_trials,auc,auc_lo,auc_hi,eer,eer_lo,eer_hi`; failed rows
/// keep their size and trial count with empty metric fields.
pub fn write_sweep_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "group_size,n_trials,auc,auc_lo,auc_hi,eer,eer_lo,eer_hi").map_err(io)?;
    for r in rows {
        match r.metrics() {
            Some(m) => writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.group_size, r.n_trials, m.auc, m.auc_lo, m.auc_hi, m.eer, m.eer_lo, m.eer_hi
            ),
            None => writeln!(w, "{},{},,,,,,", r.group_size, r.n_trials),
        }
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
