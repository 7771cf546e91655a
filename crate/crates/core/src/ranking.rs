//! Query/target retrieval: per-query rank of the true target, MRR, and the
//! rank drift induced by replacing queries with paraphrases.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Episode, QueryTargetSet};
use crate::embedding::{dot, embed_episodes, EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};
use crate::par;
use crate::stats;

/// 1-based position of `targets[true_index]` when targets are sorted by
/// descending score, ties resolved by ascending target index.
pub fn rank_from_scores(scores: &[f64], true_index: usize) -> Result<usize> {
    let truth = *scores.get(true_index).ok_or_else(|| {
        Error::InvalidInput(format!(
            "true index {true_index} out of {} targets",
            scores.len()
        ))
    })?;
    let ahead = scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| s > truth || (s == truth && j < true_index))
        .count();
    Ok(ahead + 1)
}

pub fn rank_targets(
    query: &EmbeddingVector,
    targets: &[EmbeddingVector],
    true_index: usize,
) -> Result<usize> {
    if targets.is_empty() {
        return Err(Error::InvalidInput("no targets to rank".into()));
    }
    let scores = targets
        .iter()
        .map(|t| dot(query, t))
        .collect::<Result<Vec<_>>>()?;
    rank_from_scores(&scores, true_index)
}

pub fn mrr(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::InvalidInput("MRR of an empty rank list".into()));
    }
    if ranks.contains(&0) {
        return Err(Error::InvalidInput("ranks are 1-based".into()));
    }
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// Mean of MRRs over reports from independently trained representations.
pub fn mean_mrr(reports: &[RankingReport]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no reports to average".into()));
    }
    Ok(reports.iter().map(|r| r.mrr).sum::<f64>() / reports.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRank {
    pub query_id: String,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub per_query: Vec<QueryRank>,
    pub mrr: f64,
    pub m: usize,
    pub n: usize,
}

#[derive(Serialize)]
struct Summary {
    mrr: f64,
    m: usize,
    n: usize,
}

impl RankingReport {
    pub fn ranks(&self) -> Vec<usize> {
        self.per_query.iter().map(|q| q.rank).collect()
    }

    pub fn reciprocal_ranks(&self) -> Vec<f64> {
        self.per_query.iter().map(|q| 1.0 / q.rank as f64).collect()
    }

    /// CSV `query_id,rank,reciprocal`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let io = |e: csv::Error| Error::io(path, e.into());
        w.write_record(["query_id", "rank", "reciprocal"])
            .map_err(io)?;
        for q in &self.per_query {
            w.write_record([
                q.query_id.clone(),
                q.rank.to_string(),
                (1.0 / q.rank as f64).to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&Summary {
            mrr: self.mrr,
            m: self.m,
            n: self.n,
        })
        .expect("summary serializes")
    }

    pub fn write_summary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.summary_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Rank every query against precomputed vectors.
pub fn evaluate_vectors(
    query_ids: &[String],
    queries: &[EmbeddingVector],
    targets: &[EmbeddingVector],
) -> Result<RankingReport> {
    if queries.len() != query_ids.len() {
        return Err(Error::InvalidInput(
            "query ids and vectors differ in length".into(),
        ));
    }
    if queries.is_empty() {
        return Err(Error::InvalidInput("no queries".into()));
    }
    if queries.len() > targets.len() {
        return Err(Error::InvalidInput("more queries than targets".into()));
    }
    let indices: Vec<usize> = (0..queries.len()).collect();
    let ranks = par::try_map(&indices, |&i| rank_targets(&queries[i], targets, i))?;
    let per_query = query_ids
        .iter()
        .zip(&ranks)
        .map(|(id, &rank)| QueryRank {
            query_id: id.clone(),
            rank,
        })
        .collect();
    Ok(RankingReport {
        per_query,
        mrr: mrr(&ranks)?,
        m: queries.len(),
        n: targets.len(),
    })
}

/// Embed queries and targets once and rank each query's true target.
pub fn evaluate(qts: &QueryTargetSet, provider: &dyn EmbeddingProvider) -> Result<RankingReport> {
    let queries: Vec<&Episode> = qts.queries.iter().collect();
    let targets: Vec<&Episode> = qts.targets.iter().collect();
    let qv = embed_episodes(provider, &queries)?;
    let tv = embed_episodes(provider, &targets)?;
    let ids: Vec<String> = qts.queries.iter().map(|q| q.episode_id.clone()).collect();
    evaluate_vectors(&ids, &qv, &tv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPair {
    pub query_id: String,
    pub r: usize,
    pub r_prime: usize,
    pub delta: i64,
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub pairs: Vec<DriftPair>,
    /// Kendall's tau between similarity and rank change, when similarities were given.
    pub kendall_tau: Option<f64>,
    pub kendall_p: Option<f64>,
}

impl DriftReport {
    pub fn deltas(&self) -> Vec<i64> {
        self.pairs.iter().map(|p| p.delta).collect()
    }

    /// CSV `query_id,r,r_prime,delta,similarity` (similarity blank when absent).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "query_id,r,r_prime,delta,similarity").map_err(io)?;
        for p in &self.pairs {
            let sim = p.similarity.map(|s| s.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{}",
                p.query_id, p.r, p.r_prime, p.delta, sim
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Join two reports on query id and compute `delta = r' - r`.
///
/// `similarities`, if given, is aligned with `orig.per_query`; Kendall's tau
/// between similarity and delta is then included.
pub fn compare_rankings(
    orig: &RankingReport,
    para: &RankingReport,
    similarities: Option<&[f64]>,
) -> Result<DriftReport> {
    if orig.per_query.len() != para.per_query.len() {
        return Err(Error::InvalidInput(format!(
            "reports cover {} and {} queries",
            orig.per_query.len(),
            para.per_query.len()
        )));
    }
    if let Some(b) = similarities {
        if b.len() != orig.per_query.len() {
            return Err(Error::InvalidInput(
                "similarities do not match the query count".into(),
            ));
        }
    }
    let para_ranks: HashMap<&str, usize> = para
        .per_query
        .iter()
        .map(|q| (q.query_id.as_str(), q.rank))
        .collect();
    let mut pairs = Vec::with_capacity(orig.per_query.len());
    for (i, q) in orig.per_query.iter().enumerate() {
        let r_prime = *para_ranks.get(q.query_id.as_str()).ok_or_else(|| {
            Error::InvalidInput(format!(
                "query {} missing from paraphrase report",
                q.query_id
            ))
        })?;
        pairs.push(DriftPair {
            query_id: q.query_id.clone(),
            r: q.rank,
            r_prime,
            delta: r_prime as i64 - q.rank as i64,
            similarity: similarities.map(|b| b[i]),
        });
    }
    let (kendall_tau, kendall_p) = match similarities {
        Some(b) if b.len() >= 2 => {
            let deltas: Vec<f64> = pairs.iter().map(|p| p.delta as f64).collect();
            match stats::kendall_tau(b, &deltas) {
                Ok(r) => (Some(r.statistic), Some(r.p_value)),
                // all deltas (or similarities) tied: tau undefined
                Err(Error::Degenerate(_)) => (None, None),
                Err(e) => return Err(e),
            }
        }
        _ => (None, None),
    };
    Ok(DriftReport {
        pairs,
        kendall_tau,
        kendall_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit2(angle: f64) -> EmbeddingVector {
        EmbeddingVector::new(vec![angle.cos(), angle.sin()])
    }

    #[test]
    fn ranks_from_scores() {
        assert_eq!(rank_from_scores(&[0.2, 0.9, 0.5], 0).unwrap(), 3);
        assert_eq!(rank_from_scores(&[0.2, 0.9, 0.5], 1).unwrap(), 1);
        assert_eq!(rank_from_scores(&[0.3; 5], 2).unwrap(), 3);
        assert!(rank_from_scores(&[0.3], 1).is_err());
    }

    #[test]
    fn rank_via_vectors() {
        let q = unit2(0.0);
        let targets = [unit2(1.2), unit2(0.1), unit2(0.6)];
        assert_eq!(rank_targets(&q, &targets, 0).unwrap(), 3);
        assert_eq!(rank_targets(&q, &targets, 1).unwrap(), 1);
        assert!(rank_targets(&q, &[], 0).is_err());
        assert!(rank_targets(&q, &[EmbeddingVector::zeros(3)], 0).is_err());
    }

    #[test]
    fn mrr_values() {
        assert_eq!(mrr(&[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(mrr(&[4]).unwrap(), 0.25);
        assert!((mrr(&[1, 2, 4]).unwrap() - 7.0 / 12.0).abs() < 1e-15);
        assert!(mrr(&[]).is_err());
        assert!(mrr(&[0]).is_err());
    }

    #[test]
    fn identical_vectors_fall_back_to_index_order() {
        let v = vec![unit2(0.3); 4];
        let ids: Vec<String> = (0..3).map(|i| format!("q{i}")).collect();
        let report = evaluate_vectors(&ids, &v[..3], &v).unwrap();
        assert_eq!(report.ranks(), vec![1, 2, 3]);
        assert!((report.mrr - (1.0 + 0.5 + 1.0 / 3.0) / 3.0).abs() < 1e-15);

        let one = evaluate_vectors(&["q".into()], &v[..1], &v[..1]).unwrap();
        assert_eq!(one.mrr, 1.0);
    }

    fn report(ranks: &[usize]) -> RankingReport {
        RankingReport {
            per_query: ranks
                .iter()
                .enumerate()
                .map(|(i, &rank)| QueryRank {
                    query_id: format!("q{i}"),
                    rank,
                })
                .collect(),
            mrr: mrr(ranks).unwrap(),
            m: ranks.len(),
            n: 10,
        }
    }

    #[test]
    fn drift() {
        let a = report(&[1, 2]);
        let d = compare_rankings(&a, &a, None).unwrap();
        assert_eq!(d.deltas(), vec![0, 0]);
        assert_eq!(d.kendall_tau, None);

        let d = compare_rankings(&a, &report(&[5, 2]), None).unwrap();
        assert_eq!(d.deltas(), vec![4, 0]);

        let d = compare_rankings(
            &report(&[1, 1, 1]),
            &report(&[1, 2, 3]),
            Some(&[0.9, 0.5, 0.1]),
        )
        .unwrap();
        assert_eq!(d.kendall_tau, Some(-1.0));

        let mut other = report(&[1, 2]);
        other.per_query[1].query_id = "zzz".into();
        assert!(compare_rankings(&a, &other, None).is_err());
    }

    #[test]
    fn summary_shape() {
        let s = report(&[1, 2]).summary_json();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["m"], 2);
        assert_eq!(v["n"], 10);
        assert_eq!(v["mrr"], 0.75);
    }
}
