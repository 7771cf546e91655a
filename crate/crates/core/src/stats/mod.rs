//! Significance tests and resampling used across the experiments.

pub mod special;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::{par, seed};

use rand::Rng as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    AnovaOneway,
    TPaired,
    KendallTau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    /// One value for t, two for F; empty for the normal approximation.
    pub df: Vec<f64>,
    /// Set when the statistic hit a boundary case (zero variance) and the
    /// p-value comes from the limiting rule rather than a distribution.
    pub degenerate: bool,
}

fn standard_normal() -> Normal {
    Normal::standard()
}

pub fn normal_cdf(z: f64) -> f64 {
    standard_normal().cdf(z)
}

pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One-way ANOVA across `groups`.
pub fn anova_oneway<G: AsRef<[f64]>>(groups: &[G]) -> Result<TestResult> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::InvalidInput(
            "ANOVA needs at least two groups".into(),
        ));
    }
    if groups.iter().any(|g| g.as_ref().is_empty()) {
        return Err(Error::InvalidInput("ANOVA groups must be non-empty".into()));
    }
    let n: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    if n <= k {
        return Err(Error::InvalidInput(format!(
            "ANOVA needs more observations ({n}) than groups ({k})"
        )));
    }
    let all: Vec<f64> = groups
        .iter()
        .flat_map(|g| g.as_ref().iter().copied())
        .collect();
    let grand = mean(&all);
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let df1 = (k - 1) as f64;
    let df2 = (n - k) as f64;
    // relative tolerance so constant shifts do not register as variance
    let scale = all
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let eps = 1e-24 * scale;
    if ss_within <= eps {
        if ss_between <= eps {
            return Err(Error::Degenerate("all observations are identical".into()));
        }
        return Ok(TestResult {
            method: TestMethod::AnovaOneway,
            statistic: f64::INFINITY,
            p_value: 0.0,
            df: vec![df1, df2],
            degenerate: true,
        });
    }
    let f = (ss_between / df1) / (ss_within / df2);
    Ok(TestResult {
        method: TestMethod::AnovaOneway,
        statistic: f,
        p_value: special::f_sf(f, df1, df2),
        df: vec![df1, df2],
        degenerate: false,
    })
}

/// Two-sided paired t-test on `a - b`.
pub fn t_paired(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "paired t-test needs at least two pairs".into(),
        ));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = (n - 1) as f64;
    let md = mean(&d);
    let var = d.iter().map(|x| (x - md).powi(2)).sum::<f64>() / df;
    let result = |t: f64, p: f64, degenerate: bool| TestResult {
        method: TestMethod::TPaired,
        statistic: t,
        p_value: p,
        df: vec![df],
        degenerate,
    };
    if d.iter().all(|&x| x == 0.0) {
        return Ok(result(0.0, 1.0, true));
    }
    let scale = d.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if var.sqrt() <= 1e-12 * scale {
        return Ok(result(md.signum() * f64::INFINITY, 0.0, true));
    }
    let t = md / (var.sqrt() / (n as f64).sqrt());
    Ok(result(t, special::t_two_sided(t, df), false))
}

/// Paired t-test comparing how much two systems lose under the same
/// intervention: per item, `(orig_a - para_a) - (orig_b - para_b)`.
pub fn t_paired_difference_of_differences(
    orig_a: &[f64],
    para_a: &[f64],
    orig_b: &[f64],
    para_b: &[f64],
) -> Result<TestResult> {
    let n = orig_a.len();
    if [para_a.len(), orig_b.len(), para_b.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::InvalidInput(
            "all four samples must have the same length".into(),
        ));
    }
    let drop_a: Vec<f64> = orig_a.iter().zip(para_a).map(|(o, p)| o - p).collect();
    let drop_b: Vec<f64> = orig_b.iter().zip(para_b).map(|(o, p)| o - p).collect();
    t_paired(&drop_a, &drop_b)
}

/// Kendall's tau-b with a tie-corrected normal approximation for the p-value.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "samples differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "Kendall's tau needs at least two points".into(),
        ));
    }
    let (mut concordant, mut discordant) = (0u64, 0u64);
    let (mut tied_x, mut tied_y) = (0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].total_cmp(&x[j]);
            let dy = y[i].total_cmp(&y[j]);
            use std::cmp::Ordering::Equal;
            match (dx == Equal, dy == Equal) {
                (true, true) => {
                    tied_x += 1;
                    tied_y += 1;
                }
                (true, false) => tied_x += 1,
                (false, true) => tied_y += 1,
                (false, false) if dx == dy => concordant += 1,
                (false, false) => discordant += 1,
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as u64;
    if tied_x == n0 || tied_y == n0 {
        return Err(Error::Degenerate(
            "every value is tied in one variable".into(),
        ));
    }
    let s = concordant as f64 - discordant as f64;
    let tau = s / (((n0 - tied_x) as f64) * ((n0 - tied_y) as f64)).sqrt();

    let ties = |v: &[f64]| -> Vec<f64> {
        let mut sorted = v.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted
            .chunk_by(|a, b| a == b)
            .filter(|c| c.len() > 1)
            .map(|c| c.len() as f64)
            .collect()
    };
    let (tx, ty) = (ties(x), ties(y));
    let nf = n as f64;
    let sum = |t: &[f64], f: &dyn Fn(f64) -> f64| t.iter().map(|&v| f(v)).sum::<f64>();
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt = sum(&tx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&ty, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum(&tx, &|t| t * (t - 1.0)) * sum(&ty, &|t| t * (t - 1.0)) / (2.0 * nf * (nf - 1.0));
    let v2 = if n > 2 {
        sum(&tx, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&ty, &|t| t * (t - 1.0) * (t - 2.0))
            / (9.0 * nf * (nf - 1.0) * (nf - 2.0))
    } else {
        0.0
    };
    let var_s = (v0 - vt - vu) / 18.0 + v1 + v2;
    let p = if var_s > 0.0 {
        let z = s / var_s.sqrt();
        (2.0 * (1.0 - normal_cdf(z.abs()))).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(TestResult {
        method: TestMethod::KendallTau,
        statistic: tau,
        p_value: p,
        df: Vec::new(),
        degenerate: false,
    })
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// The `(alpha/2, 1 - alpha/2)` percentile interval of replicate values.
pub fn percentile_interval(mut replicates: Vec<f64>, confidence: f64) -> (f64, f64) {
    replicates.sort_by(f64::total_cmp);
    let alpha = 1.0 - confidence;
    (
        quantile_sorted(&replicates, alpha / 2.0),
        quantile_sorted(&replicates, 1.0 - alpha / 2.0),
    )
}

pub const MIN_BOOTSTRAP: usize = 100;

/// Percentile bootstrap interval for `statistic` over `values`.
///
/// Resample `b` draws from its own generator seeded with `seed + b`, so the
/// result does not depend on how resamples are spread across threads.
pub fn bootstrap_ci<F>(
    values: &[f64],
    statistic: F,
    n_boot: usize,
    confidence: f64,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if values.is_empty() {
        return Err(Error::InvalidInput("bootstrap of empty data".into()));
    }
    if n_boot < MIN_BOOTSTRAP {
        return Err(Error::InvalidInput(format!(
            "n_boot must be at least {MIN_BOOTSTRAP}"
        )));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    let n = values.len();
    let replicates = par::map_range(n_boot, |b| {
        let mut rng = seed::rng(seed.wrapping_add(b as u64));
        let sample: Vec<f64> = (0..n).map(|_| values[rng.random_range(0..n)]).collect();
        statistic(&sample)
    });
    Ok(percentile_interval(replicates, confidence))
}
