//! Statistics and interval checks against independently coded oracles.
//!
//! Pinned reference values were produced with SciPy (`f_oneway`,
//! `ttest_rel`, `kendalltau(method="asymptotic")`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use styleprobe::discrimination::{auc_ci, eer_ci, hanley_mcneil_se, roc};
use styleprobe::stats::{anova_oneway, bootstrap_ci, kendall_tau, special, t_paired};

fn oracle_anova(groups: &[Vec<f64>]) -> (f64, f64, f64, f64) {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let k = groups.len() as f64;
    let grand = all.iter().sum::<f64>() / n;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let (d1, d2) = (k - 1.0, n - k);
    let f = (ssb / d1) / (ssw / d2);
    let p = 1.0 - FisherSnedecor::new(d1, d2).unwrap().cdf(f);
    (f, p, d1, d2)
}

fn oracle_paired_t(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let m = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = m / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).unwrap();
    (t, 2.0 * (1.0 - dist.cdf(t.abs())))
}

/// Brute-force tau-b over all pairs, with the tie-corrected null variance.
fn oracle_kendall(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            let sx = (x[i] - x[j]).signum() * f64::from(x[i] != x[j]);
            let sy = (y[i] - y[j]).signum() * f64::from(y[i] != y[j]);
            match (sx == 0.0, sy == 0.0) {
                (false, false) if sx == sy => c += 1.0,
                (false, false) => d += 1.0,
                (true, false) => tx += 1.0,
                (false, true) => ty += 1.0,
                (true, true) => {}
            }
        }
    }
    let tau = (c - d) / ((c + d + tx) * (c + d + ty)).sqrt();
    let ties = |v: &[f64]| -> Vec<f64> {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s.chunk_by(|a, b| a == b)
            .map(|r| r.len() as f64)
            .filter(|&t| t > 1.0)
            .collect()
    };
    let nf = n as f64;
    let (vx, vy) = (ties(x), ties(y));
    let sum = |t: &[f64], f: &dyn Fn(f64) -> f64| t.iter().map(|&t| f(t)).sum::<f64>();
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt = sum(&vx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&vy, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum(&vx, &|t| t * (t - 1.0)) * sum(&vy, &|t| t * (t - 1.0)) / (2.0 * nf * (nf - 1.0));
    let v2 = sum(&vx, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&vy, &|t| t * (t - 1.0) * (t - 2.0))
        / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    let var = (v0 - vt - vu) / 18.0 + v1 + v2;
    let z = (c - d) / var.sqrt();
    let p = 2.0 * (1.0 - Normal::new(0.0, 1.0).unwrap().cdf(z.abs()));
    (tau, p)
}

#[test]
fn anova_matches_oracle() {
    let cases = vec![
        (
            vec![vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]],
            1.5,
            0.2878641347266907,
        ),
        (
            vec![
                vec![3.1, 2.7, 4.4, 5.0],
                vec![6.2, 5.9, 7.1],
                vec![1.0, 2.2, 1.9, 2.4, 3.0],
            ],
            24.239324534161472,
            0.00023785473820177536,
        ),
    ];
    for (groups, f_ref, p_ref) in cases {
        let r = anova_oneway(&groups).unwrap();
        let (f, p, d1, d2) = oracle_anova(&groups);
        assert!((r.statistic - f).abs() < 1e-12 * f.max(1.0));
        assert!((r.statistic - f_ref).abs() < 1e-9);
        assert!((r.p_value - p).abs() < 1e-10, "{} vs {p}", r.p_value);
        assert!((r.p_value - p_ref).abs() < 1e-10);
        assert_eq!(r.df, vec![d1, d2]);
    }
}

#[test]
fn paired_t_matches_oracle() {
    let cases = vec![
        (
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            -3.464101615137755,
            0.07417990022744853,
        ),
        (
            vec![0.3, 1.9, 2.2, 4.1, 5.5, 5.0],
            vec![0.1, 1.0, 2.5, 3.0, 4.9, 4.2],
            2.607250047269875,
            0.04782842959629913,
        ),
    ];
    for (a, b, t_ref, p_ref) in cases {
        let r = t_paired(&a, &b).unwrap();
        let (t, p) = oracle_paired_t(&a, &b);
        assert!((r.statistic - t).abs() < 1e-12);
        assert!((r.statistic - t_ref).abs() < 1e-9);
        assert!((r.p_value - p).abs() < 1e-10);
        assert!((r.p_value - p_ref).abs() < 1e-10);
    }
}

#[test]
fn kendall_matches_oracle() {
    let r = kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
    assert_eq!(r.statistic, 1.0 / 3.0);

    let x = [1.0, 2.0, 2.0, 3.0, 4.0, 5.0, 5.0, 6.0, 7.0, 8.0, 9.0, 9.0];
    let y = [2.0, 1.0, 3.0, 3.0, 5.0, 4.0, 6.0, 8.0, 7.0, 7.0, 9.0, 10.0];
    let r = kendall_tau(&x, &y).unwrap();
    let (tau, p) = oracle_kendall(&x, &y);
    assert!((r.statistic - tau).abs() < 1e-12);
    assert!((r.statistic - 0.8346715445620434).abs() < 1e-12);
    assert!((r.p_value - p).abs() < 1e-12);
    assert!((r.p_value - 0.00023596324833434517).abs() < 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(3..40);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let Ok(r) = kendall_tau(&x, &y) else { continue };
        let (tau, p) = oracle_kendall(&x, &y);
        assert!((r.statistic - tau).abs() < 1e-12);
        assert!((r.p_value - p).abs() < 1e-9, "{} vs {p}", r.p_value);
    }
}

#[test]
fn distribution_tails_match_statrs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let d1 = rng.random_range(1..40) as f64;
        let d2 = rng.random_range(1..200) as f64;
        let f = rng.random_range(0.0..8.0);
        let want = 1.0 - FisherSnedecor::new(d1, d2).unwrap().cdf(f);
        assert!(
            (special::f_sf(f, d1, d2) - want).abs() < 1e-10,
            "F({d1},{d2}) at {f}"
        );

        let df = rng.random_range(1..300) as f64;
        let t: f64 = rng.random_range(-8.0..8.0);
        let want = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()));
        assert!(
            (special::t_two_sided(t, df) - want).abs() < 1e-10,
            "t({df}) at {t}"
        );
    }
    assert!((special::t_two_sided(-3.4641, 2.0) - 0.0742).abs() < 1e-4);
}

fn binormal(n: usize, shift: f64, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for i in 0..2 * n {
        let pos = i < n;
        let z = normal.inverse_cdf(rng.random_range(1e-12..1.0));
        scores.push(z + if pos { shift } else { 0.0 });
        labels.push(pos);
    }
    (scores, labels)
}

#[test]
fn hanley_mcneil_tracks_bootstrap() {
    let (lo, hi) = auc_ci(0.8, 50, 50, 0.95).unwrap();
    assert!((hanley_mcneil_se(0.8, 50, 50) - 0.0444).abs() < 1e-3);
    assert!((lo - 0.713).abs() < 1e-3 && (hi - 0.887).abs() < 1e-3);

    // a 50/50 sample with AUC near 0.8 (binormal shift 1.19)
    let (scores, labels) = binormal(50, 1.19, 21);
    let curve = roc(&scores, &labels).unwrap();
    let (hm_lo, hm_hi) = auc_ci(curve.auc, 50, 50, 0.95).unwrap();
    let index: Vec<f64> = (0..scores.len()).map(|i| i as f64).collect();
    let auc_of = |picks: &[f64]| {
        let s: Vec<f64> = picks.iter().map(|&i| scores[i as usize]).collect();
        let l: Vec<bool> = picks.iter().map(|&i| labels[i as usize]).collect();
        roc(&s, &l).map(|c| c.auc).unwrap_or(0.5)
    };
    let (b_lo, b_hi) = bootstrap_ci(&index, auc_of, 10_000, 0.95, 99).unwrap();
    assert!((b_lo - hm_lo).abs() < 0.02, "{b_lo} vs {hm_lo}");
    assert!((b_hi - hm_hi).abs() < 0.02, "{b_hi} vs {hm_hi}");
}

#[test]
fn eer_interval_on_exchangeable_scores() {
    let (scores, labels) = binormal(500, 0.0, 8);
    let (lo, hi) = eer_ci(&scores, &labels, 1000, 0.95, 4).unwrap();
    assert!(lo <= 0.5 && 0.5 <= hi, "[{lo}, {hi}]");
    assert_eq!((lo, hi), eer_ci(&scores, &labels, 1000, 0.95, 4).unwrap());
}

#[test]
fn bootstrap_width_follows_clt() {
    let (draws, _) = binormal(500, 0.0, 31);
    let (lo, hi) = bootstrap_ci(
        &draws,
        |v| v.iter().sum::<f64>() / v.len() as f64,
        2000,
        0.95,
        6,
    )
    .unwrap();
    let want = 2.0 * 1.96 / 1000f64.sqrt();
    assert!(
        ((hi - lo) / want - 1.0).abs() < 0.3,
        "width {} vs {want}",
        hi - lo
    );
}
