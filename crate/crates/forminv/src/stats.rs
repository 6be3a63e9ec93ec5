//! Paired binary significance tests and uncertainty machinery: McNemar,
//! Cochran's Q (asymptotic and permutation-exact), Bonferroni thresholds,
//! Fleiss's kappa, percentile bootstrap intervals, sample-size simulation,
//! the Hoeffding half-width, and rank correlations.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::TheoremProfile;
use crate::rng::{stream_rng, streams};
use crate::special::{chi_square_sf, student_t_two_sided};

/// 2x2 paired outcome counts for two raters / two conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairedCounts {
    /// Both outcomes 1.
    pub both_one: u64,
    /// First 1, second 0 (discordant, `b`).
    pub first_only: u64,
    /// First 0, second 1 (discordant, `c`).
    pub second_only: u64,
    /// Both outcomes 0.
    pub both_zero: u64,
}

impl PairedCounts {
    /// Tally paired binary outcomes.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> PairedCounts {
        let mut t = PairedCounts {
            both_one: 0,
            first_only: 0,
            second_only: 0,
            both_zero: 0,
        };
        for (a, b) in pairs {
            match (a, b) {
                (true, true) => t.both_one += 1,
                (true, false) => t.first_only += 1,
                (false, true) => t.second_only += 1,
                (false, false) => t.both_zero += 1,
            }
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestMethod {
    Mcnemar,
    CochranQ,
    CochranQExact,
}

/// Result of a marginal-homogeneity test.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: u32,
    /// Upper-tail p. For the permutation test this is the add-one
    /// Monte-Carlo estimate `(#{Q* >= Q} + 1) / (B + 1)`.
    pub p_value: f64,
    pub method: TestMethod,
    /// No discordance / all rows constant: statistic 0, p 1.
    pub degenerate: bool,
    /// Mid-p estimate `(#{Q* > Q} + 0.5 #{Q* = Q}) / B`; permutation test
    /// only. The mid-p convention is the right comparison point for a
    /// continuous approximation to a discrete null.
    pub p_mid: Option<f64>,
}

/// McNemar's test, `(b - c)^2 / (b + c)` against chi-square with df 1.
/// No continuity correction.
pub fn mcnemar(table: &PairedCounts) -> TestResult {
    let b = table.first_only as f64;
    let c = table.second_only as f64;
    if b + c == 0.0 {
        return TestResult {
            statistic: 0.0,
            df: 1,
            p_value: 1.0,
            method: TestMethod::Mcnemar,
            degenerate: true,
            p_mid: None,
        };
    }
    let statistic = (b - c).powi(2) / (b + c);
    TestResult {
        statistic,
        df: 1,
        p_value: chi_square_sf(statistic, 1),
        method: TestMethod::Mcnemar,
        degenerate: false,
        p_mid: None,
    }
}

fn validate_rows(rows: &[Vec<bool>]) -> Result<(usize, usize)> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "Cochran's Q needs at least 2 subjects".into(),
        ));
    }
    let k = rows[0].len();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "Cochran's Q needs at least 2 conditions".into(),
        ));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidArgument(
            "all subject rows must have the same number of conditions".into(),
        ));
    }
    Ok((n, k))
}

fn cochran_statistic(rows: &[Vec<bool>], k: usize) -> Option<f64> {
    let kf = k as f64;
    let mut col = vec![0u64; k];
    let mut denom = 0.0;
    let mut total = 0u64;
    for row in rows {
        let s = row.iter().filter(|&&v| v).count() as u64;
        total += s;
        denom += s as f64 * (kf - s as f64);
        for (j, &v) in row.iter().enumerate() {
            if v {
                col[j] += 1;
            }
        }
    }
    if denom == 0.0 {
        return None;
    }
    let mean = total as f64 / kf;
    let num: f64 = col.iter().map(|&c| (c as f64 - mean).powi(2)).sum();
    Some(kf * (kf - 1.0) * num / denom)
}

/// Cochran's Q with the asymptotic chi-square p-value (df = k - 1).
/// Reduces exactly to the McNemar statistic at k = 2.
pub fn cochran_q(rows: &[Vec<bool>]) -> Result<TestResult> {
    let (_, k) = validate_rows(rows)?;
    let df = (k - 1) as u32;
    match cochran_statistic(rows, k) {
        None => Ok(TestResult {
            statistic: 0.0,
            df,
            p_value: 1.0,
            method: TestMethod::CochranQ,
            degenerate: true,
            p_mid: None,
        }),
        Some(q) => Ok(TestResult {
            statistic: q,
            df,
            p_value: chi_square_sf(q, df),
            method: TestMethod::CochranQ,
            degenerate: false,
            p_mid: None,
        }),
    }
}

/// Permutation-exact Cochran's Q: entries are permuted uniformly within each
/// row (row sums preserved), Monte-Carlo with a fixed seed. Deterministic
/// for a given seed regardless of how replicates are scheduled.
pub fn cochran_q_exact(rows: &[Vec<bool>], n_permutations: u64, seed: u64) -> Result<TestResult> {
    let (_, k) = validate_rows(rows)?;
    let df = (k - 1) as u32;
    let q_obs = match cochran_statistic(rows, k) {
        None => {
            return Ok(TestResult {
                statistic: 0.0,
                df,
                p_value: 1.0,
                method: TestMethod::CochranQExact,
                degenerate: true,
                p_mid: None,
            })
        }
        Some(q) => q,
    };

    // Row sums are permutation-invariant, so only column sums vary.
    let kf = k as f64;
    let row_sums: Vec<usize> = rows
        .iter()
        .map(|r| r.iter().filter(|&&v| v).count())
        .collect();
    let total: usize = row_sums.iter().sum();
    let mean = total as f64 / kf;
    let denom: f64 = row_sums.iter().map(|&s| s as f64 * (kf - s as f64)).sum();
    let scale = kf * (kf - 1.0) / denom;

    let mut greater = 0u64;
    let mut equal = 0u64;
    let mut col = vec![0u32; k];
    for rep in 0..n_permutations {
        let mut rng = stream_rng(seed, streams::COCHRAN_PERMUTATION, rep);
        col.iter_mut().for_each(|c| *c = 0);
        for &s in &row_sums {
            // Place s ones uniformly among k columns (rejection on a bitmask;
            // flip to placing zeros when s > k/2).
            let (count, hit) = if 2 * s <= k { (s, 1u32) } else { (k - s, 0u32) };
            let mut mask = 0u32;
            for _ in 0..count {
                loop {
                    let j = rng.gen_range(0..k);
                    if mask & (1 << j) == 0 {
                        mask |= 1 << j;
                        break;
                    }
                }
            }
            for (j, c) in col.iter_mut().enumerate() {
                let placed = (mask >> j) & 1;
                *c += if hit == 1 { placed } else { 1 - placed };
            }
        }
        let num: f64 = col.iter().map(|&c| (c as f64 - mean).powi(2)).sum();
        let q = scale * num;
        if q > q_obs + 1e-12 {
            greater += 1;
        } else if q >= q_obs - 1e-12 {
            equal += 1;
        }
    }

    Ok(TestResult {
        statistic: q_obs,
        df,
        p_value: (greater + equal + 1) as f64 / (n_permutations + 1) as f64,
        method: TestMethod::CochranQExact,
        degenerate: false,
        p_mid: Some((greater as f64 + 0.5 * equal as f64) / n_permutations as f64),
    })
}

/// Per-test significance threshold under Bonferroni correction.
pub fn bonferroni(alpha: f64, m: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    Ok(alpha / m as f64)
}

/// Fleiss's kappa over binary categories. Items with any absent vote are
/// dropped (classic Fleiss needs equal rater counts) and counted.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FleissKappa {
    /// `None` when expected disagreement is zero (all votes identical).
    pub kappa: Option<f64>,
    pub raters: usize,
    pub items_used: usize,
    pub items_dropped: usize,
}

pub fn fleiss_kappa(votes: &[Vec<Option<bool>>]) -> Result<FleissKappa> {
    if votes.len() < 2 {
        return Err(Error::InvalidArgument(
            "Fleiss's kappa needs at least 2 items".into(),
        ));
    }
    let raters = votes[0].len();
    if raters < 2 {
        return Err(Error::InvalidArgument(
            "Fleiss's kappa needs at least 2 raters".into(),
        ));
    }
    if votes.iter().any(|v| v.len() != raters) {
        return Err(Error::InvalidArgument(
            "all items must have the same rater count".into(),
        ));
    }

    let complete: Vec<&Vec<Option<bool>>> = votes
        .iter()
        .filter(|v| v.iter().all(|x| x.is_some()))
        .collect();
    let items_dropped = votes.len() - complete.len();
    if complete.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "only {} item(s) have complete votes; kappa needs at least 2",
            complete.len()
        )));
    }

    let n = raters as f64;
    let big_n = complete.len() as f64;
    let mut total_true = 0.0;
    let mut p_bar = 0.0;
    for item in &complete {
        let t = item.iter().filter(|v| **v == Some(true)).count() as f64;
        let f = n - t;
        total_true += t;
        p_bar += (t * t + f * f - n) / (n * (n - 1.0));
    }
    p_bar /= big_n;
    let p_true = total_true / (big_n * n);
    let p_e = p_true * p_true + (1.0 - p_true) * (1.0 - p_true);
    let kappa = if (1.0 - p_e).abs() < 1e-12 {
        None
    } else {
        Some((p_bar - p_e) / (1.0 - p_e))
    };
    Ok(FleissKappa {
        kappa,
        raters,
        items_used: complete.len(),
        items_dropped,
    })
}

/// Percentile bootstrap confidence interval for a mean: resample the values
/// with replacement `n_boot` times, take the central `level` quantile span.
/// Deterministic given the seed.
pub fn bootstrap_mean_ci(values: &[f64], n_boot: u64, level: f64, seed: u64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least 2 values".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let n = values.len();
    let mut means = Vec::with_capacity(n_boot as usize);
    for rep in 0..n_boot {
        let mut rng = stream_rng(seed, streams::BOOTSTRAP, rep);
        let mut sum = 0.0;
        for _ in 0..n {
            sum += values[rng.gen_range(0..n)];
        }
        means.push(sum / n as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).expect("bootstrap means are finite"));
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile(&means, alpha), quantile(&means, 1.0 - alpha)))
}

/// Bootstrap CI for the mean invariance gap over theorem resampling.
pub fn bootstrap_mean_ig_ci(
    profiles: &[TheoremProfile],
    n_boot: u64,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let igs: Vec<f64> = profiles.iter().map(|p| p.ig).collect();
    bootstrap_mean_ci(&igs, n_boot, level, seed)
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// 95% CI half-width for a consistency-rate estimate at sample size `n`,
/// via Binomial(n, p) simulation.
pub fn scr_ci_halfwidth(n: u64, p: f64, n_boot: u64, seed: u64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "p must be in [0, 1], got {p}"
        )));
    }
    let mut draws = Vec::with_capacity(n_boot as usize);
    for rep in 0..n_boot {
        let mut rng = stream_rng(seed, streams::SCR_HALFWIDTH, rep);
        let mut successes = 0u64;
        for _ in 0..n {
            if rng.gen::<f64>() < p {
                successes += 1;
            }
        }
        draws.push(successes as f64 / n as f64);
    }
    draws.sort_by(|a, b| a.partial_cmp(b).expect("draws are finite"));
    Ok((quantile(&draws, 0.975) - quantile(&draws, 0.025)) / 2.0)
}

/// Hoeffding bound on the deviation of an empirical mean of `k` binary
/// observations: `sqrt(ln(2/delta) / (2k))`.
pub fn hoeffding_halfwidth(k: u64, delta: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    Ok(((2.0 / delta).ln() / (2.0 * k as f64)).sqrt())
}

/// Pearson, Spearman (with exact permutation p for n <= 10) and Kendall
/// tau-b correlations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RankCorrelations {
    pub pearson_r: f64,
    pub spearman_rho: f64,
    /// Exact two-sided permutation p when n <= 10, t-approximation otherwise.
    pub spearman_p: f64,
    pub spearman_p_exact: Option<f64>,
    pub spearman_p_approx: f64,
    pub kendall_tau: f64,
}

pub fn rank_correlations(x: &[f64], y: &[f64]) -> Result<RankCorrelations> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidArgument(
            "correlations need at least 3 points".into(),
        ));
    }
    let pearson_r = pearson(x, y)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let spearman_rho = pearson(&rx, &ry)?;

    let spearman_p_exact = if n <= 10 {
        Some(spearman_exact_p(&rx, &ry, spearman_rho))
    } else {
        None
    };
    let spearman_p_approx = if spearman_rho.abs() >= 1.0 {
        0.0
    } else {
        let t = spearman_rho * ((n as f64 - 2.0) / (1.0 - spearman_rho * spearman_rho)).sqrt();
        student_t_two_sided(t, n as f64 - 2.0)
    };

    Ok(RankCorrelations {
        pearson_r,
        spearman_rho,
        spearman_p: spearman_p_exact.unwrap_or(spearman_p_approx),
        spearman_p_exact,
        spearman_p_approx,
        kendall_tau: kendall_tau_b(x, y),
    })
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::CorrelationUndefined(
            "input vector is constant".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks 1..n with ties receiving their average rank.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("rank inputs are finite"));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &ix in &idx[i..=j] {
            ranks[ix] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Exact two-sided permutation p for Spearman's rho: the fraction of all
/// n! orderings of the y-ranks with |rho| at least the observed |rho|.
fn spearman_exact_p(rx: &[f64], ry: &[f64], rho_obs: f64) -> f64 {
    let n = rx.len();
    let mx = rx.iter().sum::<f64>() / n as f64;
    let cx: Vec<f64> = rx.iter().map(|v| v - mx).collect();
    let my = ry.iter().sum::<f64>() / n as f64;
    let mut cy: Vec<f64> = ry.iter().map(|v| v - my).collect();
    let norm =
        (cx.iter().map(|v| v * v).sum::<f64>() * cy.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let target = rho_obs.abs() - 1e-12;

    // Heap's algorithm over cy; rho of a permutation is the scaled dot product.
    let mut count = 0u64;
    let mut total = 0u64;
    let mut tally = |cy: &[f64]| {
        let dot: f64 = cx.iter().zip(cy).map(|(a, b)| a * b).sum();
        if (dot / norm).abs() >= target {
            count += 1;
        }
        total += 1;
    };
    tally(&cy);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                cy.swap(0, i);
            } else {
                cy.swap(c[i], i);
            }
            tally(&cy);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    count as f64 / total as f64
}

/// Kendall's tau-b with tie corrections.
fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i].partial_cmp(&x[j]).expect("finite");
            let dy = y[i].partial_cmp(&y[j]).expect("finite");
            use std::cmp::Ordering::*;
            match (dx, dy) {
                (Equal, Equal) => {}
                (Equal, _) => ties_x += 1,
                (_, Equal) => ties_y += 1,
                (a, b) if a == b => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = ((n0 - ties_x as f64) * (n0 - ties_y as f64)).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (concordant - discordant) as f64 / denom
}
