//! Cross-model unanimity audit: flags paraphrase items that many models fail
//! while passing the canonical statement, quantifies the ranking impact of
//! removing flagged items, and provides the threshold-theory calculators
//! (Condorcet tail, unanimous-vote posterior, Byzantine tolerance).

use std::collections::BTreeSet;

use serde::Serialize;

use crate::data::{Family, ResponseMatrix};
use crate::error::{Error, Result};
use crate::metrics::metric_report;
use crate::special::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Severity {
    Flagged,
    /// One vote below the threshold; emitted for expert triage.
    Borderline,
}

/// How the vote quota is derived for items with absent answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Denominator {
    /// Quota scales with the models eligible on this item:
    /// `ceil(threshold * eligible / total_models)`. Default.
    Eligible,
    /// Strict absolute quota regardless of eligibility.
    TotalModels,
}

/// One flagged (or borderline) paraphrase item.
#[derive(Debug, Clone, Serialize)]
pub struct AuditFlag {
    pub item_id: String,
    pub theorem_id: String,
    pub family: Family,
    /// Models wrong on the paraphrase while right on the canonical.
    pub fail_votes: usize,
    /// Models with present answers on both the paraphrase and the canonical.
    pub eligible_models: usize,
    /// The vote quota applied to this item.
    pub threshold_used: usize,
    pub severity: Severity,
    /// The models behind `fail_votes`, sorted.
    pub voters: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditOutcome {
    /// Flagged and borderline items, sorted by (fail_votes desc, item_id).
    pub flags: Vec<AuditFlag>,
    pub warnings: Vec<String>,
    pub skipped_items: usize,
    pub threshold: usize,
    pub denominator: Denominator,
}

impl AuditOutcome {
    /// Only the items at or above the quota.
    pub fn flagged(&self) -> impl Iterator<Item = &AuditFlag> {
        self.flags
            .iter()
            .filter(|f| f.severity == Severity::Flagged)
    }

    pub fn flagged_item_ids(&self) -> BTreeSet<String> {
        self.flagged().map(|f| f.item_id.clone()).collect()
    }
}

/// Flag paraphrase items failed by at least `threshold` models that pass the
/// canonical statement of the same theorem.
pub fn unanimity_flags(
    matrix: &ResponseMatrix,
    threshold: usize,
    denominator: Denominator,
) -> AuditOutcome {
    let mut warnings = Vec::new();
    let n_models = matrix.models().len();
    if threshold > n_models {
        warnings.push(format!(
            "threshold {threshold} exceeds model count {n_models}; nothing can be flagged"
        ));
        return AuditOutcome {
            flags: Vec::new(),
            warnings,
            skipped_items: 0,
            threshold,
            denominator,
        };
    }

    let mut flags = Vec::new();
    let mut skipped_items = 0usize;
    for item in matrix.items() {
        let family = match item.family.family() {
            Some(f) => f,
            None => continue, // canonical items are never audit candidates
        };
        let canonical = matrix
            .theorem_items(&item.theorem_id)
            .find(|it| it.family.is_canonical());
        let canonical = match canonical {
            Some(c) => c,
            None => {
                skipped_items += 1;
                warnings.push(format!(
                    "item {} skipped: theorem {} has no canonical item",
                    item.item_id, item.theorem_id
                ));
                continue;
            }
        };

        let mut eligible = 0usize;
        let mut voters = Vec::new();
        for model in matrix.models() {
            let para = matrix.record_for(model, &item.item_id);
            let canon = matrix.record_for(model, &canonical.item_id);
            let both_present = para.map(|r| r.answer.is_some()).unwrap_or(false)
                && canon.map(|r| r.answer.is_some()).unwrap_or(false);
            if !both_present {
                continue;
            }
            eligible += 1;
            if para.unwrap().is_incorrect() && canon.unwrap().is_correct() {
                voters.push(model.clone());
            }
        }
        if eligible == 0 {
            continue;
        }

        let quota = match denominator {
            Denominator::TotalModels => threshold,
            Denominator::Eligible => (threshold * eligible).div_ceil(n_models).max(1),
        };
        let fail_votes = voters.len();
        let severity = if fail_votes >= quota {
            Severity::Flagged
        } else if fail_votes + 1 == quota && fail_votes >= 1 {
            Severity::Borderline
        } else {
            continue;
        };
        voters.sort();
        flags.push(AuditFlag {
            item_id: item.item_id.clone(),
            theorem_id: item.theorem_id.clone(),
            family,
            fail_votes,
            eligible_models: eligible,
            threshold_used: quota,
            severity,
            voters,
        });
    }

    flags.sort_by(|a, b| {
        b.fail_votes
            .cmp(&a.fail_votes)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    AuditOutcome {
        flags,
        warnings,
        skipped_items,
        threshold,
        denominator,
    }
}

/// Per-model consequence of removing flagged items.
#[derive(Debug, Clone, Serialize)]
pub struct ImpactRow {
    pub model: String,
    pub scr_with: f64,
    pub scr_without: f64,
    pub accuracy_with: f64,
    pub accuracy_without: f64,
    /// Rank by SCR descending (accuracy, then model id break ties), 1-based.
    pub rank_with: usize,
    pub rank_without: usize,
    /// Positive means the model dropped in rank after removal.
    pub rank_delta: i64,
}

/// Recompute SCR with the given items removed and rank models before/after.
/// A theorem leaves the SCR denominator only when it loses all paraphrases.
pub fn audit_impact(matrix: &ResponseMatrix, remove: &BTreeSet<String>) -> Result<Vec<ImpactRow>> {
    for id in remove {
        if !matrix.items().iter().any(|it| &it.item_id == id) {
            return Err(Error::InvalidArgument(format!(
                "flagged item {id:?} is not in the matrix"
            )));
        }
    }
    let reduced = matrix.without_items(remove)?;

    let mut rows = Vec::new();
    for model in matrix.models() {
        let with = metric_report(matrix, model, 0.1)?;
        if !reduced.has_model(model) {
            return Err(Error::InvalidArgument(format!(
                "removal eliminates every record of model {model:?}"
            )));
        }
        let without = metric_report(&reduced, model, 0.1)?;
        rows.push(ImpactRow {
            model: model.clone(),
            scr_with: with.scr,
            scr_without: without.scr,
            accuracy_with: with.accuracy,
            accuracy_without: without.accuracy,
            rank_with: 0,
            rank_without: 0,
            rank_delta: 0,
        });
    }

    let assign = |rows: &mut Vec<ImpactRow>, without: bool| {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| {
            let (sa, aa) = if without {
                (rows[a].scr_without, rows[a].accuracy_without)
            } else {
                (rows[a].scr_with, rows[a].accuracy_with)
            };
            let (sb, ab) = if without {
                (rows[b].scr_without, rows[b].accuracy_without)
            } else {
                (rows[b].scr_with, rows[b].accuracy_with)
            };
            sb.partial_cmp(&sa)
                .unwrap()
                .then(ab.partial_cmp(&aa).unwrap())
                .then(rows[a].model.cmp(&rows[b].model))
        });
        for (rank0, &ix) in order.iter().enumerate() {
            if without {
                rows[ix].rank_without = rank0 + 1;
            } else {
                rows[ix].rank_with = rank0 + 1;
            }
        }
    };
    assign(&mut rows, false);
    assign(&mut rows, true);
    for row in &mut rows {
        row.rank_delta = row.rank_without as i64 - row.rank_with as i64;
    }
    Ok(rows)
}

/// Upper binomial tail: the probability that at least `k` of `n` independent
/// evaluators with per-evaluator competence `p` vote correctly.
pub fn condorcet_tail(n: u64, k: u64, p: f64) -> Result<f64> {
    if k < 1 || k > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "p must be in [0, 1], got {p}"
        )));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    // Each term evaluated in log space; the tail has at most n - k + 1 terms.
    let nf = n as f64;
    let mut sum = 0.0;
    for j in k..=n {
        let jf = j as f64;
        let ln_term = ln_gamma(nf + 1.0) - ln_gamma(jf + 1.0) - ln_gamma(nf - jf + 1.0)
            + jf * p.ln()
            + (nf - jf) * (1.0 - p).ln();
        sum += ln_term.exp();
    }
    Ok(sum.min(1.0))
}

/// Posterior probability that a unanimous verdict of `n` evaluators with
/// individual accuracy `a` is correct: `a^n / (a^n + (1-a)^n)`.
pub fn unanimous_posterior(n: u64, a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "a must be in (0, 1), got {a}"
        )));
    }
    // Evaluated as 1 / (1 + r^n) with r = (1-a)/a to avoid underflow.
    let r = (1.0 - a) / a;
    Ok(1.0 / (1.0 + r.powi(n as i32)))
}

/// Largest Byzantine evaluator count `f` a quota of `k` votes tolerates
/// under `k >= 2f + 1`.
pub fn bft_tolerance(k: u64) -> Result<u64> {
    if k < 1 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    Ok((k - 1) / 2)
}

/// Report for the audit threshold calculators at one operating point.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdTheoryReport {
    pub n: u64,
    pub k: u64,
    pub p: f64,
    pub condorcet_tail: f64,
    pub unanimous_posterior: f64,
    pub bft_max_byzantine: u64,
    /// Binomial tail at the empirical true-negative rate.
    pub binomial_tail_at_tnr: f64,
}

pub fn threshold_theory(n: u64, k: u64, p: f64, tnr: f64) -> Result<ThresholdTheoryReport> {
    Ok(ThresholdTheoryReport {
        n,
        k,
        p,
        condorcet_tail: condorcet_tail(n, k, p)?,
        unanimous_posterior: unanimous_posterior(n, p)?,
        bft_max_byzantine: bft_tolerance(k)?,
        binomial_tail_at_tnr: condorcet_tail(n, k, tnr)?,
    })
}
