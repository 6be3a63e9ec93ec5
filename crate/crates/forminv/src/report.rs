//! Deterministic report construction and rendering (Markdown, CSV, JSON).
//! Percentages render to one decimal place, half-up; raw values are always
//! available in the JSON form.

use serde::Serialize;

use crate::audit::{AuditOutcome, ImpactRow, Severity};
use crate::data::{Family, ResponseMatrix};
use crate::error::{Error, Result};
use crate::metrics::{metric_report, MetricReport};
use crate::stats::{rank_correlations, RankCorrelations};

/// Render a fraction as a percentage with one decimal, half-up.
pub fn fmt_pct(x: f64) -> String {
    let scaled = (x * 1000.0).round() / 10.0;
    format!("{scaled:.1}%")
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyRow {
    pub family: Family,
    pub code: String,
    pub category: String,
    /// Unweighted mean of the per-model failure rates.
    pub avg_failure: f64,
    pub models_covered: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationBlock {
    /// Between per-model accuracy and per-model mean invariance gap.
    pub accuracy_vs_mean_ig: RankCorrelations,
    pub n_models: usize,
}

/// The full evaluation report: per-model metrics, family failure table, and
/// the accuracy-vs-gap correlation block.
#[derive(Debug, Clone, Serialize)]
pub struct FullReport {
    pub model_count: usize,
    pub theorem_count: usize,
    pub item_count: usize,
    /// Sorted by mean invariance gap ascending (most invariant first).
    pub models: Vec<MetricReport>,
    /// Sorted by average failure descending.
    pub families: Vec<FamilyRow>,
    /// Present when at least 3 models have non-constant metrics.
    pub correlations: Option<CorrelationBlock>,
}

pub fn build_report(matrix: &ResponseMatrix, hi_ig_threshold: f64) -> Result<FullReport> {
    if matrix.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let mut models = Vec::new();
    for model in matrix.models() {
        models.push(metric_report(matrix, model, hi_ig_threshold)?);
    }
    models.sort_by(|a, b| {
        a.mean_ig
            .partial_cmp(&b.mean_ig)
            .unwrap()
            .then_with(|| a.model.cmp(&b.model))
    });

    let mut families = Vec::new();
    for &fam in matrix.families() {
        let rates: Vec<f64> = models
            .iter()
            .filter_map(|m| m.per_family_failure.get(&fam).copied())
            .collect();
        if rates.is_empty() {
            continue;
        }
        families.push(FamilyRow {
            family: fam,
            code: fam.code().to_string(),
            category: fam.category().to_string(),
            avg_failure: rates.iter().sum::<f64>() / rates.len() as f64,
            models_covered: rates.len(),
        });
    }
    families.sort_by(|a, b| {
        b.avg_failure
            .partial_cmp(&a.avg_failure)
            .unwrap()
            .then_with(|| a.family.cmp(&b.family))
    });

    let correlations = if models.len() >= 3 {
        let acc: Vec<f64> = models.iter().map(|m| m.accuracy).collect();
        let ig: Vec<f64> = models.iter().map(|m| m.mean_ig).collect();
        rank_correlations(&acc, &ig).ok().map(|c| CorrelationBlock {
            accuracy_vs_mean_ig: c,
            n_models: models.len(),
        })
    } else {
        None
    };

    Ok(FullReport {
        model_count: matrix.models().len(),
        theorem_count: matrix.theorems().len(),
        item_count: matrix.items().len(),
        models,
        families,
        correlations,
    })
}

/// Markdown rendering: model table (Model, Tier, Accuracy, Mean IG, SCR),
/// family table (Family, Category, Avg. Failure Rate), correlation block.
/// The data files carry no model tier, so that column renders as `-`.
pub fn render_markdown(report: &FullReport) -> String {
    let mut out = String::new();
    out.push_str("# Invariance report\n\n");
    out.push_str(&format!(
        "{} models, {} theorems, {} items.\n\n",
        report.model_count, report.theorem_count, report.item_count
    ));

    out.push_str("## Per-model invariance profile\n\n");
    out.push_str("| Model | Tier | Accuracy | Mean IG | SCR |\n");
    out.push_str("|---|---|---:|---:|---:|\n");
    for m in &report.models {
        out.push_str(&format!(
            "| {} | - | {} | {} | {} |\n",
            m.model,
            fmt_pct(m.accuracy),
            fmt_pct(m.mean_ig),
            fmt_pct(m.scr)
        ));
    }
    out.push('\n');
    for m in &report.models {
        if m.coverage < 1.0 {
            out.push_str(&format!(
                "Coverage {}: {} ({} of {} theorems excluded from SCR).\n",
                m.model,
                fmt_pct(m.coverage),
                m.scr_excluded,
                m.theorems_profiled
            ));
        }
    }
    out.push('\n');

    if !report.families.is_empty() {
        out.push_str("## Per-family failure rates\n\n");
        out.push_str("| Family | Category | Avg. Failure Rate |\n");
        out.push_str("|---|---|---:|\n");
        for f in &report.families {
            out.push_str(&format!(
                "| {} ({}) | {} | {} |\n",
                f.code,
                f.family.name(),
                f.category,
                fmt_pct(f.avg_failure)
            ));
        }
        out.push('\n');
    }

    if let Some(c) = &report.correlations {
        let r = &c.accuracy_vs_mean_ig;
        out.push_str("## Accuracy vs. Mean IG\n\n");
        out.push_str(&format!(
            "Pearson r = {:.3}; Spearman rho = {:.3} (p = {:.4}{}); Kendall tau = {:.3}; n = {}.\n",
            r.pearson_r,
            r.spearman_rho,
            r.spearman_p,
            if r.spearman_p_exact.is_some() {
                ", exact"
            } else {
                ", t-approx"
            },
            r.kendall_tau,
            c.n_models
        ));
    }
    out
}

/// Plot-ready CSV: one row per model with raw values, family failure columns
/// appended in fixed family order.
pub fn render_csv(report: &FullReport) -> String {
    let mut fams: Vec<Family> = report.families.iter().map(|f| f.family).collect();
    fams.sort();
    let mut out = String::from("model,accuracy,mean_ig,rms_ig,scr,hi_ig_pct,coverage");
    for f in &fams {
        out.push_str(&format!(",failure_{}", f.code().to_ascii_lowercase()));
    }
    out.push('\n');
    for m in &report.models {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}",
            m.model, m.accuracy, m.mean_ig, m.rms_ig, m.scr, m.hi_ig_pct, m.coverage
        ));
        for f in &fams {
            match m.per_family_failure.get(f) {
                Some(v) => out.push_str(&format!(",{v}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn render_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Markdown audit report: one section per flag (item text slot, per-model
/// vote breakdown, severity), then the before/after rank table.
pub fn render_audit_markdown(outcome: &AuditOutcome, impact: &[ImpactRow]) -> String {
    let mut out = String::new();
    out.push_str("# Paraphrase quality audit\n\n");
    out.push_str(&format!(
        "Threshold {} ({} denominator); {} flagged, {} borderline.\n\n",
        outcome.threshold,
        match outcome.denominator {
            crate::audit::Denominator::Eligible => "eligible-models",
            crate::audit::Denominator::TotalModels => "total-models",
        },
        outcome.flagged().count(),
        outcome
            .flags
            .iter()
            .filter(|f| f.severity == Severity::Borderline)
            .count()
    ));
    for w in &outcome.warnings {
        out.push_str(&format!("> warning: {w}\n"));
    }
    if !outcome.warnings.is_empty() {
        out.push('\n');
    }

    for flag in &outcome.flags {
        out.push_str(&format!("## {}\n\n", flag.item_id));
        out.push_str(&format!(
            "- theorem: {}\n- family: {} ({})\n- severity: {}\n- votes: {} of {} eligible (quota {})\n",
            flag.theorem_id,
            flag.family.code(),
            flag.family.name(),
            match flag.severity {
                Severity::Flagged => "flagged",
                Severity::Borderline => "borderline",
            },
            flag.fail_votes,
            flag.eligible_models,
            flag.threshold_used
        ));
        out.push_str("- item text: (attach from dataset)\n");
        out.push_str(&format!(
            "- failing models: {}\n\n",
            if flag.voters.is_empty() {
                "none".to_string()
            } else {
                flag.voters.join(", ")
            }
        ));
    }

    if !impact.is_empty() {
        out.push_str("## Ranking impact of removing flagged items\n\n");
        out.push_str("| Model | SCR (with) | SCR (without) | Rank | Delta |\n");
        out.push_str("|---|---:|---:|---|---:|\n");
        let mut rows: Vec<&ImpactRow> = impact.iter().collect();
        rows.sort_by_key(|r| r.rank_with);
        for r in rows {
            let arrow = match r.rank_delta {
                d if d > 0 => format!("down {d}"),
                d if d < 0 => format!("up {}", -d),
                _ => "0".to_string(),
            };
            out.push_str(&format!(
                "| {} | {} (#{}) | {} (#{}) | {} -> {} | {} |\n",
                r.model,
                fmt_pct(r.scr_with),
                r.rank_with,
                fmt_pct(r.scr_without),
                r.rank_without,
                r.rank_with,
                r.rank_without,
                arrow
            ));
        }
    }
    out
}
