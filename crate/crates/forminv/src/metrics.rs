//! Per-theorem invariance profiles and the aggregate metric suite.
//!
//! The invariance gap of a theorem is the standard deviation of the model's
//! binary verdicts across the paraphrases of that theorem: `sqrt(p*(1-p))`
//! where `p` is the fraction of present paraphrase answers that are correct.
//! The canonical verdict never enters `p`; it only enters the all-correct
//! condition behind the semantic consistency rate.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::{Family, ResponseMatrix};
use crate::error::{Error, Result};

/// `sqrt(p * (1 - p))`, clamped against negative rounding noise.
pub fn invariance_gap(p: f64) -> f64 {
    (p * (1.0 - p)).max(0.0).sqrt()
}

/// One model's verdict profile on one theorem's equivalence class.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremProfile {
    pub theorem_id: String,
    pub model: String,
    /// Fraction of present paraphrase answers that are correct.
    pub p: f64,
    /// `sqrt(p * (1 - p))`.
    pub ig: f64,
    /// Present paraphrase answers behind `p`.
    pub n_present: usize,
    /// Every present paraphrase correct and the canonical present and correct.
    pub all_correct: bool,
    /// Every item of the theorem (canonical and paraphrases) has a present
    /// answer from this model.
    pub fully_covered: bool,
}

/// Profile of `model` on `theorem_id`. Errors when the model has no present
/// paraphrase answer for the theorem; such theorems are excluded from
/// aggregates and counted.
pub fn theorem_profile(
    matrix: &ResponseMatrix,
    model: &str,
    theorem_id: &str,
) -> Result<TheoremProfile> {
    if !matrix.has_model(model) {
        return Err(Error::UnknownModel(model.to_string()));
    }
    let mut n_present = 0usize;
    let mut n_correct = 0usize;
    let mut canonical_ok = true;
    let mut fully_covered = true;
    let mut paraphrase_all_correct = true;
    let mut saw_item = false;

    for item in matrix.theorem_items(theorem_id) {
        saw_item = true;
        let rec = matrix.record_for(model, &item.item_id);
        let present = rec.map(|r| r.answer.is_some()).unwrap_or(false);
        if !present {
            fully_covered = false;
        }
        if item.family.is_canonical() {
            if !rec.map(|r| r.is_correct()).unwrap_or(false) {
                canonical_ok = false;
            }
        } else if let Some(r) = rec {
            if r.answer.is_some() {
                n_present += 1;
                if r.is_correct() {
                    n_correct += 1;
                } else {
                    paraphrase_all_correct = false;
                }
            }
        }
    }

    if !saw_item || n_present == 0 {
        return Err(Error::UndefinedProfile {
            model: model.to_string(),
            theorem: theorem_id.to_string(),
        });
    }

    let p = n_correct as f64 / n_present as f64;
    Ok(TheoremProfile {
        theorem_id: theorem_id.to_string(),
        model: model.to_string(),
        p,
        ig: invariance_gap(p),
        n_present,
        all_correct: paraphrase_all_correct && canonical_ok,
        fully_covered,
    })
}

/// All defined profiles of a model, plus the count of theorems whose profile
/// is undefined (no present paraphrase answer).
pub fn theorem_profiles(
    matrix: &ResponseMatrix,
    model: &str,
) -> Result<(Vec<TheoremProfile>, usize)> {
    if !matrix.has_model(model) {
        return Err(Error::UnknownModel(model.to_string()));
    }
    // Sorted theorem order so aggregate sums do not depend on ingest order.
    let mut theorems: Vec<&String> = matrix.theorems().iter().collect();
    theorems.sort();
    let mut profiles = Vec::new();
    let mut undefined = 0usize;
    for theorem in theorems {
        match theorem_profile(matrix, model, theorem) {
            Ok(p) => profiles.push(p),
            Err(Error::UndefinedProfile { .. }) => undefined += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((profiles, undefined))
}

/// Aggregate invariance metrics for one model.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub model: String,
    /// Fraction of present items (canonical and paraphrase) answered correctly.
    pub accuracy: f64,
    /// Arithmetic mean of per-theorem invariance gaps.
    pub mean_ig: f64,
    /// `sqrt(mean(ig^2))`; never below `mean_ig`.
    pub rms_ig: f64,
    /// Fraction of fully covered theorems answered correctly on the canonical
    /// and every paraphrase.
    pub scr: f64,
    /// Fraction of profiled theorems with `ig > hi_ig_threshold`.
    pub hi_ig_pct: f64,
    pub hi_ig_threshold: f64,
    pub per_family_failure: BTreeMap<Family, f64>,
    pub coverage: f64,
    pub theorems_profiled: usize,
    pub undefined_profiles: usize,
    /// Theorems in the SCR denominator (profiled and fully covered).
    pub scr_denominator: usize,
    /// Profiled theorems excluded from SCR for partial coverage.
    pub scr_excluded: usize,
    pub warnings: Vec<String>,
}

/// Compute the full metric suite for one model.
pub fn metric_report(
    matrix: &ResponseMatrix,
    model: &str,
    hi_ig_threshold: f64,
) -> Result<MetricReport> {
    if !matrix.has_model(model) {
        return Err(Error::UnknownModel(model.to_string()));
    }
    let mut warnings = Vec::new();

    let mut present = 0usize;
    let mut correct = 0usize;
    for rec in matrix.model_records(model) {
        if rec.answer.is_some() {
            present += 1;
            if rec.is_correct() {
                correct += 1;
            }
        }
    }
    if present == 0 {
        return Err(Error::InvalidArgument(format!(
            "model {model:?} has no present answers"
        )));
    }
    let accuracy = correct as f64 / present as f64;

    let (profiles, undefined_profiles) = theorem_profiles(matrix, model)?;
    if profiles.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "model {model:?} has no theorem with a defined profile"
        )));
    }
    let n = profiles.len() as f64;
    let mean_ig = profiles.iter().map(|p| p.ig).sum::<f64>() / n;
    let rms_ig = (profiles.iter().map(|p| p.ig * p.ig).sum::<f64>() / n).sqrt();
    let hi_ig_pct = profiles.iter().filter(|p| p.ig > hi_ig_threshold).count() as f64 / n;

    let covered: Vec<&TheoremProfile> = profiles.iter().filter(|p| p.fully_covered).collect();
    let scr_denominator = covered.len();
    let scr_excluded = profiles.len() - scr_denominator;
    let scr = if scr_denominator == 0 {
        warnings.push(format!(
            "model {model}: no fully covered theorem; SCR reported as 0"
        ));
        0.0
    } else {
        covered.iter().filter(|p| p.all_correct).count() as f64 / scr_denominator as f64
    };

    let (per_family_failure, omitted) = per_family_failure(matrix, model)?;
    for fam in omitted {
        warnings.push(format!(
            "model {model}: family {fam} has no present answers; omitted from failure map"
        ));
    }

    Ok(MetricReport {
        model: model.to_string(),
        accuracy,
        mean_ig,
        rms_ig,
        scr,
        hi_ig_pct,
        hi_ig_threshold,
        per_family_failure,
        coverage: matrix.coverage(model)?,
        theorems_profiled: profiles.len(),
        undefined_profiles,
        scr_denominator,
        scr_excluded,
        warnings,
    })
}

/// Per-family failure rates: incorrect present answers over present answers,
/// paraphrase items only. Families with no present answers are omitted and
/// returned separately.
pub fn per_family_failure(
    matrix: &ResponseMatrix,
    model: &str,
) -> Result<(BTreeMap<Family, f64>, Vec<Family>)> {
    if !matrix.has_model(model) {
        return Err(Error::UnknownModel(model.to_string()));
    }
    let mut present: BTreeMap<Family, usize> = BTreeMap::new();
    let mut wrong: BTreeMap<Family, usize> = BTreeMap::new();
    for rec in matrix.model_records(model) {
        if let Some(fam) = rec.family.family() {
            if rec.answer.is_some() {
                *present.entry(fam).or_insert(0) += 1;
                if rec.is_incorrect() {
                    *wrong.entry(fam).or_insert(0) += 1;
                }
            }
        }
    }
    let mut map = BTreeMap::new();
    let mut omitted = Vec::new();
    for &fam in matrix.families() {
        match present.get(&fam) {
            Some(&n) if n > 0 => {
                let w = wrong.get(&fam).copied().unwrap_or(0);
                map.insert(fam, w as f64 / n as f64);
            }
            _ => omitted.push(fam),
        }
    }
    omitted.sort();
    Ok((map, omitted))
}

/// Family-restricted consistency rate: the fraction of theorems on which the
/// model answers both the canonical and the family's paraphrase correctly,
/// among theorems where both verdicts are present. Used as the per-family
/// score vector of the ranking-weight solver.
pub fn per_family_scr(matrix: &ResponseMatrix, model: &str) -> Result<BTreeMap<Family, f64>> {
    if !matrix.has_model(model) {
        return Err(Error::UnknownModel(model.to_string()));
    }
    let mut num: BTreeMap<Family, usize> = BTreeMap::new();
    let mut den: BTreeMap<Family, usize> = BTreeMap::new();
    for theorem in matrix.theorems() {
        let canonical = matrix
            .theorem_items(theorem)
            .find(|it| it.family.is_canonical())
            .and_then(|it| matrix.record_for(model, &it.item_id));
        let canonical_present = canonical.map(|r| r.answer.is_some()).unwrap_or(false);
        let canonical_ok = canonical.map(|r| r.is_correct()).unwrap_or(false);
        for item in matrix.theorem_items(theorem) {
            if let Some(fam) = item.family.family() {
                if let Some(rec) = matrix.record_for(model, &item.item_id) {
                    if rec.answer.is_some() && canonical_present {
                        *den.entry(fam).or_insert(0) += 1;
                        if rec.is_correct() && canonical_ok {
                            *num.entry(fam).or_insert(0) += 1;
                        }
                    }
                }
            }
        }
    }
    let mut map = BTreeMap::new();
    for (fam, d) in den {
        if d > 0 {
            map.insert(fam, num.get(&fam).copied().unwrap_or(0) as f64 / d as f64);
        }
    }
    Ok(map)
}

/// Balanced accuracy over ground-truth classes, plus TRUE-bias.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BalancedAccuracy {
    /// Mean of the per-class accuracies.
    pub balanced_accuracy: f64,
    /// Fraction of ground-truth-FALSE items answered TRUE.
    pub true_bias: f64,
    pub n_true: usize,
    pub n_false: usize,
}

pub fn balanced_accuracy_and_bias(
    matrix: &ResponseMatrix,
    model: &str,
) -> Result<BalancedAccuracy> {
    if !matrix.has_model(model) {
        return Err(Error::UnknownModel(model.to_string()));
    }
    let mut n_true = 0usize;
    let mut n_false = 0usize;
    let mut correct_true = 0usize;
    let mut correct_false = 0usize;
    let mut false_answered_true = 0usize;
    for rec in matrix.model_records(model) {
        if rec.answer.is_none() {
            continue;
        }
        if rec.ground_truth {
            n_true += 1;
            if rec.is_correct() {
                correct_true += 1;
            }
        } else {
            n_false += 1;
            if rec.is_correct() {
                correct_false += 1;
            }
            if rec.answer == Some(true) {
                false_answered_true += 1;
            }
        }
    }
    if n_true == 0 {
        return Err(Error::SingleClass { class: false });
    }
    if n_false == 0 {
        return Err(Error::SingleClass { class: true });
    }
    let acc_true = correct_true as f64 / n_true as f64;
    let acc_false = correct_false as f64 / n_false as f64;
    Ok(BalancedAccuracy {
        balanced_accuracy: 0.5 * (acc_true + acc_false),
        true_bias: false_answered_true as f64 / n_false as f64,
        n_true,
        n_false,
    })
}

/// Data-level check of the paraphrase error bound: `mean(1 - p) >= mean(ig^2)`,
/// with equality exactly when every `p` is 1.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub equality_case: bool,
}

pub fn check_error_bound(profiles: &[TheoremProfile]) -> Result<ErrorBoundCheck> {
    if profiles.is_empty() {
        return Err(Error::InvalidArgument(
            "error bound check needs at least one profile".into(),
        ));
    }
    let n = profiles.len() as f64;
    let lhs = profiles.iter().map(|p| 1.0 - p.p).sum::<f64>() / n;
    let rhs = profiles.iter().map(|p| p.ig * p.ig).sum::<f64>() / n;
    Ok(ErrorBoundCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-12,
        equality_case: profiles.iter().all(|p| p.p == 1.0),
    })
}

/// Outcome of the family-pair ranking reversal condition on two models: if
/// the accuracy advantage flips sign between the families (all four
/// accuracies in `(0.5, 1]`), the invariance-gap ordering flips with it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReversalCheck {
    pub sign_product_negative: bool,
    pub ig_orders_reversed: bool,
}

pub fn check_reversal_condition(
    p_i_1: f64,
    p_i_2: f64,
    p_j_1: f64,
    p_j_2: f64,
) -> Result<ReversalCheck> {
    for &v in &[p_i_1, p_i_2, p_j_1, p_j_2] {
        if !(v > 0.5 && v <= 1.0) {
            return Err(Error::ReversalPrecondition { value: v });
        }
    }
    let sign_product_negative = (p_i_1 - p_i_2) * (p_j_1 - p_j_2) < 0.0;
    let d_i = invariance_gap(p_i_1) - invariance_gap(p_i_2);
    let d_j = invariance_gap(p_j_1) - invariance_gap(p_j_2);
    Ok(ReversalCheck {
        sign_product_negative,
        ig_orders_reversed: d_i * d_j < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_records_reader;
    use std::io::Cursor;

    fn rec(
        model: &str,
        thm: &str,
        item: &str,
        family: &str,
        truth: bool,
        answer: Option<bool>,
    ) -> String {
        let answer = match answer {
            Some(true) => "true",
            Some(false) => "false",
            None => "null",
        };
        format!(
            r#"{{"model":"{model}","theorem_id":"{thm}","item_id":"{item}","family":"{family}","ground_truth":{truth},"answer":{answer}}}"#
        )
    }

    /// One model, one theorem with a canonical and six paraphrases; `wrong`
    /// of the paraphrases answered incorrectly.
    fn six_paraphrase_matrix(wrong: usize, canonical_ok: bool) -> ResponseMatrix {
        let fams = [
            "syntactic",
            "quantifier",
            "passive",
            "notation",
            "order",
            "unpack",
        ];
        let mut lines = vec![rec(
            "m",
            "t",
            "t_canon",
            "canonical",
            true,
            Some(canonical_ok),
        )];
        for (i, f) in fams.iter().enumerate() {
            lines.push(rec("m", "t", &format!("t_{f}"), f, true, Some(i >= wrong)));
        }
        parse_records_reader(Cursor::new(lines.join("\n"))).unwrap()
    }

    #[test]
    fn profile_all_correct_has_zero_gap() {
        let m = six_paraphrase_matrix(0, true);
        let p = theorem_profile(&m, "m", "t").unwrap();
        assert_eq!(p.p, 1.0);
        assert_eq!(p.ig, 0.0);
        assert_eq!(p.n_present, 6);
        assert!(p.all_correct);
    }

    #[test]
    fn profile_half_correct_hits_maximum_gap() {
        let m = six_paraphrase_matrix(3, true);
        let p = theorem_profile(&m, "m", "t").unwrap();
        assert!((p.p - 0.5).abs() < 1e-12);
        assert!((p.ig - 0.5).abs() < 1e-12);
        assert!(!p.all_correct);
    }

    #[test]
    fn gap_formula_and_symmetry() {
        for k in 0..=100 {
            let p = k as f64 / 100.0;
            let ig = invariance_gap(p);
            assert!((ig * ig - p * (1.0 - p)).abs() < 1e-12);
            assert!((0.0..=0.5 + 1e-12).contains(&ig));
            assert!((ig - invariance_gap(1.0 - p)).abs() < 1e-12);
        }
        assert_eq!(invariance_gap(0.0), 0.0);
        assert_eq!(invariance_gap(1.0), 0.0);
    }

    #[test]
    fn failing_two_of_seven_lands_in_high_gap_cluster() {
        let p = 5.0 / 7.0;
        let ig = invariance_gap(p);
        assert!((0.35..=0.50).contains(&ig), "ig = {ig}");
    }

    #[test]
    fn canonical_flip_changes_no_p_or_ig() {
        let a = theorem_profile(&six_paraphrase_matrix(2, true), "m", "t").unwrap();
        let b = theorem_profile(&six_paraphrase_matrix(2, false), "m", "t").unwrap();
        assert_eq!(a.p, b.p);
        assert_eq!(a.ig, b.ig);
        assert!(!b.all_correct);
    }

    #[test]
    fn undefined_profile_when_no_present_paraphrase() {
        let lines = [
            rec("m", "t", "t_canon", "canonical", true, Some(true)),
            rec("m", "t", "t_f1", "syntactic", true, None),
        ]
        .join("\n");
        let m = parse_records_reader(Cursor::new(lines)).unwrap();
        assert!(matches!(
            theorem_profile(&m, "m", "t"),
            Err(Error::UndefinedProfile { .. })
        ));
    }

    #[test]
    fn all_correct_matrix_reports_perfect_metrics() {
        let m = six_paraphrase_matrix(0, true);
        let r = metric_report(&m, "m", 0.1).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.mean_ig, 0.0);
        assert_eq!(r.scr, 1.0);
        assert_eq!(r.hi_ig_pct, 0.0);
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn partially_covered_theorem_leaves_scr_denominator() {
        // Theorem t1 fully covered and all correct; t2 has an absent
        // paraphrase answer (still profiled, excluded from SCR).
        let lines = [
            rec("m", "t1", "t1_canon", "canonical", true, Some(true)),
            rec("m", "t1", "t1_f1", "syntactic", true, Some(true)),
            rec("m", "t2", "t2_canon", "canonical", true, Some(true)),
            rec("m", "t2", "t2_f1", "syntactic", true, Some(true)),
            rec("m", "t2", "t2_f2", "quantifier", true, None),
        ]
        .join("\n");
        let m = parse_records_reader(Cursor::new(lines)).unwrap();
        let r = metric_report(&m, "m", 0.1).unwrap();
        assert_eq!(r.scr_denominator, 1);
        assert_eq!(r.scr_excluded, 1);
        assert_eq!(r.scr, 1.0);
        assert_eq!(r.theorems_profiled, 2);
    }

    #[test]
    fn per_family_failure_counts_present_answers_only() {
        let lines = [
            rec("m", "t1", "t1_f5", "connective", true, Some(false)),
            rec("m", "t1", "t1_f6", "order", true, Some(true)),
            rec("m", "t2", "t2_f5", "connective", true, Some(false)),
            rec("m", "t2", "t2_f6", "order", true, None),
        ]
        .join("\n");
        let m = parse_records_reader(Cursor::new(lines)).unwrap();
        let (map, omitted) = per_family_failure(&m, "m").unwrap();
        assert_eq!(map[&Family::F5], 1.0);
        assert_eq!(map[&Family::F6], 0.0);
        assert!(omitted.is_empty());
    }

    #[test]
    fn family_with_no_present_answers_is_omitted() {
        let lines = [
            rec("m", "t1", "t1_f5", "connective", true, None),
            rec("m", "t1", "t1_f6", "order", true, Some(true)),
        ]
        .join("\n");
        let m = parse_records_reader(Cursor::new(lines)).unwrap();
        let (map, omitted) = per_family_failure(&m, "m").unwrap();
        assert!(!map.contains_key(&Family::F5));
        assert_eq!(omitted, vec![Family::F5]);
    }

    #[test]
    fn always_true_responder_has_coin_flip_balanced_accuracy() {
        let lines = [
            rec("m", "t1", "t1_f1", "syntactic", true, Some(true)),
            rec("m", "t2", "t2_f1", "syntactic", true, Some(true)),
            rec("m", "f1", "f1_f1", "syntactic", false, Some(true)),
            rec("m", "f2", "f2_f1", "syntactic", false, Some(true)),
        ]
        .join("\n");
        let m = parse_records_reader(Cursor::new(lines)).unwrap();
        let b = balanced_accuracy_and_bias(&m, "m").unwrap();
        assert!((b.balanced_accuracy - 0.5).abs() < 1e-12);
        assert!((b.true_bias - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_responder_on_mixed_matrix() {
        let lines = [
            rec("m", "t1", "t1_f1", "syntactic", true, Some(true)),
            rec("m", "f1", "f1_f1", "syntactic", false, Some(false)),
        ]
        .join("\n");
        let m = parse_records_reader(Cursor::new(lines)).unwrap();
        let b = balanced_accuracy_and_bias(&m, "m").unwrap();
        assert_eq!(b.balanced_accuracy, 1.0);
        assert_eq!(b.true_bias, 0.0);
    }

    #[test]
    fn single_class_matrix_is_rejected() {
        let m = six_paraphrase_matrix(0, true);
        assert!(matches!(
            balanced_accuracy_and_bias(&m, "m"),
            Err(Error::SingleClass { class: true })
        ));
    }

    fn profile_with_p(p: f64) -> TheoremProfile {
        TheoremProfile {
            theorem_id: "t".into(),
            model: "m".into(),
            p,
            ig: invariance_gap(p),
            n_present: 10,
            all_correct: p == 1.0,
            fully_covered: true,
        }
    }

    #[test]
    fn error_bound_equality_at_all_ones() {
        let profiles = vec![profile_with_p(1.0), profile_with_p(1.0)];
        let c = check_error_bound(&profiles).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert_eq!(c.rhs, 0.0);
        assert!(c.holds);
        assert!(c.equality_case);
    }

    #[test]
    fn error_bound_half_and_one() {
        let profiles = vec![profile_with_p(0.5), profile_with_p(1.0)];
        let c = check_error_bound(&profiles).unwrap();
        assert!((c.lhs - 0.25).abs() < 1e-12);
        assert!((c.rhs - 0.125).abs() < 1e-12);
        assert!(c.holds);
        assert!(!c.equality_case);
    }

    #[test]
    fn reversal_on_calibration_quadruple() {
        let c = check_reversal_condition(1.00, 0.833, 0.90, 0.94).unwrap();
        assert!(c.sign_product_negative);
        assert!(c.ig_orders_reversed);
    }

    #[test]
    fn reversal_ties_make_no_claim() {
        let c = check_reversal_condition(0.9, 0.9, 0.8, 0.8).unwrap();
        assert!(!c.sign_product_negative);
        assert!(!c.ig_orders_reversed);
    }

    #[test]
    fn reversal_rejects_out_of_range_accuracy() {
        assert!(matches!(
            check_reversal_condition(0.5, 0.9, 0.8, 0.8),
            Err(Error::ReversalPrecondition { .. })
        ));
        assert!(matches!(
            check_reversal_condition(0.9, 0.9, 1.2, 0.8),
            Err(Error::ReversalPrecondition { .. })
        ));
    }
}
