//! Family-conditional model selection, reversal-pair detection, Pareto
//! dominance, and the ranking-weight feasibility solver over the family
//! simplex.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::data::Family;
use crate::error::{Error, Result};
use crate::lp::solve_matrix_game;

/// Per-model failure (or accuracy, or score) profile keyed by family.
pub type FamilyProfile = BTreeMap<Family, f64>;
pub type ModelProfiles = BTreeMap<String, FamilyProfile>;

/// Ranked recommendation for a requested family set.
#[derive(Debug, Clone, Serialize)]
pub struct SelectorRecommendation {
    pub requested_families: Vec<Family>,
    /// Ascending by expected failure; ties break on model id.
    pub ranking: Vec<(String, f64)>,
    pub winner: String,
    /// Models missing data for a requested family.
    pub excluded: Vec<String>,
}

/// Recommend the model with the lowest expected failure rate over the
/// requested families (unweighted mean by default, optional weights).
pub fn select_model(
    per_family_failure: &ModelProfiles,
    families: &[Family],
    weights: Option<&[f64]>,
) -> Result<SelectorRecommendation> {
    if families.is_empty() {
        return Err(Error::InvalidArgument("no families requested".into()));
    }
    let weights = match weights {
        None => vec![1.0; families.len()],
        Some(w) => {
            if w.len() != families.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} weights for {} families",
                    w.len(),
                    families.len()
                )));
            }
            if w.iter().any(|&v| v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidArgument(
                    "weights must be nonnegative with a positive sum".into(),
                ));
            }
            w.to_vec()
        }
    };
    let wsum: f64 = weights.iter().sum();

    let mut ranking = Vec::new();
    let mut excluded = Vec::new();
    for (model, profile) in per_family_failure {
        if families.iter().all(|f| profile.contains_key(f)) {
            let expected = families
                .iter()
                .zip(&weights)
                .map(|(f, w)| w * profile[f])
                .sum::<f64>()
                / wsum;
            ranking.push((model.clone(), expected));
        } else {
            excluded.push(model.clone());
        }
    }
    if ranking.is_empty() {
        return Err(Error::InvalidArgument(
            "no model covers every requested family".into(),
        ));
    }
    ranking.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    Ok(SelectorRecommendation {
        requested_families: families.to_vec(),
        winner: ranking[0].0.clone(),
        ranking,
        excluded,
    })
}

/// A family pair along which the accuracy advantage between two models flips
/// sign. Certified pairs have all four accuracies in (0.5, 1], the range in
/// which the gap-ordering reversal is guaranteed.
#[derive(Debug, Clone, Serialize)]
pub struct ReversalPair {
    pub family_i: Family,
    pub family_j: Family,
    pub delta_i: f64,
    pub delta_j: f64,
    pub certified: bool,
}

pub fn find_reversal_pairs(
    per_family_accuracy: &ModelProfiles,
    model_a: &str,
    model_b: &str,
) -> Result<Vec<ReversalPair>> {
    let a = per_family_accuracy
        .get(model_a)
        .ok_or_else(|| Error::UnknownModel(model_a.to_string()))?;
    let b = per_family_accuracy
        .get(model_b)
        .ok_or_else(|| Error::UnknownModel(model_b.to_string()))?;
    let shared: Vec<Family> = a.keys().filter(|f| b.contains_key(f)).copied().collect();
    if shared.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "models {model_a} and {model_b} share {} families; need at least 2",
            shared.len()
        )));
    }
    let in_range = |v: f64| v > 0.5 && v <= 1.0;
    let mut pairs = Vec::new();
    for (ix, &fi) in shared.iter().enumerate() {
        for &fj in &shared[ix + 1..] {
            let di = a[&fi] - b[&fi];
            let dj = a[&fj] - b[&fj];
            if di * dj < 0.0 {
                pairs.push(ReversalPair {
                    family_i: fi,
                    family_j: fj,
                    delta_i: di,
                    delta_j: dj,
                    certified: in_range(a[&fi])
                        && in_range(b[&fi])
                        && in_range(a[&fj])
                        && in_range(b[&fj]),
                });
            }
        }
    }
    Ok(pairs)
}

/// Pareto structure of a failure-rate profile set.
#[derive(Debug, Clone, Serialize)]
pub struct ParetoResult {
    /// Models not dominated by any other model.
    pub non_dominated: BTreeSet<String>,
    /// (dominator, dominated) pairs.
    pub dominance: Vec<(String, String)>,
}

/// A dominates B when A's failure rate is no worse on every shared family
/// and strictly better on at least one.
pub fn pareto_dominators(per_family_failure: &ModelProfiles) -> ParetoResult {
    let models: Vec<&String> = per_family_failure.keys().collect();
    let mut dominance = Vec::new();
    let mut dominated: BTreeSet<String> = BTreeSet::new();
    for &a in &models {
        for &b in &models {
            if a == b {
                continue;
            }
            let pa = &per_family_failure[a];
            let pb = &per_family_failure[b];
            let shared: Vec<Family> = pa.keys().filter(|f| pb.contains_key(f)).copied().collect();
            if shared.is_empty() {
                continue;
            }
            let no_worse = shared.iter().all(|f| pa[f] <= pb[f]);
            let strictly = shared.iter().any(|f| pa[f] < pb[f]);
            if no_worse && strictly {
                dominance.push((a.clone(), b.clone()));
                dominated.insert(b.clone());
            }
        }
    }
    let non_dominated = models
        .into_iter()
        .filter(|m| !dominated.contains(*m))
        .cloned()
        .collect();
    ParetoResult {
        non_dominated,
        dominance,
    }
}

/// A point on the family simplex.
#[derive(Debug, Clone, Serialize)]
pub struct WeightVector {
    pub weights: BTreeMap<Family, f64>,
}

impl WeightVector {
    pub fn validate(&self) -> bool {
        let sum: f64 = self.weights.values().sum();
        self.weights.values().all(|&w| w >= 0.0) && (sum - 1.0).abs() <= 1e-9
    }

    /// Weighted score of one model row.
    pub fn score(&self, profile: &FamilyProfile) -> f64 {
        self.weights
            .iter()
            .map(|(f, w)| w * profile.get(f).copied().unwrap_or(0.0))
            .sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum NfbOutcome {
    Feasible {
        weights: WeightVector,
        /// Smallest weighted gap between consecutive ranked models.
        margin: f64,
    },
    Infeasible {
        /// The consecutive pair that cannot be separated.
        pair: (String, String),
        /// Best achievable margin (below epsilon).
        margin: f64,
    },
}

/// Find a family weighting on the simplex under which the weighted
/// per-family scores realize the target strict ranking, by maximizing the
/// minimum gap between consecutive ranked models. Returns the weighting when
/// the optimal margin reaches `epsilon`, otherwise an infeasibility
/// certificate naming the pair that binds.
pub fn nfb_weights(
    per_family_scr: &ModelProfiles,
    target_ranking: &[String],
    epsilon: f64,
) -> Result<NfbOutcome> {
    if target_ranking.is_empty() {
        return Err(Error::InvalidArgument("empty target ranking".into()));
    }
    let unique: BTreeSet<&String> = target_ranking.iter().collect();
    if unique.len() != target_ranking.len() {
        return Err(Error::InvalidArgument(
            "target ranking repeats a model".into(),
        ));
    }
    if unique.len() != per_family_scr.len()
        || !unique.iter().all(|m| per_family_scr.contains_key(*m))
    {
        return Err(Error::InvalidArgument(
            "target ranking must be a permutation of the profiled models".into(),
        ));
    }
    let families: BTreeSet<Family> = per_family_scr
        .values()
        .flat_map(|p| p.keys().copied())
        .collect();
    if families.is_empty() {
        return Err(Error::InvalidArgument("profiles have no families".into()));
    }
    for (model, profile) in per_family_scr {
        if !families.iter().all(|f| profile.contains_key(f)) {
            return Err(Error::InvalidArgument(format!(
                "model {model} is missing a family row"
            )));
        }
    }
    let families: Vec<Family> = families.into_iter().collect();

    let uniform = || WeightVector {
        weights: families
            .iter()
            .map(|&f| (f, 1.0 / families.len() as f64))
            .collect(),
    };
    if target_ranking.len() == 1 {
        return Ok(NfbOutcome::Feasible {
            weights: uniform(),
            margin: f64::INFINITY,
        });
    }

    // Row r of the game payoff is the score difference between ranked
    // neighbors r and r+1; the game value is the best worst-case gap.
    let diffs: Vec<Vec<f64>> = target_ranking
        .windows(2)
        .map(|pair| {
            let hi = &per_family_scr[&pair[0]];
            let lo = &per_family_scr[&pair[1]];
            families.iter().map(|f| hi[f] - lo[f]).collect()
        })
        .collect();

    let game = solve_matrix_game(&diffs)?;
    let mut weights: Vec<f64> = game.column_strategy;
    // Clean float dust and renormalize onto the simplex.
    for w in weights.iter_mut() {
        if *w < 0.0 {
            *w = 0.0;
        }
    }
    let sum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= sum;
    }

    // Judge feasibility by direct evaluation of the returned point.
    let margins: Vec<f64> = diffs
        .iter()
        .map(|d| d.iter().zip(&weights).map(|(a, w)| a * w).sum())
        .collect();
    let (argmin, &margin) = margins
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("at least one pair");

    let weights = WeightVector {
        weights: families.iter().copied().zip(weights).collect(),
    };
    if margin >= epsilon {
        Ok(NfbOutcome::Feasible { weights, margin })
    } else {
        Ok(NfbOutcome::Infeasible {
            pair: (
                target_ranking[argmin].clone(),
                target_ranking[argmin + 1].clone(),
            ),
            margin,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(pairs: &[(Family, f64)]) -> FamilyProfile {
        pairs.iter().copied().collect()
    }

    fn two_model_failures() -> ModelProfiles {
        let mut m = ModelProfiles::new();
        m.insert(
            "gpt-4o".into(),
            profile(&[(Family::F6, 0.0), (Family::F7, 0.10)]),
        );
        m.insert(
            "claude-sonnet".into(),
            profile(&[(Family::F6, 0.167), (Family::F7, 0.06)]),
        );
        m
    }

    #[test]
    fn selector_prefers_low_failure_on_requested_family() {
        let profiles = two_model_failures();
        let unpack = select_model(&profiles, &[Family::F7], None).unwrap();
        assert_eq!(unpack.winner, "claude-sonnet");
        let order = select_model(&profiles, &[Family::F6], None).unwrap();
        assert_eq!(order.winner, "gpt-4o");
    }

    #[test]
    fn single_model_wins_by_default() {
        let mut m = ModelProfiles::new();
        m.insert("only".into(), profile(&[(Family::F1, 0.5)]));
        let rec = select_model(&m, &[Family::F1], None).unwrap();
        assert_eq!(rec.winner, "only");
        assert_eq!(rec.ranking.len(), 1);
    }

    #[test]
    fn selector_rejects_empty_family_list_and_uncovered_requests() {
        let profiles = two_model_failures();
        assert!(select_model(&profiles, &[], None).is_err());
        assert!(select_model(&profiles, &[Family::F5], None).is_err());
    }

    #[test]
    fn selector_excludes_models_missing_a_family() {
        let mut profiles = two_model_failures();
        profiles.insert("partial".into(), profile(&[(Family::F6, 0.0)]));
        let rec = select_model(&profiles, &[Family::F6, Family::F7], None).unwrap();
        assert_eq!(rec.excluded, vec!["partial".to_string()]);
    }

    #[test]
    fn selector_ranking_invariant_under_positive_scaling() {
        let profiles = two_model_failures();
        let mut scaled = ModelProfiles::new();
        for (m, p) in &profiles {
            scaled.insert(m.clone(), p.iter().map(|(f, v)| (*f, v * 3.5)).collect());
        }
        let a = select_model(&profiles, &[Family::F6, Family::F7], None).unwrap();
        let b = select_model(&scaled, &[Family::F6, Family::F7], None).unwrap();
        let order_a: Vec<&String> = a.ranking.iter().map(|r| &r.0).collect();
        let order_b: Vec<&String> = b.ranking.iter().map(|r| &r.0).collect();
        assert_eq!(order_a, order_b);
    }

    #[test]
    fn reversal_pair_detection_on_accuracy_profiles() {
        let mut acc = ModelProfiles::new();
        acc.insert(
            "gpt-4o".into(),
            profile(&[(Family::F6, 1.00), (Family::F7, 0.90)]),
        );
        acc.insert(
            "claude-sonnet".into(),
            profile(&[(Family::F6, 0.833), (Family::F7, 0.94)]),
        );
        let pairs = find_reversal_pairs(&acc, "gpt-4o", "claude-sonnet").unwrap();
        assert_eq!(pairs.len(), 1);
        assert!(pairs[0].certified);
        assert!(pairs[0].delta_i * pairs[0].delta_j < 0.0);
    }

    #[test]
    fn identical_profiles_have_no_reversals() {
        let p = profile(&[(Family::F1, 0.9), (Family::F2, 0.8), (Family::F3, 0.7)]);
        let mut acc = ModelProfiles::new();
        acc.insert("a".into(), p.clone());
        acc.insert("b".into(), p);
        assert!(find_reversal_pairs(&acc, "a", "b").unwrap().is_empty());
    }

    #[test]
    fn pareto_dominance_trivial_cases() {
        let mut failures = ModelProfiles::new();
        failures.insert(
            "zero".into(),
            profile(&[(Family::F1, 0.0), (Family::F2, 0.0)]),
        );
        failures.insert(
            "worse".into(),
            profile(&[(Family::F1, 0.1), (Family::F2, 0.0)]),
        );
        let r = pareto_dominators(&failures);
        assert!(r.non_dominated.contains("zero"));
        assert!(!r.non_dominated.contains("worse"));
        assert_eq!(r.dominance, vec![("zero".to_string(), "worse".to_string())]);
    }

    #[test]
    fn nfb_dominant_row_is_feasible_in_dominant_order_only() {
        let mut scr = ModelProfiles::new();
        scr.insert("a".into(), profile(&[(Family::F1, 0.9), (Family::F2, 0.8)]));
        scr.insert("b".into(), profile(&[(Family::F1, 0.7), (Family::F2, 0.6)]));
        match nfb_weights(&scr, &["a".into(), "b".into()], 1e-6).unwrap() {
            NfbOutcome::Feasible { weights, margin } => {
                assert!(weights.validate());
                assert!(margin >= 0.2 - 1e-9, "margin {margin}");
            }
            other => panic!("expected feasible, got {other:?}"),
        }
        match nfb_weights(&scr, &["b".into(), "a".into()], 1e-6).unwrap() {
            NfbOutcome::Infeasible { pair, .. } => {
                assert_eq!(pair, ("b".to_string(), "a".to_string()));
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn nfb_identical_rows_cannot_be_strictly_ordered() {
        let p = profile(&[(Family::F1, 0.5), (Family::F2, 0.5)]);
        let mut scr = ModelProfiles::new();
        scr.insert("a".into(), p.clone());
        scr.insert("b".into(), p);
        match nfb_weights(&scr, &["a".into(), "b".into()], 1e-6).unwrap() {
            NfbOutcome::Infeasible { pair, margin } => {
                assert_eq!(pair, ("a".to_string(), "b".to_string()));
                assert!(margin.abs() < 1e-9);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn nfb_rejects_bad_rankings() {
        let scr = two_model_failures();
        assert!(nfb_weights(&scr, &[], 1e-6).is_err());
        assert!(nfb_weights(&scr, &["gpt-4o".into()], 1e-6).is_err());
        assert!(nfb_weights(&scr, &["gpt-4o".into(), "gpt-4o".into()], 1e-6).is_err());
    }

    #[test]
    fn nfb_feasible_weights_realize_the_ranking() {
        // Complementary strengths: either order should be realizable.
        let mut scr = ModelProfiles::new();
        scr.insert("a".into(), profile(&[(Family::F1, 0.9), (Family::F2, 0.2)]));
        scr.insert("b".into(), profile(&[(Family::F1, 0.2), (Family::F2, 0.9)]));
        for ranking in [["a", "b"], ["b", "a"]] {
            let target: Vec<String> = ranking.iter().map(|s| s.to_string()).collect();
            match nfb_weights(&scr, &target, 1e-6).unwrap() {
                NfbOutcome::Feasible { weights, margin } => {
                    assert!(weights.validate());
                    let hi = weights.score(&scr[ranking[0]]);
                    let lo = weights.score(&scr[ranking[1]]);
                    assert!(hi - lo >= margin - 1e-9);
                    assert!(margin >= 1e-6);
                }
                other => panic!("expected feasible for {ranking:?}, got {other:?}"),
            }
        }
    }
}
