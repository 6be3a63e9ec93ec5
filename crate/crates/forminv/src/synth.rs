//! Synthetic response matrices with known ground truth: per-model per-family
//! failure rates, optional planted bad paraphrases, optional shared-error
//! correlation, and optional FALSE-control theorems. The generator is the
//! brute-force oracle behind the audit recall/precision tests and the metric
//! identity suites.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::audit::{unanimity_flags, Denominator};
use crate::data::{Family, ItemFamily, ResponseMatrix, ResponseRecord};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

#[derive(Debug, Clone)]
pub struct SynthSpec {
    /// Theorems with ground truth TRUE.
    pub n_theorems: usize,
    /// Additional FALSE-control theorems (ground truth FALSE).
    pub n_false_theorems: usize,
    pub families: Vec<Family>,
    /// Per-model, per-family failure probability on normal paraphrase items.
    pub model_family_failure: BTreeMap<String, BTreeMap<Family, f64>>,
    /// Probability a canonical item is answered correctly.
    pub canonical_accuracy: f64,
    /// Paraphrase items (of TRUE theorems) failed at `bad_item_failure_prob`
    /// by every model.
    pub n_planted_bad: usize,
    pub bad_item_failure_prob: f64,
    /// Probability a model copies the shared per-item error draw instead of
    /// its own.
    pub correlation: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// All models at the same failure rate on every family.
    pub fn uniform(
        n_models: usize,
        n_theorems: usize,
        families: &[Family],
        failure_rate: f64,
        seed: u64,
    ) -> SynthSpec {
        let profile: BTreeMap<Family, f64> = families.iter().map(|&f| (f, failure_rate)).collect();
        let model_family_failure = (0..n_models)
            .map(|i| (format!("model_{i:02}"), profile.clone()))
            .collect();
        SynthSpec {
            n_theorems,
            n_false_theorems: 0,
            families: families.to_vec(),
            model_family_failure,
            canonical_accuracy: 1.0,
            n_planted_bad: 0,
            bad_item_failure_prob: 0.95,
            correlation: 0.0,
            seed,
        }
    }

    pub fn models(&self) -> Vec<&String> {
        self.model_family_failure.keys().collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_family_failure.is_empty() {
            return Err(Error::InvalidArgument("spec has no models".into()));
        }
        if self.n_theorems + self.n_false_theorems == 0 {
            return Err(Error::InvalidArgument("spec has no theorems".into()));
        }
        if self.families.is_empty() {
            return Err(Error::InvalidArgument("spec has no families".into()));
        }
        let probs_ok = |p: f64| (0.0..=1.0).contains(&p);
        if !probs_ok(self.canonical_accuracy)
            || !probs_ok(self.bad_item_failure_prob)
            || !probs_ok(self.correlation)
        {
            return Err(Error::InvalidArgument(
                "probabilities must be in [0, 1]".into(),
            ));
        }
        for profile in self.model_family_failure.values() {
            for &f in &self.families {
                match profile.get(&f) {
                    Some(&p) if probs_ok(p) => {}
                    Some(&p) => {
                        return Err(Error::InvalidArgument(format!(
                            "failure rate {p} out of range"
                        )))
                    }
                    None => {
                        return Err(Error::InvalidArgument(format!(
                            "missing failure rate for family {f}"
                        )))
                    }
                }
            }
        }
        if self.n_planted_bad > self.n_theorems * self.families.len() {
            return Err(Error::InvalidArgument(
                "more planted items than paraphrase items".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct SynthOutput {
    pub matrix: ResponseMatrix,
    pub planted: BTreeSet<String>,
}

/// Deterministically generate a response matrix from a spec. Identical specs
/// (including seed) produce identical matrices; every (item, model) cell has
/// its own derived RNG stream, so output does not depend on evaluation order.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let models: Vec<String> = spec.model_family_failure.keys().cloned().collect();
    let n_models = models.len() as u64;

    struct ItemPlan {
        item_id: String,
        theorem_id: String,
        family: ItemFamily,
        truth: bool,
    }
    let mut items = Vec::new();
    for t in 0..spec.n_theorems + spec.n_false_theorems {
        let (theorem_id, truth) = if t < spec.n_theorems {
            (format!("thm_{t:04}"), true)
        } else {
            (format!("ctrl_{:04}", t - spec.n_theorems), false)
        };
        items.push(ItemPlan {
            item_id: format!("{theorem_id}_canon"),
            theorem_id: theorem_id.clone(),
            family: ItemFamily::Canonical,
            truth,
        });
        for &fam in &spec.families {
            items.push(ItemPlan {
                item_id: format!("{theorem_id}_{}", fam.code().to_ascii_lowercase()),
                theorem_id: theorem_id.clone(),
                family: ItemFamily::Paraphrase(fam),
                truth,
            });
        }
    }

    // Plant bad paraphrases among the TRUE theorems' paraphrase items.
    let mut candidates: Vec<usize> = items
        .iter()
        .enumerate()
        .filter(|(_, it)| it.truth && !it.family.is_canonical())
        .map(|(ix, _)| ix)
        .collect();
    let mut plant_rng = stream_rng(spec.seed, streams::SYNTH_PLANT, 0);
    for i in (1..candidates.len()).rev() {
        let j = plant_rng.gen_range(0..=i);
        candidates.swap(i, j);
    }
    let planted_ix: BTreeSet<usize> = candidates.into_iter().take(spec.n_planted_bad).collect();

    let mut records = Vec::with_capacity(items.len() * models.len());
    let mut planted = BTreeSet::new();
    for (ix, item) in items.iter().enumerate() {
        let is_planted = planted_ix.contains(&ix);
        if is_planted {
            planted.insert(item.item_id.clone());
        }
        let rate_for = |model: &str| -> f64 {
            if is_planted {
                spec.bad_item_failure_prob
            } else {
                match item.family {
                    ItemFamily::Canonical => 1.0 - spec.canonical_accuracy,
                    ItemFamily::Paraphrase(f) => spec.model_family_failure[model][&f],
                }
            }
        };
        // Shared latent error draw at the item's mean failure rate.
        let mean_rate = models.iter().map(|m| rate_for(m)).sum::<f64>() / models.len() as f64;
        let base = ix as u64 * (n_models + 1);
        let mut shared_rng = stream_rng(spec.seed, streams::SYNTH_ITEM, base);
        let shared_error = shared_rng.gen::<f64>() < mean_rate;

        for (mi, model) in models.iter().enumerate() {
            let mut rng = stream_rng(spec.seed, streams::SYNTH_ITEM, base + 1 + mi as u64);
            let copy_shared = rng.gen::<f64>() < spec.correlation;
            let own_error = rng.gen::<f64>() < rate_for(model);
            let error = if copy_shared { shared_error } else { own_error };
            records.push(ResponseRecord {
                model: model.clone(),
                theorem_id: item.theorem_id.clone(),
                item_id: item.item_id.clone(),
                family: item.family,
                ground_truth: item.truth,
                answer: Some(if error { !item.truth } else { item.truth }),
                source: None,
            });
        }
    }

    Ok(SynthOutput {
        matrix: ResponseMatrix::from_records(records, None)?,
        planted,
    })
}

/// Empirical audit quality at one operating point, aggregated over seeds.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct OperatingPoint {
    pub recall: f64,
    pub precision: f64,
    pub fp_rate: f64,
    pub seeds: u64,
}

/// Run `generate` + `unanimity_flags` across `n_seeds` consecutive seeds and
/// aggregate recall/precision against the planted set.
pub fn audit_operating_point(
    spec: &SynthSpec,
    threshold: usize,
    n_seeds: u64,
) -> Result<OperatingPoint> {
    if spec.n_planted_bad == 0 {
        return Err(Error::InvalidArgument(
            "operating point needs at least one planted item".into(),
        ));
    }
    if n_seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let mut tp = 0u64;
    let mut fn_ = 0u64;
    let mut fp = 0u64;
    let mut clean = 0u64;
    for s in 0..n_seeds {
        let mut run = spec.clone();
        run.seed = spec.seed.wrapping_add(s);
        let out = generate(&run)?;
        let flagged =
            unanimity_flags(&out.matrix, threshold, Denominator::Eligible).flagged_item_ids();
        tp += flagged.intersection(&out.planted).count() as u64;
        fn_ += out.planted.difference(&flagged).count() as u64;
        fp += flagged.difference(&out.planted).count() as u64;
        let paraphrase_items = out
            .matrix
            .items()
            .iter()
            .filter(|it| !it.family.is_canonical())
            .count() as u64;
        clean += paraphrase_items - out.planted.len() as u64;
    }
    Ok(OperatingPoint {
        recall: tp as f64 / (tp + fn_) as f64,
        precision: if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        },
        fp_rate: if clean == 0 {
            0.0
        } else {
            fp as f64 / clean as f64
        },
        seeds: n_seeds,
    })
}
