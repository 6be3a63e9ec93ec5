//! Property tests for the metric, statistics, audit, and selection layers.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::Rng;

use forminv::rng::stream_rng;
use forminv::*;

// ------------------------------------------------------------ helpers

/// A small random spec over 2..=4 models, 3..=10 theorems, 2..=5 families.
fn small_spec(seed: u64) -> SynthSpec {
    let mut rng = stream_rng(seed, 0xFEED, 0);
    let n_models = rng.gen_range(2..=4);
    let n_theorems = rng.gen_range(3..=10);
    let n_families = rng.gen_range(2..=5);
    let families: Vec<Family> = Family::ALL[..n_families].to_vec();
    let mut spec = SynthSpec::uniform(n_models, n_theorems, &families, 0.0, seed);
    for profile in spec.model_family_failure.values_mut() {
        for rate in profile.values_mut() {
            *rate = rng.gen_range(0.0..0.6);
        }
    }
    spec.canonical_accuracy = rng.gen_range(0.7..=1.0);
    spec
}

fn shuffled_records(matrix: &ResponseMatrix, seed: u64) -> ResponseMatrix {
    let mut records: Vec<ResponseRecord> = matrix.records().to_vec();
    let mut rng = stream_rng(seed, 0xD00D, 1);
    for i in (1..records.len()).rev() {
        let j = rng.gen_range(0..=i);
        records.swap(i, j);
    }
    ResponseMatrix::from_records(records, None).unwrap()
}

// ------------------------------------------------------------ metrics

proptest! {
    #[test]
    fn ig_formula_symmetry_and_range(p in 0.0f64..=1.0) {
        let ig = invariance_gap(p);
        prop_assert!((ig * ig - p * (1.0 - p)).abs() < 1e-12);
        prop_assert!((invariance_gap(1.0 - p) - ig).abs() < 1e-12);
        prop_assert!((0.0..=0.5 + 1e-12).contains(&ig));
    }

    #[test]
    fn bonferroni_strictly_decreases_in_m(alpha in 0.001f64..0.5, m in 1u64..1000) {
        prop_assert!(bonferroni(alpha, m + 1).unwrap() < bonferroni(alpha, m).unwrap());
    }

    #[test]
    fn correlations_stay_in_bounds(
        xs in prop::collection::vec(-100.0f64..100.0, 5..20),
        shift in -5.0f64..5.0,
    ) {
        let ys: Vec<f64> = xs.iter().map(|v| (v + shift).sin()).collect();
        if let Ok(c) = rank_correlations(&xs, &ys) {
            prop_assert!((-1.0..=1.0).contains(&c.pearson_r));
            prop_assert!((-1.0..=1.0).contains(&c.spearman_rho));
            prop_assert!((-1.0..=1.0).contains(&c.kendall_tau));
            prop_assert!((0.0..=1.0).contains(&c.spearman_p));
        }
    }
}

#[test]
fn jensen_pair_and_error_bound_on_random_matrices() {
    for seed in 0..300 {
        let out = generate(&small_spec(seed)).unwrap();
        for model in out.matrix.models() {
            let r = metric_report(&out.matrix, model, 0.1).unwrap();
            let (profiles, _) = theorem_profiles(&out.matrix, model).unwrap();
            let mean_p = profiles.iter().map(|p| p.p).sum::<f64>() / profiles.len() as f64;
            assert!(r.rms_ig >= r.mean_ig - 1e-12, "seed {seed} {model}");
            assert!(r.scr <= mean_p + 1e-12, "seed {seed} {model}");
            let b = check_error_bound(&profiles).unwrap();
            assert!(b.holds, "seed {seed} {model}");
            let all_ones = profiles.iter().all(|p| p.p == 1.0);
            assert_eq!(b.equality_case, all_ones);
            if all_ones {
                assert!(b.lhs.abs() < 1e-12 && b.rhs.abs() < 1e-12);
            }
        }
    }
}

#[test]
fn metrics_invariant_under_record_permutation() {
    for seed in 0..30 {
        let out = generate(&small_spec(seed)).unwrap();
        let shuffled = shuffled_records(&out.matrix, seed);
        for model in out.matrix.models() {
            let a = metric_report(&out.matrix, model, 0.1).unwrap();
            let b = metric_report(&shuffled, model, 0.1).unwrap();
            assert_eq!(a.accuracy, b.accuracy);
            assert_eq!(a.mean_ig, b.mean_ig);
            assert_eq!(a.scr, b.scr);
            assert_eq!(a.per_family_failure, b.per_family_failure);
        }
    }
}

#[test]
fn coverage_never_increases_when_a_record_is_dropped() {
    for seed in 0..50 {
        let out = generate(&small_spec(seed)).unwrap();
        let records = out.matrix.records();
        let mut rng = stream_rng(seed, 0xC0FFEE, 0);
        let drop_ix = rng.gen_range(0..records.len());
        let model = records[drop_ix].model.clone();
        let kept: Vec<ResponseRecord> = records
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != drop_ix)
            .map(|(_, r)| r.clone())
            .collect();
        let reduced = ResponseMatrix::from_records(kept, None).unwrap();
        let before = out.matrix.coverage(&model).unwrap();
        let after = reduced.coverage(&model).unwrap();
        assert!(after <= before + 1e-12, "seed {seed}");
    }
}

#[test]
fn round_trip_preserves_matrix() {
    for seed in 0..20 {
        let out = generate(&small_spec(seed)).unwrap();
        let text = out.matrix.to_jsonl();
        let back = parse_records_reader(std::io::Cursor::new(text)).unwrap();
        assert_eq!(out.matrix.records(), back.records());
        assert_eq!(out.matrix.models(), back.models());
        assert_eq!(out.matrix.theorems(), back.theorems());
        assert_eq!(out.matrix.families(), back.families());
    }
}

// ------------------------------------------------------------ statistics

#[test]
fn cochran_matches_mcnemar_on_random_two_column_tables() {
    for seed in 0..500u64 {
        let mut rng = stream_rng(seed, 0xBEEF, 0);
        let n = rng.gen_range(2..40);
        let rows: Vec<Vec<bool>> = (0..n)
            .map(|_| vec![rng.gen::<f64>() < 0.6, rng.gen::<f64>() < 0.4])
            .collect();
        let q = cochran_q(&rows).unwrap();
        let m = mcnemar(&PairedCounts::from_pairs(rows.iter().map(|r| (r[0], r[1]))));
        assert!((q.statistic - m.statistic).abs() < 1e-9, "seed {seed}");
        assert_eq!(q.degenerate, m.degenerate);
    }
}

#[test]
fn bootstrap_seeds_agree_within_monte_carlo_error() {
    let values: Vec<f64> = (0..50)
        .map(|i| if i % 5 == 0 { 0.42 } else { 0.0 })
        .collect();
    let (lo_a, hi_a) = bootstrap_mean_ci(&values, 2000, 0.95, 1).unwrap();
    let (lo_b, hi_b) = bootstrap_mean_ci(&values, 2000, 0.95, 2).unwrap();
    // Quantile Monte-Carlo SE at 2000 replicates is well under 0.01 here.
    assert!((lo_a - lo_b).abs() < 0.02);
    assert!((hi_a - hi_b).abs() < 0.02);
}

#[test]
fn hoeffding_bound_dominates_empirical_error() {
    // 1000 simulations of 40 Bernoulli(0.3) draws: |phat - p| exceeds the
    // delta = 0.05 bound in at most ~5% of trials (binomial slack allowed).
    let k = 40u64;
    let bound = hoeffding_halfwidth(k, 0.05).unwrap();
    let mut exceed = 0;
    let trials = 1000;
    for t in 0..trials {
        let mut rng = stream_rng(t, 0xB0B0, 0);
        let mut sum = 0.0;
        for _ in 0..k {
            if rng.gen::<f64>() < 0.3 {
                sum += 1.0;
            }
        }
        if (sum / k as f64 - 0.3).abs() > bound {
            exceed += 1;
        }
    }
    assert!(
        exceed as f64 <= 0.05 * trials as f64 + 3.0 * (trials as f64 * 0.05 * 0.95).sqrt(),
        "exceedances {exceed}"
    );
}

// ------------------------------------------------------------ audit

#[test]
fn threshold_monotonicity_of_flags() {
    for seed in 0..40 {
        let spec = SynthSpec {
            n_planted_bad: 4,
            bad_item_failure_prob: 0.9,
            ..SynthSpec::uniform(7, 15, &Family::ALL[..4], 0.15, seed)
        };
        let out = generate(&spec).unwrap();
        let mut previous: Option<BTreeSet<String>> = None;
        for threshold in (1..=7).rev() {
            let ids =
                unanimity_flags(&out.matrix, threshold, Denominator::Eligible).flagged_item_ids();
            if let Some(higher) = previous {
                assert!(
                    higher.is_subset(&ids),
                    "seed {seed}: flags at {} not within flags at {threshold}",
                    threshold + 1
                );
            }
            previous = Some(ids);
        }
    }
}

#[test]
fn clean_matrices_rarely_flag_anything() {
    // No planted items, 10% independent error: the false-positive rate at
    // 6-of-9 stays below the binomial-tail ceiling.
    let mut items = 0u64;
    let mut flagged = 0u64;
    for seed in 0..100 {
        let spec = SynthSpec::uniform(9, 12, &Family::ALL[..5], 0.10, seed);
        let out = generate(&spec).unwrap();
        let flags = unanimity_flags(&out.matrix, 6, Denominator::Eligible);
        flagged += flags.flagged().count() as u64;
        items += out
            .matrix
            .items()
            .iter()
            .filter(|it| !it.family.is_canonical())
            .count() as u64;
    }
    let ceiling = condorcet_tail(9, 6, 0.10).unwrap();
    let rate = flagged as f64 / items as f64;
    assert!(
        rate <= ceiling + 3.0 * (ceiling / items as f64).sqrt() + 1e-6,
        "fp rate {rate} above ceiling {ceiling}"
    );
}

#[test]
fn audit_impact_conserves_item_counts() {
    for seed in 0..20 {
        let spec = SynthSpec {
            n_planted_bad: 3,
            bad_item_failure_prob: 1.0,
            ..SynthSpec::uniform(4, 10, &Family::ALL[..3], 0.2, seed)
        };
        let out = generate(&spec).unwrap();
        let removed = out.planted.clone();
        let reduced = out.matrix.without_items(&removed).unwrap();
        for model in out.matrix.models() {
            let count =
                |m: &ResponseMatrix| m.model_records(model).filter(|r| r.is_correct()).count();
            let removed_correct = out
                .matrix
                .model_records(model)
                .filter(|r| removed.contains(&r.item_id) && r.is_correct())
                .count();
            assert_eq!(count(&out.matrix), count(&reduced) + removed_correct);
        }
    }
}

#[test]
fn removing_items_everyone_answers_correctly_never_lowers_scr() {
    for seed in 0..40 {
        let out = generate(&small_spec(seed)).unwrap();
        // pick paraphrase items answered correctly by every model
        let all_correct: BTreeSet<String> = out
            .matrix
            .items()
            .iter()
            .filter(|it| !it.family.is_canonical())
            .filter(|it| {
                out.matrix.models().iter().all(|m| {
                    out.matrix
                        .record_for(m, &it.item_id)
                        .map(|r| r.is_correct())
                        .unwrap_or(false)
                })
            })
            .map(|it| it.item_id.clone())
            .take(3)
            .collect();
        if all_correct.is_empty() {
            continue;
        }
        match audit_impact(&out.matrix, &all_correct) {
            Ok(rows) => {
                for r in rows {
                    assert!(
                        r.scr_without >= r.scr_with - 1e-12,
                        "seed {seed} model {}",
                        r.model
                    );
                }
            }
            Err(Error::EmptyMatrix) => {}
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
}

// ------------------------------------------------------------ selection

#[test]
fn dominance_blocks_reversals_and_inverted_rankings() {
    for seed in 0..200u64 {
        let mut rng = stream_rng(seed, 0xABCD, 0);
        let fams = &Family::ALL[..rng.gen_range(2..=6)];
        // B's failure is A's plus a nonnegative bump: A dominates B unless equal.
        let a_prof: FamilyProfile = fams.iter().map(|&f| (f, rng.gen_range(0.0..0.5))).collect();
        let mut strictly = false;
        let b_prof: FamilyProfile = a_prof
            .iter()
            .map(|(&f, &v)| {
                let bump = if rng.gen::<f64>() < 0.7 {
                    strictly = true;
                    rng.gen_range(0.01..0.3)
                } else {
                    0.0
                };
                (f, v + bump)
            })
            .collect();
        if !strictly {
            continue;
        }
        let mut failures = ModelProfiles::new();
        failures.insert("a".into(), a_prof.clone());
        failures.insert("b".into(), b_prof.clone());

        let pareto = pareto_dominators(&failures);
        assert!(pareto
            .dominance
            .contains(&("a".to_string(), "b".to_string())));

        let mut acc = ModelProfiles::new();
        for (m, prof) in &failures {
            acc.insert(m.clone(), prof.iter().map(|(f, v)| (*f, 1.0 - v)).collect());
        }
        assert!(find_reversal_pairs(&acc, "a", "b").unwrap().is_empty());

        // Success-rate rows: B above A is unrealizable.
        match nfb_weights(&acc, &["b".into(), "a".into()], 1e-6).unwrap() {
            NfbOutcome::Infeasible { pair, .. } => {
                assert_eq!(pair, ("b".to_string(), "a".to_string()));
            }
            NfbOutcome::Feasible { .. } => panic!("seed {seed}: dominated ranking accepted"),
        }
    }
}

#[test]
fn nfb_outputs_are_verified_and_deterministic() {
    for seed in 0..100u64 {
        let mut rng = stream_rng(seed, 0x5EED, 0);
        let n_models = rng.gen_range(2..=5);
        let fams = &Family::ALL[..rng.gen_range(2..=6)];
        let mut scr = ModelProfiles::new();
        for i in 0..n_models {
            scr.insert(
                format!("m{i}"),
                fams.iter()
                    .map(|&f| (f, rng.gen_range(0.3..0.95)))
                    .collect(),
            );
        }
        let mut ranking: Vec<String> = scr.keys().cloned().collect();
        for i in (1..ranking.len()).rev() {
            let j = rng.gen_range(0..=i);
            ranking.swap(i, j);
        }
        let a = nfb_weights(&scr, &ranking, 1e-6).unwrap();
        let b = nfb_weights(&scr, &ranking, 1e-6).unwrap();
        match (&a, &b) {
            (
                NfbOutcome::Feasible {
                    weights: wa,
                    margin: ma,
                },
                NfbOutcome::Feasible {
                    weights: wb,
                    margin: mb,
                },
            ) => {
                assert_eq!(wa.weights, wb.weights);
                assert_eq!(ma, mb);
                assert!(wa.validate());
                for pair in ranking.windows(2) {
                    let hi = wa.score(&scr[&pair[0]]);
                    let lo = wa.score(&scr[&pair[1]]);
                    assert!(hi - lo >= 1e-6 - 1e-12, "seed {seed}");
                }
            }
            (NfbOutcome::Infeasible { pair: pa, .. }, NfbOutcome::Infeasible { pair: pb, .. }) => {
                assert_eq!(pa, pb)
            }
            _ => panic!("seed {seed}: nondeterministic outcome"),
        }
    }
}

#[test]
fn reversal_pairs_match_brute_force_enumeration() {
    for seed in 0..100u64 {
        let mut rng = stream_rng(seed, 0x7777, 0);
        let fams = &Family::ALL[..rng.gen_range(2..=8)];
        let mut acc = ModelProfiles::new();
        for m in ["a", "b"] {
            acc.insert(
                m.into(),
                fams.iter().map(|&f| (f, rng.gen_range(0.4..1.0))).collect(),
            );
        }
        let got = find_reversal_pairs(&acc, "a", "b").unwrap();
        // brute force over ordered family pairs
        let mut expected = 0usize;
        for (i, &fi) in fams.iter().enumerate() {
            for &fj in &fams[i + 1..] {
                let di = acc["a"][&fi] - acc["b"][&fi];
                let dj = acc["a"][&fj] - acc["b"][&fj];
                if di * dj < 0.0 {
                    expected += 1;
                }
            }
        }
        assert_eq!(got.len(), expected, "seed {seed}");
    }
}

#[test]
fn synth_planted_votes_separate_from_clean_votes() {
    let mut separated = 0;
    let trials = 60;
    for seed in 0..trials {
        let spec = SynthSpec {
            n_planted_bad: 5,
            bad_item_failure_prob: 0.95,
            ..SynthSpec::uniform(9, 20, &Family::ALL[..5], 0.08, seed)
        };
        let out = generate(&spec).unwrap();
        let flags = unanimity_flags(&out.matrix, 1, Denominator::TotalModels);
        let vote = |id: &str| {
            flags
                .flags
                .iter()
                .find(|f| f.item_id == id)
                .map(|f| f.fail_votes)
                .unwrap_or(0)
        };
        let min_planted = out.planted.iter().map(|p| vote(p)).min().unwrap();
        let max_clean = out
            .matrix
            .items()
            .iter()
            .filter(|it| !it.family.is_canonical() && !out.planted.contains(&it.item_id))
            .map(|it| vote(&it.item_id))
            .max()
            .unwrap();
        if min_planted > 6 && max_clean <= 6 {
            separated += 1;
        }
    }
    assert!(
        separated as f64 >= 0.9 * trials as f64,
        "separated {separated}/{trials}"
    );
}
