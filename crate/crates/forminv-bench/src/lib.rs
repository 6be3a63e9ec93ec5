//! Shared setup helpers for the benchmark suite.

use forminv::{Family, SynthSpec};

/// A benchmark-scale spec: 9 models, 103 theorems, all 8 families.
pub fn bench_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        n_planted_bad: 8,
        bad_item_failure_prob: 0.9,
        ..SynthSpec::uniform(9, 103, &Family::ALL, 0.08, seed)
    }
}
