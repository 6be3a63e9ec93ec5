//! Measurement toolkit for semantic invariance of binary model verdicts over
//! paraphrase equivalence classes.
//!
//! Given response records (one model verdict per theorem paraphrase), the
//! crate computes per-theorem invariance gaps and the aggregate metric suite
//! (accuracy, Mean-IG, RMS-IG, SCR, Hi-IG%), runs paired binary significance
//! tests (McNemar, Cochran's Q with a permutation-exact option, Fleiss's
//! kappa, bootstrap intervals, rank correlations), flags semantically
//! suspect paraphrases via cross-model unanimity, quantifies the ranking
//! impact of removing them, recommends models per family profile, and
//! searches the family simplex for weightings that realize target rankings.
//!
//! The [`synth`] module generates matrices with known ground truth and
//! serves as the oracle for the audit and metric test suites.

// Error values carry full context strings; they are built on cold paths only.
#![allow(clippy::result_large_err)]

pub mod audit;
pub mod data;
pub mod error;
pub mod lp;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod selection;
pub mod special;
pub mod stats;
pub mod synth;

pub use audit::{
    audit_impact, bft_tolerance, condorcet_tail, unanimity_flags, unanimous_posterior, AuditFlag,
    AuditOutcome, Denominator, ImpactRow, Severity, ThresholdTheoryReport,
};
pub use data::{
    parse_records, parse_records_reader, sha256_hex, verify_manifest, DatasetManifest, Family,
    Item, ItemFamily, ManifestCheck, ResponseMatrix, ResponseRecord, Tier,
};
pub use error::{Error, Result};
pub use metrics::{
    balanced_accuracy_and_bias, check_error_bound, check_reversal_condition, invariance_gap,
    metric_report, per_family_failure, per_family_scr, theorem_profile, theorem_profiles,
    BalancedAccuracy, ErrorBoundCheck, MetricReport, ReversalCheck, TheoremProfile,
};
pub use report::{
    build_report, fmt_pct, render_audit_markdown, render_csv, render_json, render_markdown,
    FullReport,
};
pub use selection::{
    find_reversal_pairs, nfb_weights, pareto_dominators, select_model, FamilyProfile,
    ModelProfiles, NfbOutcome, ParetoResult, ReversalPair, SelectorRecommendation, WeightVector,
};
pub use stats::{
    bonferroni, bootstrap_mean_ci, bootstrap_mean_ig_ci, cochran_q, cochran_q_exact, fleiss_kappa,
    hoeffding_halfwidth, mcnemar, rank_correlations, scr_ci_halfwidth, FleissKappa, PairedCounts,
    RankCorrelations, TestMethod, TestResult,
};
pub use synth::{audit_operating_point, generate, OperatingPoint, SynthOutput, SynthSpec};
