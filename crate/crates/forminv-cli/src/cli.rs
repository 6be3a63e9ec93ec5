//! Command-line surface: argument parsing, subcommand dispatch, output
//! emission, and exit-code policy.
//!
//! Exit codes: 0 success; 2 validation error (bad flags, malformed input,
//! manifest mismatch); 3 degenerate or infeasible result where the
//! subcommand's contract demands one (no realizable weighting, no model
//! covering the requested families, removal emptying the matrix).

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use forminv::{
    audit_impact, audit_operating_point, build_report, nfb_weights, per_family_failure,
    per_family_scr, render_audit_markdown, render_csv, render_json, render_markdown, select_model,
    unanimity_flags, verify_manifest, DatasetManifest, Denominator, Family, ItemFamily,
    ManifestCheck, ModelProfiles, NfbOutcome, ResponseMatrix, SynthSpec,
};

use crate::cache::{load_matrix, Cache};

pub const ENV_CACHE_DIR: &str = "FORMINV_CACHE_DIR";
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Markdown,
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "forminv",
    version,
    about = "Semantic-invariance measurement over paraphrase equivalence classes",
    long_about = "Computes invariance metrics from response record files, runs the \
                  cross-model unanimity audit, recommends models per paraphrase-family \
                  profile, and searches family weightings that realize target rankings. \
                  All commands replay already-collected record files; no model APIs are \
                  called."
)]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Output format for the primary report.
    #[arg(long, global = true, value_enum, default_value = "markdown")]
    pub format: Format,

    /// Write the primary output to this path (a machine-readable .json
    /// sidecar is written next to it); default is stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Directory for the content-addressed parse cache. Defaults to
    /// FORMINV_CACHE_DIR when set; caching is off when neither is given.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,

    /// Disable the parse cache even when a directory is configured.
    #[arg(long, global = true)]
    pub no_cache: bool,

    /// Seed for randomized routines (bootstrap, simulation).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a record file through the metric pipeline and emit per-model
    /// metric bundles.
    Eval {
        #[arg(long)]
        input: PathBuf,
        /// Verify the record file against this manifest before computing.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Threshold for the Hi-IG% statistic.
        #[arg(long, default_value_t = 0.10)]
        hi_ig: f64,
    },
    /// Emit the full report: model table, family failure table, and the
    /// accuracy-vs-gap correlation block.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 0.10)]
        hi_ig: f64,
    },
    /// Flag paraphrases failed by many models that pass the canonical, and
    /// rank models before/after removing the flagged items.
    Audit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Fail-vote quota for flagging.
        #[arg(long, default_value_t = 6)]
        threshold: usize,
        /// Vote denominator: scale the quota to eligible models, or keep it
        /// absolute.
        #[arg(long, value_enum, default_value = "eligible")]
        denominator: DenominatorArg,
    },
    /// Recommend the model with the lowest expected failure rate on the
    /// requested paraphrase families.
    Selector {
        #[arg(long)]
        input: PathBuf,
        /// Family names (syntactic, quantifier, passive, notation,
        /// connective, order, unpack, equiv) or codes (F1..F8).
        #[arg(long, num_args = 1.., required = true)]
        families: Vec<String>,
        /// Optional per-family weights, parallel to --families.
        #[arg(long, num_args = 1..)]
        weights: Option<Vec<f64>>,
    },
    /// Find a family weighting on the simplex under which the weighted
    /// per-family consistency scores realize the given model ranking.
    Nfb {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated model ids, best first.
        #[arg(long)]
        ranking: String,
        /// Minimum acceptable score gap between consecutive ranked models.
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
    },
    /// Generate synthetic matrices with planted bad paraphrases and report
    /// the audit's recall/precision/false-positive rate over many seeds.
    Simulate {
        #[arg(long, default_value_t = 9)]
        n_models: usize,
        #[arg(long, default_value_t = 50)]
        n_theorems: usize,
        #[arg(long, default_value_t = 8)]
        n_families: usize,
        /// Per-model per-family failure rate on clean items.
        #[arg(long, default_value_t = 0.10)]
        clean_failure: f64,
        /// Probability each model fails a planted bad item.
        #[arg(long, default_value_t = 0.875)]
        bad_failure: f64,
        #[arg(long, default_value_t = 10)]
        planted: usize,
        /// Probability a model copies the shared per-item error draw.
        #[arg(long, default_value_t = 0.0)]
        correlation: f64,
        #[arg(long, default_value_t = 6)]
        threshold: usize,
        #[arg(long, default_value_t = 100)]
        n_seeds: u64,
        /// Also write the first seed's generated matrix as a record file
        /// (planted item ids go to a .planted.json sidecar).
        #[arg(long)]
        emit_records: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DenominatorArg {
    Eligible,
    Total,
}

impl From<DenominatorArg> for Denominator {
    fn from(d: DenominatorArg) -> Denominator {
        match d {
            DenominatorArg::Eligible => Denominator::Eligible,
            DenominatorArg::Total => Denominator::TotalModels,
        }
    }
}

/// Parse arguments from the process environment and run.
pub fn run_main() -> i32 {
    let config = CliConfig::parse();
    run(&config)
}

pub fn run(config: &CliConfig) -> i32 {
    match execute(config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_VALIDATION
        }
    }
}

fn execute(config: &CliConfig) -> anyhow::Result<i32> {
    match &config.command {
        Command::Eval {
            input,
            manifest,
            hi_ig,
        } => {
            check_manifest(manifest.as_deref(), input)?;
            let matrix = load(config, input)?;
            let report = build_report(&matrix, *hi_ig)?;
            let primary = match config.format {
                Format::Markdown => {
                    let mut out = String::from("# Per-model metrics\n\n");
                    out.push_str(&model_table(&report));
                    out
                }
                Format::Csv => render_csv(&report),
                Format::Json => render_json(&report.models),
            };
            emit(config, &primary, &report.models)?;
            Ok(EXIT_OK)
        }
        Command::Report {
            input,
            manifest,
            hi_ig,
        } => {
            check_manifest(manifest.as_deref(), input)?;
            let matrix = load(config, input)?;
            let report = build_report(&matrix, *hi_ig)?;
            let primary = match config.format {
                Format::Markdown => render_markdown(&report),
                Format::Csv => render_csv(&report),
                Format::Json => render_json(&report),
            };
            emit(config, &primary, &report)?;
            Ok(EXIT_OK)
        }
        Command::Audit {
            input,
            manifest,
            threshold,
            denominator,
        } => {
            check_manifest(manifest.as_deref(), input)?;
            let matrix = load(config, input)?;
            if matrix.is_empty() {
                return Err(forminv::Error::EmptyMatrix.into());
            }
            let outcome = unanimity_flags(&matrix, *threshold, (*denominator).into());
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            let removed = outcome.flagged_item_ids();
            let impact = if removed.is_empty() {
                Vec::new()
            } else {
                match audit_impact(&matrix, &removed) {
                    Ok(rows) => rows,
                    Err(forminv::Error::EmptyMatrix) => {
                        eprintln!("error: removing every flagged item empties the matrix");
                        return Ok(EXIT_DEGENERATE);
                    }
                    Err(e) => return Err(e.into()),
                }
            };
            #[derive(Serialize)]
            struct AuditReport<'a> {
                outcome: &'a forminv::AuditOutcome,
                impact: &'a [forminv::ImpactRow],
            }
            let sidecar = AuditReport {
                outcome: &outcome,
                impact: &impact,
            };
            let primary = match config.format {
                Format::Markdown => render_audit_markdown(&outcome, &impact),
                Format::Csv => impact_csv(&impact),
                Format::Json => render_json(&sidecar),
            };
            emit(config, &primary, &sidecar)?;
            Ok(EXIT_OK)
        }
        Command::Selector {
            input,
            families,
            weights,
        } => {
            let fams = parse_families(families)?;
            let matrix = load(config, input)?;
            let mut profiles = ModelProfiles::new();
            for model in matrix.models() {
                profiles.insert(model.clone(), per_family_failure(&matrix, model)?.0);
            }
            match select_model(&profiles, &fams, weights.as_deref()) {
                Ok(rec) => {
                    let mut primary = String::new();
                    for (i, (model, failure)) in rec.ranking.iter().enumerate() {
                        let marker = if i == 0 { "\u{2192} " } else { "  " };
                        primary
                            .push_str(&format!("{marker}{model} {}\n", forminv::fmt_pct(*failure)));
                    }
                    for m in &rec.excluded {
                        primary.push_str(&format!("  (excluded {m}: missing family data)\n"));
                    }
                    if config.format == Format::Json {
                        emit(config, &render_json(&rec), &rec)?;
                    } else {
                        emit(config, &primary, &rec)?;
                    }
                    Ok(EXIT_OK)
                }
                Err(forminv::Error::InvalidArgument(msg)) if msg.contains("no model covers") => {
                    eprintln!("error: {msg}");
                    Ok(EXIT_DEGENERATE)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Nfb {
            input,
            ranking,
            epsilon,
        } => {
            let target: Vec<String> = ranking
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            let matrix = load(config, input)?;
            let mut scr = ModelProfiles::new();
            for model in matrix.models() {
                scr.insert(model.clone(), per_family_scr(&matrix, model)?);
            }
            let outcome = nfb_weights(&scr, &target, *epsilon)?;
            match &outcome {
                NfbOutcome::Feasible { weights, margin } => {
                    let mut primary = String::from("feasible weighting:\n");
                    for (fam, w) in &weights.weights {
                        primary.push_str(&format!("  {:<12} {w:.6}\n", fam.name()));
                    }
                    primary.push_str(&format!("margin: {margin:.6}\n"));
                    if config.format == Format::Json {
                        emit(config, &render_json(&outcome), &outcome)?;
                    } else {
                        emit(config, &primary, &outcome)?;
                    }
                    Ok(EXIT_OK)
                }
                NfbOutcome::Infeasible { pair, margin } => {
                    let primary = format!(
                        "infeasible: no simplex weighting separates {} above {} \
                         (best margin {margin:.3e})\n",
                        pair.0, pair.1
                    );
                    if config.format == Format::Json {
                        emit(config, &render_json(&outcome), &outcome)?;
                    } else {
                        emit(config, &primary, &outcome)?;
                    }
                    Ok(EXIT_DEGENERATE)
                }
            }
        }
        Command::Simulate {
            n_models,
            n_theorems,
            n_families,
            clean_failure,
            bad_failure,
            planted,
            correlation,
            threshold,
            n_seeds,
            emit_records,
        } => {
            if *n_families == 0 || *n_families > Family::ALL.len() {
                return Err(anyhow!("n-families must be between 1 and 8"));
            }
            let spec = SynthSpec {
                n_planted_bad: *planted,
                bad_item_failure_prob: *bad_failure,
                correlation: *correlation,
                ..SynthSpec::uniform(
                    *n_models,
                    *n_theorems,
                    &Family::ALL[..*n_families],
                    *clean_failure,
                    config.seed,
                )
            };
            if let Some(path) = emit_records {
                let out = forminv::generate(&spec)?;
                out.matrix.write_jsonl(path)?;
                let planted_path = path.with_extension("planted.json");
                std::fs::write(&planted_path, render_json(&out.planted))
                    .with_context(|| format!("writing {}", planted_path.display()))?;
            }
            let op = audit_operating_point(&spec, *threshold, *n_seeds)?;
            let primary = format!(
                "recall: {:.4}\nprecision: {:.4}\nfp_rate: {:.6}\nseeds: {}\n",
                op.recall, op.precision, op.fp_rate, op.seeds
            );
            if config.format == Format::Json {
                emit(config, &render_json(&op), &op)?;
            } else {
                emit(config, &primary, &op)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn check_manifest(manifest: Option<&Path>, input: &Path) -> anyhow::Result<()> {
    let Some(path) = manifest else { return Ok(()) };
    let manifest = DatasetManifest::from_path(path)?;
    match verify_manifest(&manifest, input)? {
        ManifestCheck::Ok => Ok(()),
        ManifestCheck::DigestMismatch { expected, actual } => Err(anyhow!(
            "manifest digest mismatch: expected {expected}, file has {actual}"
        )),
        ManifestCheck::CountMismatch { expected, actual } => Err(anyhow!(
            "manifest item count mismatch: expected {expected}, file has {actual}"
        )),
    }
}

fn load(config: &CliConfig, input: &Path) -> anyhow::Result<ResponseMatrix> {
    let dir = config
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os(ENV_CACHE_DIR).map(PathBuf::from));
    let mut cache = match dir {
        Some(dir) if !config.no_cache => match Cache::open(&dir) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("warning: cache directory {} unusable: {e}", dir.display());
                None
            }
        },
        _ => None,
    };
    let (matrix, _) = load_matrix(input, cache.as_mut())
        .with_context(|| format!("reading {}", input.display()))?;
    if let Some(cache) = cache.as_mut() {
        for w in cache.take_warnings() {
            eprintln!("warning: {w}");
        }
    }
    Ok(matrix)
}

/// Write the primary output to --out (with a .json sidecar) or stdout.
fn emit<T: Serialize>(config: &CliConfig, primary: &str, sidecar: &T) -> anyhow::Result<()> {
    match &config.out {
        None => {
            print!("{primary}");
            Ok(())
        }
        Some(path) => {
            std::fs::write(path, primary).with_context(|| format!("writing {}", path.display()))?;
            let sidecar_path = path.with_extension("json");
            if sidecar_path != *path {
                std::fs::write(&sidecar_path, render_json(sidecar))
                    .with_context(|| format!("writing {}", sidecar_path.display()))?;
            }
            Ok(())
        }
    }
}

fn parse_families(names: &[String]) -> anyhow::Result<Vec<Family>> {
    let mut fams = Vec::new();
    for name in names {
        match ItemFamily::parse(name) {
            Some(ItemFamily::Paraphrase(f)) => fams.push(f),
            _ => {
                return Err(anyhow!(
                    "unknown family {name:?} (valid: {})",
                    Family::valid_names()
                ))
            }
        }
    }
    Ok(fams)
}

fn model_table(report: &forminv::FullReport) -> String {
    let mut out =
        String::from("| Model | Tier | Accuracy | Mean IG | SCR |\n|---|---|---:|---:|---:|\n");
    for m in &report.models {
        out.push_str(&format!(
            "| {} | - | {} | {} | {} |\n",
            m.model,
            forminv::fmt_pct(m.accuracy),
            forminv::fmt_pct(m.mean_ig),
            forminv::fmt_pct(m.scr)
        ));
    }
    out
}

fn impact_csv(impact: &[forminv::ImpactRow]) -> String {
    let mut out = String::from(
        "model,scr_with,scr_without,accuracy_with,accuracy_without,rank_with,rank_without,rank_delta\n",
    );
    let mut rows: Vec<&forminv::ImpactRow> = impact.iter().collect();
    rows.sort_by_key(|r| r.rank_with);
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.model,
            r.scr_with,
            r.scr_without,
            r.accuracy_with,
            r.accuracy_without,
            r.rank_with,
            r.rank_without,
            r.rank_delta
        ));
    }
    out
}
