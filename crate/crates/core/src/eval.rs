//! Evaluation of generated chains against reference statistics: per-dimension
//! JSD, group slices, per-activity timing, joint participation rates and the
//! consistency audit. Also the paired ablation runner and plot-data export.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ActivityType, AgentId, SocioProfile, TAG_STUDENT, TAG_WORKER};
use crate::household::{audit_consistency, AuditSummary, ConsistencyAudit};
use crate::pipeline::{
    make_backend, read_chain_store, run_generation, OutputPaths, PipelineError, RunConfig, RunManifest,
    SampledHousehold,
};
use crate::prompt::FewShotPool;
use crate::record::ChainRecord;
use crate::stats::{
    chains_to_stats, jsd, jsd_bernoulli, Dimension, DivergenceError, Histogram, ReferenceStats,
    RelationPair, StatsBundle, StatsError,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const PLOT_HEADER: &str = "bin_label,reference,generated";
pub const REPORT_FILE: &str = "report.json";
pub const PLOTS_DIR: &str = "plots";

/// Activity types with timing slices unless all types are requested.
pub const TIMING_TYPES: [ActivityType; 3] =
    [ActivityType::Home, ActivityType::Work, ActivityType::BuyMeals];
/// Group slices reported when both sides have them.
pub const SLICE_TAGS: [&str; 2] = [TAG_STUDENT, TAG_WORKER];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("chain store is empty")]
    EmptyStore,
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingJsd {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub chains: u64,
    pub activities: u64,
    pub jsd_by_dimension: BTreeMap<Dimension, f64>,
    /// Same dimensions restricted to owners carrying a group tag.
    pub slices: BTreeMap<String, BTreeMap<Dimension, f64>>,
    /// Keyed by activity code. Types absent on either side are left out.
    pub per_activity_timing: BTreeMap<ActivityType, TimingJsd>,
    /// Bernoulli JSD of participation rates, per relation pair and activity
    /// code. Pairs or types with no eligible activities on either side are
    /// left out.
    pub joint_rate_jsd: BTreeMap<RelationPair, BTreeMap<ActivityType, f64>>,
    pub consistency: AuditSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub tolerance: u16,
    /// Timing slices for every activity type, not just [`TIMING_TYPES`].
    pub all_timing_types: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            tolerance: crate::household::DEFAULT_TOLERANCE,
            all_timing_types: false,
        }
    }
}

/// Everything `evaluate` derives, kept together for plot export.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub generated: ReferenceStats,
    pub audit: ConsistencyAudit,
}

fn hist_jsd(reference: &Histogram, generated: &Histogram) -> Result<Option<f64>, EvalError> {
    if reference.total() == 0 || generated.total() == 0 {
        return Ok(None);
    }
    Ok(Some(jsd(&reference.distribution()?, &generated.distribution()?)?))
}

fn dimension_jsd(reference: &StatsBundle, generated: &StatsBundle) -> Result<BTreeMap<Dimension, f64>, EvalError> {
    let mut out = BTreeMap::new();
    for dim in Dimension::ALL {
        if let Some(v) = hist_jsd(reference.dimension(dim), generated.dimension(dim))? {
            out.insert(dim, v);
        }
    }
    Ok(out)
}

fn timing_types(options: &EvalOptions) -> &'static [ActivityType] {
    if options.all_timing_types {
        &ActivityType::ALL
    } else {
        &TIMING_TYPES
    }
}

/// Compares a generated chain store with reference statistics.
pub fn evaluate(
    records: &[ChainRecord],
    profiles: &HashMap<AgentId, SocioProfile>,
    reference: &ReferenceStats,
    options: &EvalOptions,
) -> Result<Evaluation, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyStore);
    }
    let generated = chains_to_stats(records, profiles)?;
    let (r, g) = (&reference.overall, &generated.overall);

    let mut slices = BTreeMap::new();
    for tag in SLICE_TAGS {
        if let (Some(rb), Some(gb)) = (reference.per_group.get(tag), generated.per_group.get(tag)) {
            slices.insert(tag.to_string(), dimension_jsd(rb, gb)?);
        }
    }

    let mut per_activity_timing = BTreeMap::new();
    for &t in timing_types(options) {
        let (rt, gt) = (r.timing(t), g.timing(t));
        if let (Some(start), Some(end)) = (
            hist_jsd(&rt.start_hist, &gt.start_hist)?,
            hist_jsd(&rt.end_hist, &gt.end_hist)?,
        ) {
            per_activity_timing.insert(t, TimingJsd { start, end });
        }
    }

    let mut joint_rate_jsd = BTreeMap::new();
    for pair in RelationPair::ALL {
        let per_type: BTreeMap<ActivityType, f64> = ActivityType::ALL
            .iter()
            .filter_map(|&t| {
                let a = r.joint_rate(pair, t)?;
                let b = g.joint_rate(pair, t)?;
                Some((t, jsd_bernoulli(a, b)))
            })
            .collect();
        if !per_type.is_empty() {
            joint_rate_jsd.insert(pair, per_type);
        }
    }

    let audit = audit_consistency(records, options.tolerance);
    let report = EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        chains: g.chains,
        activities: g.activities,
        jsd_by_dimension: dimension_jsd(r, g)?,
        slices,
        per_activity_timing,
        joint_rate_jsd,
        consistency: audit.summary(),
    };
    Ok(Evaluation {
        report,
        generated,
        audit,
    })
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_end_matches('_').to_string()
}

fn write_panel(path: &Path, rows: &[(String, f64, f64)]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| EvalError::Stats(StatsError::Csv(e));
    w.write_record(PLOT_HEADER.split(',')).map_err(csv_err)?;
    for (label, r, g) in rows {
        w.write_record([label.as_str(), &r.to_string(), &g.to_string()])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
    fs::write(path, bytes).map_err(io_err(path))
}

fn histogram_rows(reference: &Histogram, generated: &Histogram) -> Result<Vec<(String, f64, f64)>, EvalError> {
    let (r, g) = (reference.distribution()?, generated.distribution()?);
    Ok(reference
        .labels()
        .into_iter()
        .zip(r.probabilities().iter().zip(g.probabilities()))
        .map(|(label, (&a, &b))| (label, a, b))
        .collect())
}

/// Writes one CSV per panel under `dir` and returns the written paths.
///
/// Panels mirror the report: `{dim}.csv`, `{slice}_{dim}.csv`,
/// `timing_{type}_{start|end}.csv` and `joint_{pair}.csv`. Histogram panels
/// hold normalized probabilities; joint panels hold participation rates with
/// the activity label as `bin_label`. Every JSD in the report can be
/// recomputed from these files.
pub fn emit_plot_data(
    report: &EvalReport,
    generated: &ReferenceStats,
    reference: &ReferenceStats,
    dir: &Path,
) -> Result<Vec<PathBuf>, EvalError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut emit = |name: String, rows: Vec<(String, f64, f64)>| -> Result<(), EvalError> {
        let path = dir.join(format!("{name}.csv"));
        write_panel(&path, &rows)?;
        written.push(path);
        Ok(())
    };
    let (r, g) = (&reference.overall, &generated.overall);
    for dim in report.jsd_by_dimension.keys() {
        emit(dim.name().to_string(), histogram_rows(r.dimension(*dim), g.dimension(*dim))?)?;
    }
    for (tag, dims) in &report.slices {
        let (rb, gb) = (&reference.per_group[tag], &generated.per_group[tag]);
        for dim in dims.keys() {
            emit(
                format!("{}_{}", slug(tag), dim.name()),
                histogram_rows(rb.dimension(*dim), gb.dimension(*dim))?,
            )?;
        }
    }
    for t in report.per_activity_timing.keys() {
        let (rt, gt) = (r.timing(*t), g.timing(*t));
        let name = slug(t.label());
        emit(format!("timing_{name}_start"), histogram_rows(&rt.start_hist, &gt.start_hist)?)?;
        emit(format!("timing_{name}_end"), histogram_rows(&rt.end_hist, &gt.end_hist)?)?;
    }
    for (pair, per_type) in &report.joint_rate_jsd {
        let rows = per_type
            .keys()
            .map(|&t| {
                let a = r.joint_rate(*pair, t).expect("rate present in report");
                let b = g.joint_rate(*pair, t).expect("rate present in report");
                (t.label().to_string(), a, b)
            })
            .collect();
        emit(format!("joint_{}", slug(pair.label())), rows)?;
    }
    Ok(written)
}

/// Writes `report.json` and the `plots/` directory into `dir`.
pub fn write_report(evaluation: &Evaluation, reference: &ReferenceStats, dir: &Path) -> Result<(), EvalError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(REPORT_FILE);
    crate::pipeline::write_json_atomic(&path, &evaluation.report)?;
    emit_plot_data(&evaluation.report, &evaluation.generated, reference, &dir.join(PLOTS_DIR))?;
    Ok(())
}

/// Which switches the "without" arm of an ablation turns off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ablate {
    Feedback,
    Reconcile,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationArm {
    pub feedback_enabled: bool,
    pub reconcile_enabled: bool,
    pub report: EvalReport,
    pub committed: u64,
    pub skipped: u64,
    pub repairs: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub schema_version: u32,
    pub ablate: Ablate,
    pub seed: u64,
    pub with: AblationArm,
    pub without: AblationArm,
    /// `without - with` per dimension; positive means the full pipeline is
    /// closer to the reference.
    pub jsd_delta: BTreeMap<Dimension, f64>,
    /// `with - without` consistency rate.
    pub consistency_delta: f64,
}

/// Runs the pipeline twice on the same households and seed, once as
/// configured with feedback and reconciliation on and once with the ablated
/// switches off, then evaluates both. Arms are written to `out/with` and
/// `out/without`, each with its own report.
pub fn run_ablation(
    config: &RunConfig,
    ablate: Ablate,
    households: &[SampledHousehold],
    reference: Arc<ReferenceStats>,
    pool: &FewShotPool,
    out: &Path,
) -> Result<AblationReport, EvalError> {
    let with_cfg = RunConfig {
        feedback_enabled: true,
        reconcile_enabled: true,
        ..config.clone()
    };
    let without_cfg = RunConfig {
        feedback_enabled: ablate == Ablate::Reconcile,
        reconcile_enabled: ablate == Ablate::Feedback,
        ..config.clone()
    };
    let profiles: HashMap<AgentId, SocioProfile> = households
        .iter()
        .flat_map(|h| h.household.members.iter().map(|p| (p.agent_id.clone(), p.clone())))
        .collect();
    let options = EvalOptions {
        tolerance: config.tolerance,
        all_timing_types: false,
    };

    let arm = |cfg: &RunConfig, name: &str| -> Result<AblationArm, EvalError> {
        let paths = OutputPaths::new(out.join(name));
        let backend = make_backend(cfg, reference.clone())?;
        let manifest: RunManifest = run_generation(cfg, households, &reference, pool, backend.as_ref(), &paths)?;
        let records = read_chain_store(&paths.chains())?;
        let evaluation = evaluate(&records, &profiles, &reference, &options)?;
        write_report(&evaluation, &reference, &paths.dir)?;
        Ok(AblationArm {
            feedback_enabled: cfg.feedback_enabled,
            reconcile_enabled: cfg.reconcile_enabled,
            report: evaluation.report,
            committed: manifest.counts.committed,
            skipped: manifest.counts.skipped,
            repairs: manifest.counts.repairs,
        })
    };
    let with = arm(&with_cfg, "with")?;
    let without = arm(&without_cfg, "without")?;

    let jsd_delta = with
        .report
        .jsd_by_dimension
        .iter()
        .filter_map(|(d, w)| without.report.jsd_by_dimension.get(d).map(|wo| (*d, wo - w)))
        .collect();
    let consistency_delta =
        with.report.consistency.consistency_rate - without.report.consistency.consistency_rate;
    let report = AblationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        ablate,
        seed: config.seed,
        with,
        without,
        jsd_delta,
        consistency_delta,
    };
    crate::pipeline::write_json_atomic(&out.join("ablation.json"), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roster::profile_index;
    use crate::synthetic::{generate_diary, generate_population, DiaryVariant};

    fn diary_records(variant: DiaryVariant, seed: u64) -> (Vec<ChainRecord>, HashMap<AgentId, SocioProfile>) {
        let pop = generate_population(30, 75, 5, "e");
        let diary = generate_diary(&pop, variant, seed);
        let records = diary
            .chains
            .iter()
            .map(|o| ChainRecord::from_chain(&o.chain, &o.household_id))
            .collect();
        (records, profile_index(&pop))
    }

    #[test]
    fn self_comparison_is_zero() {
        let (records, profiles) = diary_records(DiaryVariant::Survey, 1);
        let reference = chains_to_stats(&records, &profiles).unwrap();
        let ev = evaluate(&records, &profiles, &reference, &EvalOptions::default()).unwrap();
        assert_eq!(ev.report.jsd_by_dimension.len(), 5);
        assert!(ev.report.jsd_by_dimension.values().all(|&v| v == 0.0));
        assert!(ev.report.slices.values().flat_map(|m| m.values()).all(|&v| v == 0.0));
        assert!(ev.report.joint_rate_jsd.values().flat_map(|m| m.values()).all(|&v| v == 0.0));
    }

    #[test]
    fn variants_differ() {
        let (a, profiles) = diary_records(DiaryVariant::Survey, 1);
        let (b, _) = diary_records(DiaryVariant::Model, 2);
        let reference = chains_to_stats(&a, &profiles).unwrap();
        let ev = evaluate(&b, &profiles, &reference, &EvalOptions::default()).unwrap();
        for v in ev.report.jsd_by_dimension.values() {
            assert!(*v > 0.0 && *v <= 1.0);
        }
    }

    #[test]
    fn empty_store() {
        let (a, profiles) = diary_records(DiaryVariant::Survey, 1);
        let reference = chains_to_stats(&a, &profiles).unwrap();
        assert!(matches!(
            evaluate(&[], &profiles, &reference, &EvalOptions::default()),
            Err(EvalError::EmptyStore)
        ));
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("Drop off/Pick up"), "drop_off_pick_up");
        assert_eq!(slug("head-spouse"), "head_spouse");
    }
}
