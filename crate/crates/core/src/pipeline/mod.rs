//! End-to-end generation: sample agents, then for every household and every
//! member in coordination order run
//! context → guidance → prompt → backend → parse (with corrective retries)
//! → reconcile → feedback update → commit.
//!
//! Households are processed in waves of `concurrency`. Every household in a
//! wave sees the same feedback snapshot (plus its own members' chains), and
//! results are committed in roster order, so output does not depend on
//! thread timing. A checkpoint after each wave lets an interrupted run
//! resume where it stopped.

mod sample;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ActivityChain, AgentId, HouseholdId};
use crate::feedback::{FeedbackState, DEFAULT_EPSILON, DEFAULT_WARMUP};
use crate::gateway::{
    parse_completion, BackendConfig, ChainBackend, GatewayError, GenerationRequest, HttpBackend,
    MockBackend, MockConfig,
};
use crate::household::{
    build_context, reconcile, HouseholdContext, ReconcilePolicy, Repair, DEFAULT_REGENERATE_ATTEMPTS,
    DEFAULT_SNAP_WINDOW, DEFAULT_TOLERANCE,
};
use crate::prompt::{build_prompt, FewShotPool, PromptError, FEW_SHOT_K, TEMPLATE_VERSION};
use crate::record::ChainRecord;
use crate::stats::ReferenceStats;

pub use sample::{sample_agents, whole_roster, SampledHousehold};
pub use store::{
    read_chain_store, read_index, write_atomic, write_index, write_json_atomic, ChainWriter,
    IndexEntry, OutputPaths, CHAINS_FILE, CHECKPOINT_FILE, INDEX_FILE, MANIFEST_FILE,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("sampling: {0}")]
    Sample(String),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("chain store line {line}: {reason}")]
    Store { line: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

fn yes() -> bool {
    true
}
fn default_backend() -> BackendKind {
    BackendKind::Mock
}
fn default_tolerance() -> u16 {
    DEFAULT_TOLERANCE
}
fn default_snap_window() -> u16 {
    DEFAULT_SNAP_WINDOW
}
fn default_regenerate_attempts() -> u32 {
    DEFAULT_REGENERATE_ATTEMPTS
}
fn default_max_parse_retries() -> u32 {
    3
}
fn default_concurrency() -> usize {
    1
}
fn default_warmup() -> u64 {
    DEFAULT_WARMUP
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_backend")]
    pub backend: BackendKind,
    /// Mock settings. The run `seed` replaces `mock.seed`.
    #[serde(default)]
    pub mock: MockConfig,
    #[serde(default)]
    pub http: Option<BackendConfig>,
    #[serde(default = "yes")]
    pub feedback_enabled: bool,
    #[serde(default = "yes")]
    pub reconcile_enabled: bool,
    /// Agents to sample; the whole roster when unset.
    #[serde(default)]
    pub sample_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: u16,
    #[serde(default = "default_snap_window")]
    pub snap_window: u16,
    #[serde(default = "default_regenerate_attempts")]
    pub regenerate_attempts: u32,
    #[serde(default = "default_max_parse_retries")]
    pub max_parse_retries: u32,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_warmup")]
    pub feedback_warmup: u64,
    #[serde(default = "default_epsilon")]
    pub feedback_epsilon: f64,
    /// Stop after this many households, leaving a checkpoint behind.
    #[serde(skip)]
    pub halt_after_households: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: default_backend(),
            mock: MockConfig::default(),
            http: None,
            feedback_enabled: true,
            reconcile_enabled: true,
            sample_size: None,
            seed: 0,
            tolerance: default_tolerance(),
            snap_window: default_snap_window(),
            regenerate_attempts: default_regenerate_attempts(),
            max_parse_retries: default_max_parse_retries(),
            concurrency: default_concurrency(),
            feedback_warmup: default_warmup(),
            feedback_epsilon: default_epsilon(),
            halt_after_households: None,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<(), PipelineError> {
        if self.sample_size == Some(0) {
            return Err(PipelineError::Config("sample_size must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(PipelineError::Config("concurrency must be at least 1".into()));
        }
        if self.backend == BackendKind::Http && self.http.is_none() {
            return Err(PipelineError::Config(
                "backend = \"http\" needs an [http] section".into(),
            ));
        }
        self.mock.check()?;
        Ok(())
    }

    pub fn policy(&self) -> ReconcilePolicy {
        ReconcilePolicy {
            tolerance: self.tolerance,
            snap_window: self.snap_window,
            regenerate_attempts: self.regenerate_attempts,
        }
    }

    /// The mock settings actually used, with the run seed applied.
    pub fn effective_mock(&self) -> MockConfig {
        MockConfig {
            seed: self.seed,
            ..self.mock.clone()
        }
    }

    fn fingerprint(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }
}

/// Builds the backend selected by `config`.
pub fn make_backend(
    config: &RunConfig,
    stats: Arc<ReferenceStats>,
) -> Result<Box<dyn ChainBackend>, PipelineError> {
    config.check()?;
    Ok(match config.backend {
        BackendKind::Mock => Box::new(MockBackend::new(config.effective_mock(), stats)?),
        BackendKind::Http => Box::new(HttpBackend::new(
            config.http.clone().expect("checked above"),
        )?),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub agent_id: AgentId,
    pub household_id: HouseholdId,
    /// False for members included only to complete a sampled household.
    pub sampled: bool,
    pub committed: bool,
    pub parse_retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub repairs: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunCounts {
    pub sampled_agents: u64,
    pub agents_attempted: u64,
    pub committed: u64,
    pub sampled_committed: u64,
    pub skipped: u64,
    /// Replies that failed to parse or validate, across all attempts.
    pub parse_failures: u64,
    pub backend_calls: u64,
    pub repairs: BTreeMap<String, u64>,
    pub chain_lines: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub calls: u64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl LatencySummary {
    pub fn from_samples(ms: &[f64]) -> Self {
        if ms.is_empty() {
            return LatencySummary::default();
        }
        let mut v = ms.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
        LatencySummary {
            calls: v.len() as u64,
            mean_ms: v.iter().sum::<f64>() / v.len() as f64,
            p50_ms: q(0.5),
            p95_ms: q(0.95),
            max_ms: *v.last().expect("non-empty"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub prompt_template_version: String,
    pub complete: bool,
    pub households_total: usize,
    pub households_done: usize,
    pub counts: RunCounts,
    pub feedback: FeedbackState,
    pub latency: LatencySummary,
    pub wall_clock_secs: f64,
    pub agents: Vec<AgentOutcome>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    config: serde_json::Value,
    households_done: usize,
    lines: u64,
    bytes: u64,
    index: Vec<IndexEntry>,
    feedback: FeedbackState,
    counts: RunCounts,
    agents: Vec<AgentOutcome>,
    latencies_ms: Vec<f64>,
    wall_clock_secs: f64,
}

struct HouseholdResult {
    household_id: HouseholdId,
    chains: Vec<ActivityChain>,
    outcomes: Vec<AgentOutcome>,
    latencies_ms: Vec<f64>,
    parse_failures: u64,
    backend_calls: u64,
}

struct Worker<'a> {
    config: &'a RunConfig,
    stats: &'a ReferenceStats,
    pool: &'a FewShotPool,
    backend: &'a dyn ChainBackend,
}

fn classify(err: GatewayError) -> Result<String, PipelineError> {
    match err {
        GatewayError::Rejected { .. } | GatewayError::MalformedEnvelope(_) => Ok(format!("backend: {err}")),
        fatal => Err(PipelineError::Gateway(fatal)),
    }
}

impl Worker<'_> {
    fn household(&self, sh: &SampledHousehold, mut feedback: FeedbackState) -> Result<HouseholdResult, PipelineError> {
        let hh = &sh.household;
        let mut result = HouseholdResult {
            household_id: hh.household_id.clone(),
            chains: Vec::new(),
            outcomes: Vec::new(),
            latencies_ms: Vec::new(),
            parse_failures: 0,
            backend_calls: 0,
        };
        let policy = self.config.policy();
        let mut skipped: BTreeSet<AgentId> = BTreeSet::new();

        for member in hh.coordination_order() {
            let mut outcome = AgentOutcome {
                agent_id: member.agent_id.clone(),
                household_id: hh.household_id.clone(),
                sampled: sh.sampled.contains(&member.agent_id),
                ..AgentOutcome::default()
            };
            let ctx = build_context(&result.chains, hh, &member.agent_id);
            let guidance = feedback.next_guidance();
            let guidance_text = guidance.as_ref().map(|g| g.text());
            let examples = self.pool.select(member, FEW_SHOT_K);
            let prompt = build_prompt(
                member,
                Some(hh),
                self.stats,
                guidance_text.as_deref(),
                Some(&ctx),
                &examples,
            )?;

            let mut parsed = None;
            let mut current = prompt.clone();
            for attempt in 0..=self.config.max_parse_retries {
                let req = GenerationRequest {
                    prompt: &current,
                    profile: member,
                    household: hh,
                    guidance: guidance.as_ref(),
                    context: Some(&ctx),
                    attempt,
                    regeneration: 0,
                };
                result.backend_calls += 1;
                let reason = match self.backend.generate(&req) {
                    Ok(raw) => {
                        result.latencies_ms.push(raw.latency.as_secs_f64() * 1e3);
                        match parse_completion(&raw.text, hh, &member.agent_id) {
                            Ok(chain) => {
                                parsed = Some(chain);
                                break;
                            }
                            Err(e) => e.to_string(),
                        }
                    }
                    Err(e) => classify(e)?,
                };
                result.parse_failures += 1;
                outcome.failure = Some(reason.clone());
                if attempt < self.config.max_parse_retries {
                    outcome.parse_retries += 1;
                    current = prompt.with_retry_note(&reason);
                }
            }
            let Some(chain) = parsed else {
                warn!(
                    "skipping {} after {} attempts: {}",
                    member.agent_id,
                    self.config.max_parse_retries + 1,
                    outcome.failure.as_deref().unwrap_or("")
                );
                skipped.insert(member.agent_id.clone());
                result.outcomes.push(outcome);
                continue;
            };
            outcome.failure = None;

            let chain = if self.config.reconcile_enabled {
                let mut fatal: Option<PipelineError> = None;
                let mut calls = 0u64;
                let mut latencies: Vec<f64> = Vec::new();
                let summaries = ctx.member_summaries.clone();
                let mut regenerate = |anchors: &[crate::household::Anchor], n: u32| -> Option<ActivityChain> {
                    if fatal.is_some() {
                        return None;
                    }
                    let ctx2 = HouseholdContext {
                        member_summaries: summaries.clone(),
                        anchors: anchors.to_vec(),
                    };
                    let p = build_prompt(
                        member,
                        Some(hh),
                        self.stats,
                        guidance_text.as_deref(),
                        Some(&ctx2),
                        &examples,
                    )
                    .ok()?
                    .with_anchor_note(anchors);
                    let req = GenerationRequest {
                        prompt: &p,
                        profile: member,
                        household: hh,
                        guidance: guidance.as_ref(),
                        context: Some(&ctx2),
                        attempt: 0,
                        regeneration: n,
                    };
                    calls += 1;
                    match self.backend.generate(&req) {
                        Ok(raw) => {
                            latencies.push(raw.latency.as_secs_f64() * 1e3);
                            parse_completion(&raw.text, hh, &member.agent_id).ok()
                        }
                        Err(e) => {
                            if let Err(f) = classify(e) {
                                fatal = Some(f);
                            }
                            None
                        }
                    }
                };
                let (chain, repairs) = reconcile(chain, &mut result.chains, hh, &policy, &mut regenerate);
                result.backend_calls += calls;
                result.latencies_ms.extend(latencies);
                if let Some(f) = fatal {
                    return Err(f);
                }
                log_repairs(&mut result.outcomes, &mut outcome, &repairs);
                chain
            } else {
                chain
            };
            feedback.record_chain(&chain);
            result.chains.push(chain);
            outcome.committed = true;
            result.outcomes.push(outcome);
        }

        // Claims on members that never got a chain cannot be reciprocated.
        if self.config.reconcile_enabled && !skipped.is_empty() {
            for chain in &mut result.chains {
                for (i, a) in chain.activities.iter_mut().enumerate() {
                    let gone: Vec<AgentId> = a.participants.intersection(&skipped).cloned().collect();
                    for partner in gone {
                        a.participants.remove(&partner);
                        let repair = Repair::Demote {
                            owner: chain.owner.clone(),
                            activity_index: i,
                            partner,
                        };
                        if let Some(o) = result.outcomes.iter_mut().find(|o| o.agent_id == chain.owner) {
                            o.repairs.push(repair.to_string());
                        }
                    }
                }
            }
        }
        Ok(result)
    }
}

/// Repairs go to the outcome of the chain they touched.
fn log_repairs(done: &mut [AgentOutcome], current: &mut AgentOutcome, repairs: &[Repair]) {
    for r in repairs {
        let owner = match r {
            Repair::Snap { owner, .. } | Repair::Demote { owner, .. } => Some(owner),
            Repair::Regenerate { .. } => None,
        };
        match owner.and_then(|o| done.iter_mut().find(|x| &x.agent_id == o)) {
            Some(o) => o.repairs.push(r.to_string()),
            None => current.repairs.push(r.to_string()),
        }
    }
}

fn repair_kind(text: &str) -> &'static str {
    if text.starts_with("snap") {
        "snap"
    } else if text.starts_with("regenerate") {
        "regenerate"
    } else {
        "demote"
    }
}

/// Runs (or resumes) a generation into `out.dir` and returns the manifest.
///
/// An existing checkpoint in `out.dir` written with the same configuration
/// is resumed; the chain store is truncated to the checkpointed length first.
pub fn run_generation(
    config: &RunConfig,
    households: &[SampledHousehold],
    stats: &ReferenceStats,
    pool: &FewShotPool,
    backend: &dyn ChainBackend,
    out: &OutputPaths,
) -> Result<RunManifest, PipelineError> {
    config.check()?;
    if households.is_empty() {
        return Err(PipelineError::Sample("roster is empty".into()));
    }
    std::fs::create_dir_all(&out.dir).map_err(store::io_err(&out.dir))?;
    let started = Instant::now();

    let resumed = load_checkpoint(config, out)?;
    let mut state = match resumed {
        Some(cp) => {
            info!("resuming after {} households", cp.households_done);
            cp
        }
        None => {
            let mut feedback = FeedbackState::new(stats.length_dist().clone(), config.feedback_enabled);
            feedback.warmup = config.feedback_warmup;
            feedback.epsilon = config.feedback_epsilon;
            Checkpoint {
                config: config.fingerprint(),
                households_done: 0,
                lines: 0,
                bytes: 0,
                index: Vec::new(),
                feedback,
                counts: RunCounts {
                    sampled_agents: households.iter().map(|h| h.sampled.len() as u64).sum(),
                    ..RunCounts::default()
                },
                agents: Vec::new(),
                latencies_ms: Vec::new(),
                wall_clock_secs: 0.0,
            }
        }
    };
    let mut writer = ChainWriter::open(&out.chains(), state.lines, state.bytes, state.index.clone())?;
    let prior_secs = state.wall_clock_secs;
    let worker = Worker {
        config,
        stats,
        pool,
        backend,
    };

    let total = households.len();
    let stop_at = config.halt_after_households.unwrap_or(total).min(total);
    while state.households_done < stop_at {
        let start = state.households_done;
        let end = (start + config.concurrency).min(stop_at);
        let wave = &households[start..end];
        let snapshot = &state.feedback;
        let results: Vec<Result<HouseholdResult, PipelineError>> = if wave.len() == 1 {
            vec![worker.household(&wave[0], snapshot.clone())]
        } else {
            thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|sh| {
                        let w = &worker;
                        let fb = snapshot.clone();
                        s.spawn(move || w.household(sh, fb))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("household worker panicked"))
                    .collect()
            })
        };
        for r in results {
            let r = r?;
            let records: Vec<ChainRecord> = r
                .chains
                .iter()
                .map(|c| ChainRecord::from_chain(c, &r.household_id))
                .collect();
            writer.append_household(&r.household_id, &records)?;
            for c in &r.chains {
                state.feedback.record_chain(c);
            }
            let counts = &mut state.counts;
            counts.parse_failures += r.parse_failures;
            counts.backend_calls += r.backend_calls;
            for o in &r.outcomes {
                counts.agents_attempted += 1;
                if o.committed {
                    counts.committed += 1;
                    if o.sampled {
                        counts.sampled_committed += 1;
                    }
                } else {
                    counts.skipped += 1;
                }
                for rep in &o.repairs {
                    *counts.repairs.entry(repair_kind(rep).to_string()).or_default() += 1;
                }
            }
            state.agents.extend(r.outcomes);
            state.latencies_ms.extend(r.latencies_ms);
        }
        writer.sync()?;
        state.households_done = end;
        state.lines = writer.lines;
        state.bytes = writer.bytes;
        state.index = writer.index.clone();
        state.counts.chain_lines = writer.lines;
        state.wall_clock_secs = prior_secs + started.elapsed().as_secs_f64();
        write_json_atomic(&out.checkpoint(), &state)?;
    }

    let complete = state.households_done == total;
    let manifest = RunManifest {
        config: config.clone(),
        prompt_template_version: TEMPLATE_VERSION.to_string(),
        complete,
        households_total: total,
        households_done: state.households_done,
        counts: state.counts.clone(),
        feedback: state.feedback.clone(),
        latency: LatencySummary::from_samples(&state.latencies_ms),
        wall_clock_secs: prior_secs + started.elapsed().as_secs_f64(),
        agents: state.agents.clone(),
    };
    write_index(&out.index(), &writer.index)?;
    write_json_atomic(&out.manifest(), &manifest)?;
    if complete {
        let cp = out.checkpoint();
        if cp.exists() {
            std::fs::remove_file(&cp).map_err(store::io_err(&cp))?;
        }
    }
    Ok(manifest)
}

fn load_checkpoint(config: &RunConfig, out: &OutputPaths) -> Result<Option<Checkpoint>, PipelineError> {
    let path = out.checkpoint();
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(store::io_err(&path))?;
    let cp: Checkpoint =
        serde_json::from_str(&text).map_err(|e| PipelineError::Checkpoint(e.to_string()))?;
    if cp.config != config.fingerprint() {
        return Err(PipelineError::Checkpoint(format!(
            "{} was written with a different configuration; remove it to start over",
            path.display()
        )));
    }
    let len = std::fs::metadata(out.chains())
        .map(|m| m.len())
        .unwrap_or(0);
    if len < cp.bytes {
        return Err(PipelineError::Checkpoint(format!(
            "chain store is shorter ({len} bytes) than the checkpoint expects ({} bytes)",
            cp.bytes
        )));
    }
    Ok(Some(cp))
}

/// Agent outcomes keyed by id, for quick lookups in reports and tests.
pub fn outcomes_by_agent(manifest: &RunManifest) -> BTreeMap<&AgentId, &AgentOutcome> {
    manifest.agents.iter().map(|o| (&o.agent_id, o)).collect()
}
