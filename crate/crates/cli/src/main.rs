//! `chainsynth`: ingest travel diaries, generate household activity chains,
//! and evaluate them.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 on any runtime
//! failure, with a one-line diagnostic on stderr.

mod config;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use chainsynth::eval::{evaluate, run_ablation, write_report, Ablate, AblationReport, EvalOptions, EvalReport};
use chainsynth::household::{audit_consistency, DEFAULT_TOLERANCE};
use chainsynth::pipeline::{
    make_backend, read_chain_store, run_generation, sample_agents, whole_roster, BackendKind,
    OutputPaths, RunConfig, SampledHousehold,
};
use chainsynth::prompt::FewShotPool;
use chainsynth::roster::{profile_index, read_roster};
use chainsynth::stats::{ingest_diary, read_diary, ReferenceStats};
use chainsynth::{AgentId, Household, SocioProfile};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::config::{parse_override, FileConfig};

#[derive(Debug, Parser)]
#[command(name = "chainsynth", version, about = "Household-coordinated activity chain synthesis")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a diary CSV into reference statistics.
    Ingest {
        /// Diary CSV (household_id,agent_id,relationship,group_tags,activity_code,start,end,participants).
        diary: PathBuf,
        /// Where to write the statistics JSON.
        #[arg(short, long, default_value = "stats.json")]
        out: PathBuf,
    },
    /// Generate activity chains for a roster.
    Generate(RunArgs),
    /// Compare a chain store with reference statistics.
    Evaluate(EvaluateArgs),
    /// Run the pipeline with and without feedback/reconciliation and compare.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Switches turned off in the "without" arm.
        #[arg(long, value_enum, default_value_t = AblateArg::Both)]
        ablate: AblateArg,
    },
    /// Check every joint claim in a chain store against the partner's chain.
    Audit {
        /// Chain store (JSONL).
        #[arg(long)]
        chains: PathBuf,
        /// Where to write the per-claim CSV.
        #[arg(short, long, default_value = "audit.csv")]
        out: PathBuf,
        /// Minutes of start/end disagreement tolerated.
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: u16,
    },
    /// Print a report.json or ablation.json (or a directory holding one) as text.
    Report {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Http,
    Mock,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AblateArg {
    Feedback,
    Reconcile,
    Both,
}

impl From<AblateArg> for Ablate {
    fn from(a: AblateArg) -> Self {
        match a {
            AblateArg::Feedback => Ablate::Feedback,
            AblateArg::Reconcile => Ablate::Reconcile,
            AblateArg::Both => Ablate::Both,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration (TOML with [inputs] and [run] tables).
    #[arg(long)]
    config: PathBuf,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of agents to sample; households are completed around them.
    #[arg(long)]
    sample_size: Option<usize>,
    /// Disable length feedback guidance.
    #[arg(long)]
    no_feedback: bool,
    /// Disable joint-activity reconciliation.
    #[arg(long)]
    no_reconcile: bool,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Households generated in parallel.
    #[arg(long)]
    concurrency: Option<usize>,
    /// Output directory (default: [output].dir, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config override as dotted key=value, e.g. run.mock.hallucination_rate=0.3. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, toml::Value)>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Chain store (JSONL).
    #[arg(long)]
    chains: PathBuf,
    /// Reference statistics JSON.
    #[arg(long)]
    stats: PathBuf,
    /// Roster CSV with the profiles of every agent in the store.
    #[arg(long)]
    roster: PathBuf,
    /// Output directory for report.json and plots/.
    #[arg(short, long, default_value = "eval")]
    out: PathBuf,
    /// Timing slices for every activity type instead of Home, Work and Buy meals.
    #[arg(long)]
    all_types: bool,
    /// Minutes of start/end disagreement tolerated by the consistency audit.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: u16,
}

/// Everything a run needs, resolved from the config file and flags.
struct Prepared {
    config: RunConfig,
    households: Vec<SampledHousehold>,
    stats: Arc<ReferenceStats>,
    pool: FewShotPool,
    out: PathBuf,
}

fn load_stats(path: &Path) -> Result<ReferenceStats> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    ReferenceStats::load(BufReader::new(f)).with_context(|| format!("loading {}", path.display()))
}

fn load_roster(path: &Path) -> Result<Vec<Household>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_roster(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn prepare(args: &RunArgs) -> Result<Prepared> {
    let file = FileConfig::load(&args.config, &args.overrides)?;
    let mut config = file.run;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.sample_size {
        config.sample_size = Some(n);
    }
    if args.no_feedback {
        config.feedback_enabled = false;
    }
    if args.no_reconcile {
        config.reconcile_enabled = false;
    }
    if let Some(b) = args.backend {
        config.backend = match b {
            BackendArg::Http => BackendKind::Http,
            BackendArg::Mock => BackendKind::Mock,
        };
    }
    if let Some(c) = args.concurrency {
        config.concurrency = c;
    }
    config.check()?;

    let roster = load_roster(&file.inputs.roster)?;
    let households = match config.sample_size {
        Some(n) => sample_agents(&roster, n, config.seed)?,
        None => whole_roster(&roster),
    };
    let stats = Arc::new(load_stats(&file.inputs.stats)?);
    let pool = match &file.inputs.few_shot_diary {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            FewShotPool::from_diary(&read_diary(BufReader::new(f))?)
        }
        None => FewShotPool::builtin(),
    };
    let out = args
        .out
        .clone()
        .or(file.output.and_then(|o| o.dir))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Prepared {
        config,
        households,
        stats,
        pool,
        out,
    })
}

fn ingest(diary: &Path, out: &Path) -> Result<()> {
    let f = File::open(diary).with_context(|| format!("opening {}", diary.display()))?;
    let report = ingest_diary(BufReader::new(f)).with_context(|| format!("ingesting {}", diary.display()))?;
    let w = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    report.stats.save(BufWriter::new(w))?;
    println!(
        "{} chains ingested, {} skipped -> {}",
        report.chains_used,
        report.skip_count(),
        out.display()
    );
    Ok(())
}

fn generate(args: &RunArgs) -> Result<()> {
    let p = prepare(args)?;
    let backend = make_backend(&p.config, p.stats.clone())?;
    let paths = OutputPaths::new(&p.out);
    info!("generating {} households into {}", p.households.len(), p.out.display());
    let manifest = run_generation(&p.config, &p.households, &p.stats, &p.pool, backend.as_ref(), &paths)?;
    let c = &manifest.counts;
    println!(
        "{} chains committed, {} skipped, {} parse failures -> {}",
        c.committed,
        c.skipped,
        c.parse_failures,
        paths.chains().display()
    );
    Ok(())
}

fn profiles_for(path: &Path) -> Result<HashMap<AgentId, SocioProfile>> {
    Ok(profile_index(&load_roster(path)?))
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let records = read_chain_store(&args.chains)?;
    let profiles = profiles_for(&args.roster)?;
    let reference = load_stats(&args.stats)?;
    let options = EvalOptions {
        tolerance: args.tolerance,
        all_timing_types: args.all_types,
    };
    let evaluation = evaluate(&records, &profiles, &reference, &options)?;
    write_report(&evaluation, &reference, &args.out)?;
    print!("{}", render_report(&evaluation.report));
    Ok(())
}

fn ablate(args: &RunArgs, which: AblateArg) -> Result<()> {
    let p = prepare(args)?;
    let report = run_ablation(&p.config, which.into(), &p.households, p.stats.clone(), &p.pool, &p.out)?;
    print!("{}", render_ablation(&report));
    Ok(())
}

fn audit(chains: &Path, out: &Path, tolerance: u16) -> Result<()> {
    let records = read_chain_store(chains)?;
    let audit = audit_consistency(&records, tolerance);
    let w = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    audit.write_csv(BufWriter::new(w))?;
    println!(
        "{} of {} joint claims consistent ({:.1}%) -> {}",
        audit.consistent,
        audit.total(),
        audit.consistency_rate() * 100.0,
        out.display()
    );
    Ok(())
}

fn render_report(r: &EvalReport) -> String {
    let mut s = format!("chains {}  activities {}\n", r.chains, r.activities);
    s.push_str(&format!("{:<10}", "slice"));
    for d in chainsynth::stats::Dimension::ALL {
        s.push_str(&format!("{:>10}", d.name()));
    }
    s.push('\n');
    let mut row = |name: &str, m: &std::collections::BTreeMap<chainsynth::stats::Dimension, f64>| {
        s.push_str(&format!("{name:<10}"));
        for d in chainsynth::stats::Dimension::ALL {
            match m.get(&d) {
                Some(v) => s.push_str(&format!("{v:>10.4}")),
                None => s.push_str(&format!("{:>10}", "-")),
            }
        }
        s.push('\n');
    };
    row("all", &r.jsd_by_dimension);
    for (tag, m) in &r.slices {
        row(tag, m);
    }
    for (t, j) in &r.per_activity_timing {
        s.push_str(&format!("timing {:<16} start {:.4}  end {:.4}\n", t.label(), j.start, j.end));
    }
    let c = &r.consistency;
    s.push_str(&format!(
        "consistency {}/{} ({:.1}%)\n",
        c.consistent,
        c.consistent + c.inconsistent,
        c.consistency_rate * 100.0
    ));
    s
}

fn render_ablation(a: &AblationReport) -> String {
    let mut s = String::new();
    for (name, arm) in [("with", &a.with), ("without", &a.without)] {
        s.push_str(&format!(
            "== {name} (feedback {}, reconcile {}) ==\n",
            arm.feedback_enabled, arm.reconcile_enabled
        ));
        s.push_str(&render_report(&arm.report));
    }
    s.push_str("delta (without - with):");
    for (d, v) in &a.jsd_delta {
        s.push_str(&format!(" {}={v:+.4}", d.name()));
    }
    s.push_str(&format!("\nconsistency delta {:+.1} pp\n", a.consistency_delta * 100.0));
    s
}

fn report(path: &Path) -> Result<()> {
    let file = if path.is_dir() {
        ["ablation.json", chainsynth::eval::REPORT_FILE]
            .iter()
            .map(|f| path.join(f))
            .find(|p| p.exists())
            .with_context(|| format!("no report.json or ablation.json in {}", path.display()))?
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
    if value.get("with").is_some() {
        let a: AblationReport = serde_json::from_value(value).context("not an ablation report")?;
        print!("{}", render_ablation(&a));
    } else if value.get("jsd_by_dimension").is_some() {
        let r: EvalReport = serde_json::from_value(value).context("not an evaluation report")?;
        print!("{}", render_report(&r));
    } else {
        bail!("{} is neither an evaluation nor an ablation report", file.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { diary, out } => ingest(&diary, &out),
        Command::Generate(args) => generate(&args),
        Command::Evaluate(args) => run_evaluate(&args),
        Command::Ablate { run, ablate: which } => ablate(&run, which),
        Command::Audit {
            chains,
            out,
            tolerance,
        } => audit(&chains, &out, tolerance),
        Command::Report { path } => report(&path),
    }
}

/// Collapses an error chain into one line. Causes already spelled out by
/// their parent's message are skipped.
fn one_line(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(2)
        }
    }
}
