//! Command-line interface.
//!
//! Every subcommand reads an optional TOML config (the [`ExperimentConfig`] schema) and then
//! applies flag overrides; flags win. The master seed comes from `--seed`, else the
//! `PBOOSTER_SEED` environment variable, else the config file.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::anonymizers::{
    anonymize, load_manipulated, save_manipulated, AnonymizerConfig, ManipulatedHistory, Method,
};
use crate::attack::{deanonymize, AttackConfig};
use crate::domain::{
    load_graph, load_histories, load_topic_assignments, save_graph, save_histories,
    save_topic_assignments, SocialGraph, TopicModel,
};
use crate::error::{Error, Result};
use crate::evaluate::{
    evaluate_cohort, group_cohorts, write_scatter_csv, write_silhouette_csv, EvalConfig,
};
use crate::experiment::{replicate_dataset, run_experiment, write_reports, ExperimentConfig};
use crate::linksel::LinkSelectConfig;
use crate::seed;
use crate::socialsim::{FeedSimulator, GroundTruth};

#[derive(Debug, Parser)]
#[command(
    name = "pbooster",
    version,
    about = "Browsing-history anonymization toolkit"
)]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, env = "PBOOSTER_SEED")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic social graph, histories and ground truth.
    Simulate(SimulateArgs),
    /// Add decoy links to every history in a file.
    Anonymize(AnonymizeArgs),
    /// Run the linkage attack and write per-history ranks as CSV.
    Attack(AttackArgs),
    /// Cluster cohorts and write silhouette and privacy/utility CSVs.
    Evaluate(EvaluateArgs),
    /// Run the full simulate / anonymize / attack / evaluate grid.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    #[arg(long)]
    pub n_users: Option<usize>,
    /// Number of topics.
    #[arg(long)]
    pub m: Option<usize>,
    /// History sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub degree_min: Option<usize>,
    #[arg(long)]
    pub degree_max: Option<usize>,
    #[arg(long)]
    pub posts_per_user: Option<usize>,
    #[arg(long)]
    pub fof_fraction: Option<f64>,
}

/// Where the topic model comes from: `--topics` file, `--m`, or the config's `sim.m`.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Topic assignment file written by `simulate`.
    #[arg(long)]
    pub topics: Option<PathBuf>,
    #[arg(long, conflicts_with = "topics")]
    pub m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnonymizeArgs {
    #[arg(long, default_value = "pbooster")]
    pub method: Method,
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    /// Batch size h.
    #[arg(long, default_value_t = 25)]
    pub batch_size: usize,
    /// Input histories (JSON Lines).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Maps history ids to graph users; without it ids must be graph user ids.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub n_possible_call: Option<u64>,
    #[arg(long)]
    pub n_calls: Option<u64>,
    /// Size of each simulated history used for link selection.
    #[arg(long)]
    pub q: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// History or anonymizer output file (JSON Lines).
    #[arg(long)]
    pub histories: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// One or more history or anonymizer output files.
    #[arg(long, required = true, num_args = 1..)]
    pub histories: Vec<PathBuf>,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long)]
    pub k: Option<usize>,
    /// Output directory for `silhouette.csv` and `scatter.csv`.
    #[arg(long, default_value = "eval")]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n_users: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub batch_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub top_k: Option<usize>,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_toml_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn resolve_model(args: &ModelArgs, cfg: &ExperimentConfig) -> Result<TopicModel> {
    if let Some(p) = &args.topics {
        return Ok(load_topic_assignments(p)?.0);
    }
    TopicModel::new(args.m.unwrap_or(cfg.sim.m))
}

/// Resolves history ids to graph users through the truth file, or by name without one.
fn owner_resolver<'a>(
    truth: Option<&'a GroundTruth>,
    graph: &'a SocialGraph,
) -> impl Fn(&str) -> Result<usize> + 'a {
    move |id: &str| match truth {
        Some(t) => t.owner(id, graph),
        None => graph.require_user(id),
    }
}

fn simulate(cli: &Cli, args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = load_config(cli)?;
    let sim = &mut cfg.sim;
    if let Some(v) = args.n_users {
        sim.n_users = v;
    }
    if let Some(v) = args.m {
        sim.m = v;
    }
    if let Some(v) = args.degree_min {
        sim.degree_min = v;
    }
    if let Some(v) = args.degree_max {
        sim.degree_max = v;
    }
    if let Some(v) = args.posts_per_user {
        sim.posts_per_user = v;
    }
    if let Some(v) = args.fof_fraction {
        sim.fof_fraction = v;
    }
    if let Some(v) = &args.sizes {
        cfg.sizes = v.clone();
    }
    // Same dataset as replicate 0 of `experiment` with this config.
    let ds = replicate_dataset(&cfg, 0)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    save_graph(&args.out.join("graph.jsonl"), &ds.graph)?;
    let mut links: Vec<_> = ds.graph.link_pool().into_iter().map(|(l, _)| l).collect();
    links.sort_by(|a, b| a.url.cmp(&b.url));
    links.dedup_by(|a, b| a.url == b.url);
    save_topic_assignments(&args.out.join("topics.jsonl"), ds.graph.model(), &links)?;
    for set in &ds.sets {
        save_histories(
            &args.out.join(format!("histories_{}.jsonl", set.size)),
            &set.histories,
        )?;
    }
    ds.truth.save(&args.out.join("truth.jsonl"))?;
    let total: usize = ds.sets.iter().map(|s| s.histories.len()).sum();
    writeln!(
        out,
        "simulated {} users, {} histories, {} distinct links -> {}",
        ds.graph.len(),
        total,
        links.len(),
        args.out.display()
    )
    .map_err(|e| Error::io("<stdout>", e))
}

fn anonymize_cmd(cli: &Cli, args: &AnonymizeArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli)?;
    let model = resolve_model(&args.model, &cfg)?;
    let graph = load_graph(&args.graph, &model)?;
    let histories = load_histories(&args.input, &model)?;
    let truth = args.truth.as_deref().map(GroundTruth::load).transpose()?;
    let owner_of = owner_resolver(truth.as_ref(), &graph);

    let mut isp = cfg.isp;
    if let Some(v) = args.n_possible_call {
        isp.n_possible_call = v;
    }
    if let Some(v) = args.n_calls {
        isp.n_calls = v;
    }
    let link = LinkSelectConfig {
        q: args.q.unwrap_or(cfg.link.q),
        ..cfg.link
    };
    let base = AnonymizerConfig {
        method: args.method,
        lambda: args.lambda,
        batch_size_h: args.batch_size,
        link,
        greedy: cfg.greedy,
        isp,
    };
    base.validate()?;
    let simulator = FeedSimulator::new(cfg.sim.fof_fraction)?;
    let run_seed = seed::derive(cfg.seed, "anonymize");
    let owners: Vec<usize> = histories
        .iter()
        .map(|h| owner_of(&h.user))
        .collect::<Result<_>>()?;
    let manipulated: Vec<ManipulatedHistory> = histories
        .par_iter()
        .zip(&owners)
        .map(|(h, &owner)| {
            let acfg = AnonymizerConfig {
                link: LinkSelectConfig {
                    rng_seed: seed::derive(run_seed, &h.user),
                    ..base.link
                },
                ..base
            };
            anonymize(h, owner, &graph, &acfg, &simulator)
        })
        .collect::<Result<_>>()?;
    save_manipulated(&args.out, &manipulated, &graph)?;

    let decoys: usize = manipulated.iter().map(|m| m.added.len()).sum();
    let fallback: usize = manipulated
        .iter()
        .map(ManipulatedHistory::fallback_count)
        .sum();
    let mean = if manipulated.is_empty() {
        0.0
    } else {
        decoys as f64 / manipulated.len() as f64
    };
    writeln!(
        out,
        "{}: {} histories, {decoys} decoys (mean {mean:.2} per history, {fallback} from fallback) -> {}",
        args.method,
        manipulated.len(),
        args.out.display()
    )
    .map_err(|e| Error::io("<stdout>", e))
}

fn attack_cmd(cli: &Cli, args: &AttackArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli)?;
    let model = resolve_model(&args.model, &cfg)?;
    let graph = load_graph(&args.graph, &model)?;
    let truth = GroundTruth::load(&args.truth)?;
    let histories = load_manipulated(
        &args.histories,
        &graph,
        owner_resolver(Some(&truth), &graph),
    )?;
    let acfg = AttackConfig {
        top_k: args.top_k.unwrap_or(cfg.attack.top_k),
        delta: args.delta.unwrap_or(cfg.attack.delta),
    };
    let report = deanonymize(&histories, &graph, &truth, &acfg)?;
    let line = format!(
        "attack success (top-{}): {:.2}% ({}/{})",
        acfg.top_k,
        report.success_rate(),
        report.n_success,
        report.n_total
    );
    match &args.out {
        Some(p) => {
            report.write_csv(p)?;
            writeln!(out, "{line} -> {}", p.display()).map_err(|e| Error::io("<stdout>", e))
        }
        None => {
            report.write_csv_to(&mut *out)?;
            eprintln!("{line}");
            Ok(())
        }
    }
}

fn evaluate_cmd(cli: &Cli, args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli)?;
    let model = resolve_model(&args.model, &cfg)?;
    let graph = load_graph(&args.graph, &model)?;
    let truth = args.truth.as_deref().map(GroundTruth::load).transpose()?;
    let mut all = Vec::new();
    for p in &args.histories {
        all.extend(load_manipulated(
            p,
            &graph,
            owner_resolver(truth.as_ref(), &graph),
        )?);
    }
    let ecfg = EvalConfig {
        k: args.k.unwrap_or(cfg.eval.k),
        rng_seed: seed::derive(cfg.seed, "evaluate"),
        ..cfg.eval
    };
    let mut reports = Vec::new();
    for cohort in group_cohorts(all) {
        reports.push(evaluate_cohort(&cohort, &model, &ecfg)?);
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_silhouette_csv(&reports, &args.out.join("silhouette.csv"))?;
    write_scatter_csv(&reports, &args.out.join("scatter.csv"))?;
    for r in &reports {
        let sil = r
            .silhouette
            .map_or("undefined".to_string(), |s| format!("{s:.4}"));
        writeln!(
            out,
            "{} lambda={} h={} |H|={}: {} users, silhouette {sil}",
            r.method,
            r.lambda,
            r.h,
            r.history_size,
            r.rows.len()
        )
        .map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

fn experiment_cmd(cli: &Cli, args: &ExperimentArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = load_config(cli)?;
    if let Some(v) = &args.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = args.n_users {
        cfg.sim.n_users = v;
    }
    if let Some(v) = &args.lambdas {
        cfg.lambdas = v.clone();
    }
    if let Some(v) = &args.sizes {
        cfg.sizes = v.clone();
    }
    if let Some(v) = &args.batch_sizes {
        cfg.batch_sizes = v.clone();
    }
    if let Some(v) = &args.methods {
        cfg.methods = v.clone();
    }
    if let Some(v) = args.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = args.jobs {
        cfg.jobs = Some(v);
    }
    if let Some(v) = args.top_k {
        cfg.attack.top_k = v;
    }
    let results = run_experiment(&cfg)?;
    let written = write_reports(&results, &cfg.out_dir)?;
    let w = |e| Error::io("<stdout>", e);
    writeln!(
        out,
        "{} cells x {} replicates",
        cfg.cells().len(),
        cfg.replicates
    )
    .map_err(w)?;
    for s in results.summary() {
        let sil = s.silhouette.map_or("-".to_string(), |x| format!("{x:.4}"));
        writeln!(
            out,
            "{:<12} lambda={:<6} h={:<4} |H|={:<4} success={:6.2}% silhouette={sil} privacy={:.4}",
            s.cell.method.as_str(),
            s.cell.lambda,
            s.cell.h,
            s.cell.size,
            s.success_rate,
            s.mean_privacy
        )
        .map_err(w)?;
    }
    for p in written {
        writeln!(out, "wrote {}", p.display()).map_err(w)?;
    }
    Ok(())
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a, out),
        Command::Anonymize(a) => anonymize_cmd(cli, a, out),
        Command::Attack(a) => attack_cmd(cli, a, out),
        Command::Evaluate(a) => evaluate_cmd(cli, a, out),
        Command::Experiment(a) => experiment_cmd(cli, a, out),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
