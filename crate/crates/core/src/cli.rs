//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
//! error, 3 backend error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::agent::{adjudicate_pair, Backend, Outcome, PromptTemplates, RemoteBackend, RemoteConfig, Role, ScriptedBackend};
use crate::bench::{ablate, run_benchmark, BenchError, BenchOptions, BenchmarkDataset, Switch};
use crate::config::RunConfig;
use crate::graph::{export_graph, materialize_graph, read_verdicts, ExportFormat, VerdictRecord};
use crate::iconclass::{code_distance, directed_set_distance, DecayConfig};
use crate::manifold::{axes_from_store, pole_probability, project_f32, TemperatureConfig};
use crate::model::DirectedPair;
use crate::retrieval::{build_index, generate_candidates, recall_at_k, Backend as IndexBackend};
use crate::synth::{generate, SynthSpec};
use crate::tools::ToolName;
use crate::workspace::{read_pairs, ContextOptions, Workspace, TEMPLATE_DIR};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Backend(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Backend(_) => EXIT_BACKEND,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Backend(m) => m,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Backend(b) => CliError::Backend(b.to_string()),
            BenchError::UnknownSwitch(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(name = "artjudge", version, about = "Adjudicate directed artist-influence hypotheses")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Workspace directory holding the corpus files.
    #[arg(short, long, global = true, default_value = ".")]
    pub workspace: PathBuf,
    /// Configuration file; defaults to <workspace>/config.toml when present.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check corpus integrity and cross references.
    Validate,
    /// Nearest-neighbour index operations.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Propose candidate pairs from visual neighbours.
    Candidates(CandidateArgs),
    /// Adjudicate one pair or a batch of pairs.
    Adjudicate(AdjudicateArgs),
    /// Benchmark runs and ablations.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Property-graph export of verdicts.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Formal-manifold diagnostics.
    #[command(subcommand)]
    Manifold(ManifoldCommand),
    /// Concept-taxonomy utilities.
    #[command(subcommand)]
    Iconclass(IconclassCommand),
    /// Invoke a single evidence tool on a pair.
    Tool(ToolArgs),
    /// Write a deterministic synthetic workspace.
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Build the index over the visual store and report recall against exact scan.
    Build {
        #[arg(long)]
        backend: Option<String>,
        /// Number of stored vectors used as recall queries (0 skips the check).
        #[arg(long, default_value_t = 100)]
        recall_queries: usize,
    },
}

#[derive(Debug, Args)]
pub struct CandidateArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "gamma-v")]
    pub gamma_v: Option<f64>,
    #[arg(long = "delta-years")]
    pub delta_years: Option<i32>,
    #[arg(long)]
    pub backend: Option<String>,
    /// Write candidates as JSON Lines here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct AgentArgs {
    /// `scripted` (deterministic heuristic) or `remote`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "max-steps")]
    pub max_steps: Option<usize>,
    /// Remote endpoint; overrides the environment.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long = "max-retries")]
    pub max_retries: Option<u32>,
    /// Redact influence predicates in biographies.
    #[arg(long = "mask-bio")]
    pub mask_bio: bool,
}

#[derive(Debug, Args)]
pub struct AdjudicateArgs {
    #[arg(long, requires = "target", conflicts_with = "pairs")]
    pub source: Option<String>,
    #[arg(long, requires = "source")]
    pub target: Option<String>,
    /// Pairs file (JSON Lines or JSON collection) for batch mode.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[command(flatten)]
    pub agent: AgentArgs,
    /// Directory for verdicts.jsonl and trajectories.jsonl.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Cross-validated benchmark run.
    Run(BenchArgs),
    /// Baseline plus one arm per switch on identical folds.
    Ablate {
        #[command(flatten)]
        bench: BenchArgs,
        /// `disable_tool=<Tool>`, `gamma=<x>`, `mask_bio` or `generic_prompts`; repeatable.
        #[arg(long = "switch", required = true)]
        switches: Vec<String>,
    },
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Labeled pairs; defaults to the workspace pairs file.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the configured threshold instead of tuning per fold.
    #[arg(long = "fixed-threshold")]
    pub fixed_threshold: bool,
    #[arg(long = "in-flight")]
    pub in_flight: Option<usize>,
    #[command(flatten)]
    pub agent: AgentArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// Materialize verdicts (from `adjudicate --out`) and export them.
    Export {
        #[arg(long)]
        verdicts: PathBuf,
        /// json, script or csv.
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ManifoldCommand {
    /// Basis diagnostics, artist signatures and per-artwork pole probabilities.
    Inspect {
        /// Restrict signatures to these artists.
        #[arg(long)]
        artist: Vec<String>,
        /// Report pole probabilities for these artworks.
        #[arg(long)]
        artwork: Vec<String>,
        /// Use the generic prompt store.
        #[arg(long)]
        generic: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum IconclassCommand {
    /// Distance between two codes, or directed distances between two
    /// comma-separated code sets.
    Dist {
        a: String,
        b: String,
        #[arg(long)]
        lambda: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct ToolArgs {
    /// VisualAnalyzer, BiographyReader, TimelineGate, StyleComparator or ConceptRetriever.
    pub name: String,
    #[arg(long)]
    pub source: String,
    #[arg(long)]
    pub target: String,
    #[arg(long = "mask-bio")]
    pub mask_bio: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// mini, leakage or temporal.
    #[arg(long, default_value = "mini")]
    pub preset: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    match &cli.config {
        Some(p) => RunConfig::load(p).map_err(data),
        None => {
            let p = cli.workspace.join(crate::workspace::CONFIG_FILE);
            if p.exists() {
                RunConfig::load(&p).map_err(data)
            } else {
                Ok(RunConfig::default())
            }
        }
    }
}

fn load_workspace(cli: &Cli, config: RunConfig) -> Result<Workspace, CliError> {
    Workspace::load_with_config(&cli.workspace, config).map_err(data)
}

fn print_json<T: serde::Serialize>(value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(data)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(data)
}

fn write_file(path: &Path, body: &str) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(data)?;
    }
    fs::write(path, body).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn dispatch(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Synth(args) => return synth(args),
        Command::Iconclass(IconclassCommand::Dist { a, b, lambda }) => {
            let cfg = load_config(cli)?;
            return iconclass_dist(cli, &cfg, a, b, *lambda);
        }
        _ => {}
    }
    let mut config = load_config(cli)?;
    match &cli.command {
        Command::Validate => validate(cli, config),
        Command::Index(IndexCommand::Build { backend, recall_queries }) => {
            if let Some(b) = backend {
                config.retrieval.backend = b.clone();
            }
            config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            index_build(&load_workspace(cli, config)?, *recall_queries)
        }
        Command::Candidates(args) => {
            if let Some(k) = args.k {
                config.retrieval.k = k;
            }
            if let Some(g) = args.gamma_v {
                config.retrieval.gamma_v = g;
            }
            if let Some(d) = args.delta_years {
                config.retrieval.delta_years = d;
            }
            if let Some(b) = &args.backend {
                config.retrieval.backend = b.clone();
            }
            config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            candidates(&load_workspace(cli, config)?, args.out.as_deref())
        }
        Command::Adjudicate(args) => {
            apply_agent_args(&mut config, &args.agent)?;
            adjudicate(&load_workspace(cli, config)?, args)
        }
        Command::Bench(BenchCommand::Run(args)) => {
            apply_bench_args(&mut config, args)?;
            bench_run(&load_workspace(cli, config)?, args)
        }
        Command::Bench(BenchCommand::Ablate { bench, switches }) => {
            apply_bench_args(&mut config, bench)?;
            let switches: Vec<Switch> = switches
                .iter()
                .map(|s| s.parse().map_err(|e: BenchError| CliError::Usage(e.to_string())))
                .collect::<Result<_, _>>()?;
            bench_ablate(&load_workspace(cli, config)?, bench, &switches)
        }
        Command::Graph(GraphCommand::Export { verdicts, format, out }) => {
            let format: ExportFormat = format.parse().map_err(CliError::Usage)?;
            let ws = load_workspace(cli, config)?;
            let records = read_verdicts(verdicts).map_err(data)?;
            let graph = materialize_graph(&records, &ws.corpus).map_err(data)?;
            for p in export_graph(&graph, format, out).map_err(data)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Manifold(ManifoldCommand::Inspect { artist, artwork, generic }) => {
            manifold_inspect(&load_workspace(cli, config)?, artist, artwork, *generic)
        }
        Command::Tool(args) => {
            let ws = load_workspace(cli, config)?;
            let tool: ToolName = args.name.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
            let registry = ws
                .registry(ContextOptions {
                    masked: args.mask_bio,
                    generic_prompts: false,
                })
                .map_err(data)?;
            let record = registry
                .call(tool, &DirectedPair::new(&args.source, &args.target))
                .map_err(data)?;
            print_json(&record)
        }
        Command::Synth(_) | Command::Iconclass(_) => unreachable!("handled above"),
    }
}

fn validate(cli: &Cli, config: RunConfig) -> CliResult {
    let ws = load_workspace(cli, config)?;
    let report = ws.validate();
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    println!(
        "{} artists, {} artworks, {} pairs: {} errors, {} warnings",
        ws.corpus.artists.len(),
        ws.corpus.artworks.len(),
        ws.pairs.len(),
        report.errors.len(),
        report.warnings.len()
    );
    if report.accepted() {
        Ok(())
    } else {
        Err(CliError::Data("validation failed".into()))
    }
}

fn index_build(ws: &Workspace, recall_queries: usize) -> CliResult {
    let backend = ws.config.index_backend().map_err(data)?;
    let index = build_index(Arc::clone(&ws.visual), backend, ws.config.index_params()).map_err(data)?;
    let n = recall_queries.min(index.len());
    let recall = if n > 0 && backend == IndexBackend::SmallWorldGraph {
        let step = (index.len() / n).max(1);
        let queries: Vec<Vec<f32>> = (0..n).map(|i| ws.visual.row(i * step % index.len()).to_vec()).collect();
        Some(recall_at_k(&index, &queries, 10.min(index.len())).map_err(data)?)
    } else {
        None
    };
    print_json(&serde_json::json!({
        "backend": format!("{backend:?}"),
        "vectors": index.len(),
        "dim": ws.visual.dim(),
        "params": ws.config.index_params(),
        "recall_at_10": recall,
    }))
}

fn candidates(ws: &Workspace, out: Option<&Path>) -> CliResult {
    let index = build_index(
        Arc::clone(&ws.visual),
        ws.config.index_backend().map_err(data)?,
        ws.config.index_params(),
    )
    .map_err(data)?;
    let pairs = generate_candidates(&ws.corpus, &index, ws.config.candidate_params()).map_err(data)?;
    let body: String = pairs
        .iter()
        .map(|p| serde_json::to_string(p).expect("candidate serializes") + "\n")
        .collect();
    match out {
        Some(path) => {
            write_file(path, &body)?;
            eprintln!("{} candidates written to {}", pairs.len(), path.display());
            Ok(())
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn apply_agent_args(config: &mut RunConfig, a: &AgentArgs) -> CliResult {
    if let Some(b) = &a.backend {
        config.agent.backend = b.clone();
    }
    if let Some(t) = a.threshold {
        config.agent.threshold = t;
    }
    if let Some(g) = a.gamma {
        config.agent.gamma = g;
    }
    if let Some(m) = a.max_steps {
        config.agent.max_steps = m;
    }
    if a.mask_bio {
        config.evidence.mask_biographies = true;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))
}

fn apply_bench_args(config: &mut RunConfig, a: &BenchArgs) -> CliResult {
    if let Some(f) = a.folds {
        config.bench.folds = f;
    }
    if let Some(s) = a.seed {
        config.bench.seed = s;
    }
    if a.fixed_threshold {
        config.bench.tune_threshold = false;
    }
    if let Some(n) = a.in_flight {
        config.bench.in_flight = n;
    }
    apply_agent_args(config, &a.agent)
}

/// Builds the controller and critic named by the configuration.
fn backends(ws: &Workspace, agent: &AgentArgs) -> Result<(Box<dyn Backend>, Box<dyn Backend>), CliError> {
    match ws.config.agent.backend.as_str() {
        "remote" => {
            let mut rc = match &agent.endpoint {
                Some(e) => {
                    let mut c = RemoteConfig::new(e.clone(), std::env::var(crate::agent::ENV_MODEL).unwrap_or_else(|_| "default".into()));
                    c.api_key = std::env::var(crate::agent::ENV_API_KEY).ok();
                    c
                }
                None => RemoteConfig::from_env().map_err(|e| CliError::Backend(e.to_string()))?,
            };
            if let Some(r) = agent.max_retries {
                rc.max_retries = r;
            }
            let dir = ws.root.join(TEMPLATE_DIR);
            let templates = if dir.is_dir() {
                PromptTemplates::load_dir(&dir).map_err(data)?
            } else {
                PromptTemplates::default()
            };
            Ok((
                Box::new(RemoteBackend::new(Role::Controller, rc.clone(), templates.clone())),
                Box::new(RemoteBackend::new(Role::Critic, rc, templates)),
            ))
        }
        _ => Ok((
            Box::new(ScriptedBackend::heuristic(Role::Controller)),
            Box::new(ScriptedBackend::heuristic(Role::Critic)),
        )),
    }
}

fn adjudicate(ws: &Workspace, args: &AdjudicateArgs) -> CliResult {
    let pairs = match (&args.source, &args.target, &args.pairs) {
        (Some(s), Some(t), None) => vec![DirectedPair::new(s, t)],
        (None, None, Some(path)) => read_pairs(path).map_err(data)?,
        _ => return Err(CliError::Usage("give --source and --target, or --pairs".into())),
    };
    for p in &pairs {
        for id in [&p.source_artist_id, &p.target_artist_id] {
            if ws.corpus.artist(id).is_none() {
                return Err(CliError::Data(format!("unknown artist {id}")));
            }
        }
    }
    let registry = ws.registry(ContextOptions::default()).map_err(data)?;
    let (controller, critic) = backends(ws, &args.agent)?;
    let agent = ws.config.agent_config();
    let mut verdicts = String::new();
    let mut trajectories = String::new();
    let mut failures = Vec::new();
    for pair in &pairs {
        let t = adjudicate_pair(pair, &registry, controller.as_ref(), critic.as_ref(), &agent);
        trajectories.push_str(&t.to_jsonl());
        match &t.outcome {
            Outcome::Verdict { tuple, .. } => {
                let record = VerdictRecord {
                    pair: pair.clone(),
                    verdict: tuple.clone(),
                };
                verdicts.push_str(&serde_json::to_string(&record).expect("record serializes"));
                verdicts.push('\n');
                println!(
                    "{}\t{}\tconfidence={:.3}\tscore={:.3}",
                    pair.key(),
                    tuple.verdict,
                    tuple.confidence,
                    tuple.influence_score
                );
            }
            Outcome::NoVerdict { reason } => {
                eprintln!("{}: no verdict: {reason}", pair.key());
                failures.push(pair.key());
            }
        }
    }
    if let Some(dir) = &args.out {
        write_file(&dir.join("verdicts.jsonl"), &verdicts)?;
        write_file(&dir.join("trajectories.jsonl"), &trajectories)?;
        write_file(&dir.join("config.toml"), &ws.config.to_toml())?;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Backend(format!(
            "{} of {} pairs produced no verdict",
            failures.len(),
            pairs.len()
        )))
    }
}

fn dataset(ws: &Workspace, args: &BenchArgs) -> Result<BenchmarkDataset, CliError> {
    let pairs = match &args.pairs {
        Some(p) => read_pairs(p).map_err(data)?,
        None => ws.pairs.clone(),
    };
    Ok(BenchmarkDataset::new(pairs, ws.config.bench.balanced)?)
}

fn bench_options(ws: &Workspace) -> BenchOptions {
    BenchOptions::from_config(&ws.config)
}

fn bench_run(ws: &Workspace, args: &BenchArgs) -> CliResult {
    let ds = dataset(ws, args)?;
    let registry = ws.registry(ContextOptions::default()).map_err(data)?;
    let (controller, critic) = backends(ws, &args.agent)?;
    let report = run_benchmark(&ds, &registry, controller.as_ref(), critic.as_ref(), &bench_options(ws))?;
    report.write(&args.out, Some(&ws.config.to_toml()))?;
    println!("{}", summary_line(&report.overall, report.yes_count, report.no_verdict.len()));
    if report.no_verdict.is_empty() {
        Ok(())
    } else {
        Err(CliError::Backend(format!("{} pairs produced no verdict", report.no_verdict.len())))
    }
}

fn summary_line(m: &crate::bench::MetricBundle, yes: usize, no_verdict: usize) -> String {
    format!(
        "precision={:.3} recall={:.3} specificity={:.3} f1={:.3} mcc={:.3} auc={:.3} yes={yes} no_verdict={no_verdict}",
        m.precision, m.recall, m.specificity, m.f1_pos, m.mcc, m.roc_auc
    )
}

fn bench_ablate(ws: &Workspace, args: &BenchArgs, switches: &[Switch]) -> CliResult {
    let ds = dataset(ws, args)?;
    let factory = |role: Role| -> Result<Box<dyn Backend>, crate::agent::BackendError> {
        let (c, k) = backends(ws, &args.agent).map_err(|e| crate::agent::BackendError::Config(e.message().to_string()))?;
        Ok(match role {
            Role::Controller => c,
            Role::Critic => k,
        })
    };
    let report = ablate(ws, &ds, &bench_options(ws), switches, &factory)?;
    report.write(&args.out)?;
    write_file(&args.out.join("config.toml"), &ws.config.to_toml())?;
    println!("baseline\t{}", summary_line(&report.baseline.overall, report.baseline.yes_count, 0));
    for arm in &report.arms {
        println!("{}\t{}", arm.switch, summary_line(&arm.overall, arm.yes_count, 0));
    }
    Ok(())
}

fn manifold_inspect(ws: &Workspace, artists: &[String], artworks: &[String], generic: bool) -> CliResult {
    let basis = ws.basis(generic).map_err(data)?;
    let store = if generic {
        ws.generic_poles.as_ref().expect("basis checked the store")
    } else {
        &ws.poles
    };
    let axes = axes_from_store(store).map_err(data)?;
    let ctx = ws
        .context(ContextOptions {
            masked: false,
            generic_prompts: generic,
        })
        .map_err(data)?;
    let signatures: Vec<_> = ctx
        .signatures
        .values()
        .filter(|s| artists.is_empty() || artists.contains(&s.artist_id))
        .collect();
    let temperature = TemperatureConfig {
        kappa: ws.config.evidence.kappa,
    };
    let mut works = Vec::new();
    for id in artworks {
        let art = ws.corpus.artwork(id).ok_or_else(|| CliError::Data(format!("unknown artwork {id}")))?;
        let z = ws.visual.row_f64(&art.embedding_key).map_err(data)?;
        let coord = project_f32(ws.visual.require(&art.embedding_key).map_err(data)?, &basis).map_err(data)?;
        let probs: Vec<f64> = axes
            .iter()
            .map(|a| pole_probability(&z, a, temperature))
            .collect::<Result<_, _>>()
            .map_err(data)?;
        works.push(serde_json::json!({ "artwork_id": id, "coordinates": coord.0, "positive_pole_probability": probs }));
    }
    print_json(&serde_json::json!({
        "axes": basis.len(),
        "dim": basis.dim,
        "orthonormality_error": basis.orthonormality_error(),
        "signatures": signatures,
        "artworks": works,
    }))
}

fn iconclass_dist(cli: &Cli, cfg: &RunConfig, a: &str, b: &str, lambda: Option<f64>) -> CliResult {
    let ws_dir = &cli.workspace;
    let edges = ws_dir.join(crate::workspace::CODE_EDGES);
    let graph = crate::iconclass::read_graph(
        &ws_dir.join(crate::workspace::CODE_LIST),
        edges.exists().then_some(edges.as_path()),
    )
    .map_err(data)?;
    let decay = DecayConfig::new(lambda.unwrap_or(cfg.evidence.lambda)).map_err(|e| CliError::Usage(e.to_string()))?;
    let set = |s: &str| -> std::collections::BTreeSet<String> {
        s.split(',').map(str::trim).filter(|c| !c.is_empty()).map(String::from).collect()
    };
    if a.contains(',') || b.contains(',') {
        let (sa, sb) = (set(a), set(b));
        print_json(&serde_json::json!({
            "forward": directed_set_distance(&sa, &sb, &graph, decay).map_err(data)?,
            "backward": directed_set_distance(&sb, &sa, &graph, decay).map_err(data)?,
            "lambda": decay.lambda,
        }))
    } else {
        let d = code_distance(a, b, &graph, decay).map_err(data)?;
        println!("{d}");
        Ok(())
    }
}

fn synth(args: &SynthArgs) -> CliResult {
    let mut spec = match args.preset.as_str() {
        "mini" => SynthSpec::mini_benchmark(),
        "leakage" => SynthSpec::leakage(),
        "temporal" => SynthSpec::temporal(),
        other => return Err(CliError::Usage(format!("unknown preset {other:?} (mini, leakage, temporal)"))),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    let corpus = generate(&spec).map_err(CliError::Usage)?;
    corpus.write(&args.out).map_err(data)?;
    println!(
        "{} artists, {} artworks, {} pairs written to {}",
        corpus.artists.len(),
        corpus.artworks.len(),
        corpus.pairs.len(),
        args.out.display()
    );
    Ok(())
}
