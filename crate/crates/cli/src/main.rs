use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ccshap_cli::commands::{self, IngestSource, TrainArgs, VerifyArgs};
use ccshap_cli::config::{AuditConfig, BackendKind, AUTH_TOKEN_ENV};
use ccshap_cli::error::AppError;
use ccshap_cli::ingest::CorpusFormat;
use ccshap_cli::remote::RemoteEndpoint;
use ccshap_core::ccshap::Estimator;
use ccshap_core::corpus::Origin;

/// Faithfulness audits for phishing/ham email classifiers: Shapley-based
/// prediction/explanation consistency scoring with a reproducible corpus
/// and training pipeline.
#[derive(Parser)]
#[command(name = "ccshap", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, clean, deduplicate, balance, and split email corpora.
    Ingest(IngestCli),
    /// Train the built-in model (bce, contrastive, or dpo objective).
    Train(TrainCli),
    /// Audit emails: attribution of prediction and explanation, CC-SHAP.
    Audit(AuditCli),
    /// Compare the Monte Carlo estimator against the exact oracle suite.
    Verify(VerifyCli),
}

#[derive(Args)]
struct CommonConfig {
    /// Declarative config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonConfig {
    fn resolve(&self) -> Result<AuditConfig, AppError> {
        let mut config = match &self.config {
            Some(path) => AuditConfig::load(path)?,
            None => AuditConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        Ok(config)
    }
}

#[derive(Args)]
struct IngestCli {
    #[command(flatten)]
    common: CommonConfig,
    /// Source file(s) of phishing emails.
    #[arg(long)]
    phishing: Vec<PathBuf>,
    /// Source file(s) of legitimate emails.
    #[arg(long)]
    ham: Vec<PathBuf>,
    /// Source file(s) whose records carry their own label field.
    #[arg(long)]
    input: Vec<PathBuf>,
    /// Input format: eml_dir, mbox, jsonl, or csv.
    #[arg(long, default_value = "jsonl")]
    format: String,
    /// Records to keep per class (default: the smaller class count).
    #[arg(long)]
    per_class: Option<usize>,
    /// Train fraction in (0, 1).
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Args)]
struct TrainCli {
    #[command(flatten)]
    common: CommonConfig,
    /// Training objective: bce, contrastive, or dpo.
    #[arg(long, default_value = "bce")]
    objective: String,
    /// Canonical train corpus (default: <out>/train.jsonl).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Canonical validation corpus (default: <out>/val.jsonl).
    #[arg(long)]
    val: Option<PathBuf>,
    /// Checkpoint output path (default: <out>/model.bin).
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Metrics CSV output path (default: <out>/metrics.csv).
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Frozen reference checkpoint for dpo (default: zero model).
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct AuditCli {
    #[command(flatten)]
    common: CommonConfig,
    /// Canonical corpus JSONL to audit.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Backend: toy or remote.
    #[arg(long)]
    backend: Option<String>,
    /// Toy-backend checkpoint path.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Remote inference server base URL.
    #[arg(long)]
    remote_url: Option<String>,
    /// Remote model name.
    #[arg(long)]
    remote_model: Option<String>,
    /// Name written into the summary's model column.
    #[arg(long)]
    model_name: Option<String>,
    /// Monte Carlo permutation count.
    #[arg(long)]
    n_samples: Option<u32>,
    /// Estimator: mc or exact.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    k_top: Option<usize>,
    /// Emails sampled per class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Comma-separated email ids to audit instead of sampling.
    #[arg(long, value_delimiter = ',')]
    ids: Vec<String>,
    /// Worker threads for the batch.
    #[arg(long)]
    jobs: Option<usize>,
    /// Persistent score-cache file.
    #[arg(long)]
    score_cache: Option<PathBuf>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    exact_limit: Option<usize>,
    /// Attribute prompt-template tokens too (default: frozen).
    #[arg(long)]
    attribute_template: bool,
}

#[derive(Args)]
struct VerifyCli {
    #[command(flatten)]
    common: CommonConfig,
    #[arg(long)]
    n_samples: Option<u32>,
    #[arg(long)]
    tolerance: Option<f64>,
}

fn parse_format(s: &str) -> Result<CorpusFormat, AppError> {
    CorpusFormat::parse(s)
        .ok_or_else(|| AppError::usage(format!("unknown format {s:?}; valid values: eml_dir, mbox, jsonl, csv")))
}

fn run_ingest(args: IngestCli) -> Result<(), AppError> {
    let mut config = args.common.resolve()?;
    if let Some(fraction) = args.train_fraction {
        config.ingest.train_fraction = fraction;
    }
    config.validate()?;
    let format = parse_format(&args.format)?;
    let mut sources = Vec::new();
    for path in args.phishing {
        sources.push(IngestSource { path, format, origin: Origin::PhishingSource });
    }
    for path in args.ham {
        sources.push(IngestSource { path, format, origin: Origin::HamSource });
    }
    for path in args.input {
        sources.push(IngestSource { path, format, origin: Origin::Unlabeled });
    }
    commands::cmd_ingest(&sources, args.per_class, &config)?;
    Ok(())
}

fn run_train(args: TrainCli) -> Result<(), AppError> {
    let mut config = args.common.resolve()?;
    if let Some(epochs) = args.epochs {
        config.train.epochs = epochs;
    }
    if let Some(lr) = args.learning_rate {
        config.train.learning_rate = lr;
    }
    if let Some(dim) = args.dim {
        config.train.dim = dim;
    }
    if let Some(margin) = args.margin {
        config.train.margin = margin;
    }
    if let Some(beta) = args.beta {
        config.train.beta = beta;
    }
    config.validate()?;
    let train_args = TrainArgs {
        objective: args.objective,
        train_path: args.train.unwrap_or_else(|| config.output_dir.join("train.jsonl")),
        val_path: args.val.unwrap_or_else(|| config.output_dir.join("val.jsonl")),
        checkpoint_out: args.model_out.unwrap_or_else(|| config.output_dir.join("model.bin")),
        metrics_out: args.metrics_out.unwrap_or_else(|| config.output_dir.join("metrics.csv")),
        reference: args.reference,
    };
    commands::cmd_train(&train_args, &config)?;
    Ok(())
}

fn run_audit(args: AuditCli) -> Result<(), AppError> {
    let mut config = args.common.resolve()?;
    if let Some(corpus) = args.corpus {
        config.corpus = corpus;
    }
    if let Some(backend) = args.backend {
        config.backend = match backend.as_str() {
            "toy" => BackendKind::Toy,
            "remote" => BackendKind::Remote,
            other => return Err(AppError::usage(format!("unknown backend {other:?}; valid values: toy, remote"))),
        };
    }
    if let Some(checkpoint) = args.checkpoint {
        config.checkpoint = checkpoint;
    }
    if args.remote_url.is_some() || args.remote_model.is_some() {
        let mut endpoint = config.remote.clone().unwrap_or_else(|| RemoteEndpoint::new("", ""));
        if let Some(url) = args.remote_url {
            endpoint.base_url = url;
        }
        if let Some(model) = args.remote_model {
            endpoint.model_name = model;
        }
        if endpoint.auth_token.is_none() {
            endpoint.auth_token = std::env::var(AUTH_TOKEN_ENV).ok();
        }
        config.remote = Some(endpoint);
    }
    if let Some(model_name) = args.model_name {
        config.model_name = model_name;
    }
    if let Some(n) = args.n_samples {
        config.n_samples = n;
    }
    if let Some(estimator) = args.estimator {
        config.estimator = match estimator.as_str() {
            "mc" => Estimator::MonteCarlo,
            "exact" => Estimator::Exact,
            other => return Err(AppError::usage(format!("unknown estimator {other:?}; valid values: mc, exact"))),
        };
    }
    if let Some(k) = args.k_top {
        config.k_top = k;
    }
    if let Some(per_class) = args.per_class {
        config.per_class_eval_count = per_class;
    }
    if !args.ids.is_empty() {
        config.ids = args.ids;
    }
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    if let Some(cache) = args.score_cache {
        config.score_cache = cache;
    }
    if let Some(max_tokens) = args.max_tokens {
        config.max_tokens = max_tokens;
    }
    if let Some(limit) = args.exact_limit {
        config.exact_limit = limit;
    }
    if args.attribute_template {
        config.attribute_template = true;
    }
    commands::cmd_audit(&config)?;
    Ok(())
}

fn run_verify(args: VerifyCli) -> Result<(), AppError> {
    let config = args.common.resolve()?;
    let defaults = VerifyArgs::default();
    let verify_args = VerifyArgs {
        n_samples: args.n_samples.unwrap_or(config.n_samples),
        seed: config.seed,
        tolerance: args.tolerance.unwrap_or(defaults.tolerance),
    };
    commands::cmd_verify(&verify_args)?;
    Ok(())
}

fn run() -> Result<(), AppError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if e.kind() == clap::error::ErrorKind::DisplayHelp
                || e.kind() == clap::error::ErrorKind::DisplayVersion =>
        {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(AppError::usage(e.to_string())),
    };
    match cli.command {
        Command::Ingest(args) => run_ingest(args),
        Command::Train(args) => run_train(args),
        Command::Audit(args) => run_audit(args),
        Command::Verify(args) => run_verify(args),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
