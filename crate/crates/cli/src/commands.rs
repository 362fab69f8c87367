//! The four subcommands: ingest, train, audit, verify.

use std::fs;
use std::path::PathBuf;

use ccshap_core::ccshap::{aggregate, audit_email, CcShapReport};
use ccshap_core::corpus::{balance, split, Corpus, Label, Origin};
use ccshap_core::fixtures::standard_suite;
use ccshap_core::model::{preference_pairs, train_bce, train_contrastive, train_dpo, LinearTextModel, TrainOutcome};
use ccshap_core::scoring::AuditBackend;
use ccshap_core::shapley::{exact_shapley, mc_shapley, McOptions};

use crate::backend::{build_backend, load_checkpoint, save_checkpoint};
use crate::cache::{DiskCache, LayeredCache};
use crate::config::AuditConfig;
use crate::error::AppError;
use crate::ingest::{clean_pipeline, load_corpus, read_corpus_jsonl, write_corpus_jsonl, write_skip_report, CorpusFormat, SkipEntry};
use crate::report;

/// One labeled ingestion source.
pub struct IngestSource {
    pub path: PathBuf,
    pub format: CorpusFormat,
    pub origin: Origin,
}

pub struct IngestOutcome {
    pub train: Corpus,
    pub val: Corpus,
    pub skips: Vec<SkipEntry>,
}

/// load -> clean -> dedup -> balance -> split, then write the canonical
/// train/val JSONL plus the skip report into `output_dir`.
pub fn cmd_ingest(
    sources: &[IngestSource],
    per_class: Option<usize>,
    config: &AuditConfig,
) -> Result<IngestOutcome, AppError> {
    if sources.is_empty() {
        return Err(AppError::usage("ingest needs at least one --phishing, --ham, or --input source"));
    }
    let mut raw = Vec::new();
    let mut skips = Vec::new();
    for source in sources {
        let (mut emails, mut source_skips) = load_corpus(&source.path, source.format, source.origin)?;
        raw.append(&mut emails);
        skips.append(&mut source_skips);
    }
    let (corpus, mut clean_skips) = clean_pipeline(raw, &config.clean_options());
    skips.append(&mut clean_skips);

    let counts = corpus.class_counts();
    let per_class = per_class.unwrap_or_else(|| counts.iter().map(|(_, c)| *c).min().unwrap_or(0));
    if per_class == 0 {
        return Err(AppError::data(format!(
            "nothing to balance: phishing={} ham={}",
            counts[0].1, counts[1].1
        )));
    }
    let balanced = balance(&corpus, per_class, config.seed).map_err(AppError::data_from)?;
    let (train, val) = split(&balanced, config.ingest.train_fraction, config.seed).map_err(AppError::data_from)?;

    fs::create_dir_all(&config.output_dir)
        .map_err(|e| AppError::data(format!("cannot create {}: {e}", config.output_dir.display())))?;
    write_corpus_jsonl(&config.output_dir.join("train.jsonl"), &train)?;
    write_corpus_jsonl(&config.output_dir.join("val.jsonl"), &val)?;
    write_skip_report(&config.output_dir.join("skip_report.jsonl"), &skips)?;

    println!(
        "phishing={} ham={}",
        balanced.count(Label::Phishing),
        balanced.count(Label::Legitimate)
    );
    println!(
        "train={} val={} skipped={}",
        train.len(),
        val.len(),
        skips.len()
    );
    Ok(IngestOutcome { train, val, skips })
}

pub struct TrainArgs {
    pub objective: String,
    pub train_path: PathBuf,
    pub val_path: PathBuf,
    pub checkpoint_out: PathBuf,
    pub metrics_out: PathBuf,
    pub reference: Option<PathBuf>,
}

/// Train the selected objective and write the checkpoint + metrics CSV.
pub fn cmd_train(args: &TrainArgs, config: &AuditConfig) -> Result<TrainOutcome, AppError> {
    if !matches!(args.objective.as_str(), "bce" | "contrastive" | "dpo") {
        return Err(AppError::usage(format!(
            "unknown objective {:?}; valid values: bce, contrastive, dpo",
            args.objective
        )));
    }
    let train = read_corpus_jsonl(&args.train_path)?;
    let val = read_corpus_jsonl(&args.val_path)?;
    let train_config = config.train_config();

    let outcome = match args.objective.as_str() {
        "bce" => train_bce(&train, &val, &train_config),
        "contrastive" => train_contrastive(&train, &val, &train_config),
        "dpo" => {
            let reference = match &args.reference {
                Some(path) => load_checkpoint(path)?,
                None => LinearTextModel::zeros(train_config.dim, train_config.hash_seed),
            };
            let pairs = preference_pairs(&train, &train_config).map_err(AppError::data_from)?;
            let val_pairs = preference_pairs(&val, &train_config).map_err(AppError::data_from)?;
            train_dpo(&pairs, &val_pairs, &reference, &train_config)
        }
        _ => unreachable!("objective validated above"),
    }
    .map_err(AppError::data_from)?;

    if let Some(parent) = args.checkpoint_out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| AppError::data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    save_checkpoint(&args.checkpoint_out, &outcome.model)?;
    report::write_metrics_csv(&args.metrics_out, &outcome.metrics)?;

    let last = outcome.metrics.last().expect("metrics include epoch 0");
    println!(
        "objective={} epochs={} final_train_loss={:.6} final_val_loss={:.6} final_val_acc={:.4}",
        args.objective,
        last.epoch,
        last.train_loss,
        last.val_loss,
        last.val_acc
    );
    Ok(outcome)
}

pub struct AuditOutcome {
    pub reports: Vec<CcShapReport>,
    pub failed: usize,
}

/// Select the evaluation subset: explicit ids when given, otherwise a
/// seeded per-class sample.
fn select_emails(corpus: &Corpus, config: &AuditConfig) -> Result<Corpus, AppError> {
    if !config.ids.is_empty() {
        let mut missing = Vec::new();
        for id in &config.ids {
            if !corpus.records.iter().any(|r| &r.id() == id) {
                missing.push(id.clone());
            }
        }
        if !missing.is_empty() {
            return Err(AppError::data(format!("ids not present in corpus: {}", missing.join(", "))));
        }
        let records = corpus
            .records
            .iter()
            .filter(|r| config.ids.contains(&r.id()))
            .cloned()
            .collect();
        return Ok(Corpus::new(records));
    }
    balance(corpus, config.per_class_eval_count, ccshap_core::hash::derive_seed(config.seed, 0xa0d1))
        .map_err(AppError::data_from)
}

/// Audit the selected emails and write all three artifacts. Per-email
/// failures are logged and counted, never abort the batch; output order is
/// corpus order regardless of worker scheduling.
pub fn cmd_audit(config: &AuditConfig) -> Result<AuditOutcome, AppError> {
    config.validate()?;
    let corpus = read_corpus_jsonl(&config.corpus)?;
    if corpus.is_empty() {
        return Err(AppError::data(format!("{} holds no records", config.corpus.display())));
    }
    let selected = select_emails(&corpus, config)?;
    let backend = build_backend(config)?;
    let disk_cache = if config.score_cache.as_os_str().is_empty() {
        None
    } else {
        Some(DiskCache::open(&config.score_cache)?)
    };

    let options = config.audit_options();
    let results = run_batch(&selected, backend.as_ref(), disk_cache.as_ref(), &options, config.jobs);

    let mut reports = Vec::with_capacity(results.len());
    let mut failed = 0usize;
    for (email, result) in selected.records.iter().zip(results) {
        match result {
            Ok(report) => reports.push(report),
            Err(e) => {
                failed += 1;
                eprintln!("audit failed for email {}: {e}", email.id());
            }
        }
    }
    if reports.is_empty() {
        return Err(AppError::backend("every email in the batch failed to audit"));
    }

    fs::create_dir_all(&config.output_dir)
        .map_err(|e| AppError::data(format!("cannot create {}: {e}", config.output_dir.display())))?;
    report::write_reports_jsonl(&config.output_dir.join("reports.jsonl"), &reports)?;
    let summary = aggregate(&reports, &config.model_name);
    report::write_summary_csv(&config.output_dir.join("summary.csv"), &summary)?;
    report::write_text_reports(&config.output_dir.join("reports.txt"), &reports)?;

    println!(
        "model={} backend={:?} estimator={:?} n_samples={} seed={}",
        config.model_name, config.backend, config.estimator, config.n_samples, config.seed
    );
    for row in &summary {
        println!("{}", report::summary_console_line(row));
    }
    println!("audited={} failed={}", reports.len(), failed);
    Ok(AuditOutcome { reports, failed })
}

fn run_batch(
    selected: &Corpus,
    backend: &(dyn AuditBackend + Send + Sync),
    disk_cache: Option<&DiskCache>,
    options: &ccshap_core::ccshap::AuditOptions,
    jobs: usize,
) -> Vec<Result<CcShapReport, ccshap_core::ccshap::AuditError>> {
    let n = selected.len();
    let jobs = jobs.max(1).min(n.max(1));
    if jobs == 1 {
        return selected
            .records
            .iter()
            .map(|email| audit_email(email, backend, &LayeredCache::new(disk_cache), options))
            .collect();
    }

    let mut results: Vec<Option<Result<CcShapReport, ccshap_core::ccshap::AuditError>>> =
        (0..n).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if index >= n {
                    break;
                }
                let email = &selected.records[index];
                let result = audit_email(email, backend, &LayeredCache::new(disk_cache), options);
                slots.lock().unwrap()[index] = Some(result);
            });
        }
    });
    results.into_iter().map(|slot| slot.expect("every index visited")).collect()
}

pub struct VerifyArgs {
    pub n_samples: u32,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for VerifyArgs {
    fn default() -> Self {
        Self { n_samples: 2000, seed: 7, tolerance: 0.02 }
    }
}

#[derive(Debug)]
pub struct VerifyOutcome {
    pub failures: Vec<String>,
}

/// Run exact vs Monte Carlo over the fixture suite and print one line per
/// fixture. A tolerance breach lists the fixture and exits nonzero.
pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyOutcome, AppError> {
    let mut failures = Vec::new();
    for fixture in standard_suite(args.seed) {
        let exact = exact_shapley(
            fixture.scorer.as_ref(),
            &fixture.sequence,
            &fixture.target,
            ccshap_core::shapley::DEFAULT_EXACT_LIMIT,
        )
        .map_err(AppError::data_from)?;
        let mc = mc_shapley(
            fixture.scorer.as_ref(),
            &fixture.sequence,
            &fixture.target,
            McOptions::new(args.n_samples, args.seed),
        )
        .map_err(AppError::data_from)?;
        let deviation = exact
            .values
            .iter()
            .zip(&mc.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let pass = deviation <= args.tolerance;
        println!(
            "fixture {:<16} n={:<2} N={} max_deviation={:.6} tolerance={} {}",
            fixture.name,
            exact.values.len(),
            args.n_samples,
            deviation,
            args.tolerance,
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failures.push(fixture.name.to_string());
        }
    }
    if failures.is_empty() {
        Ok(VerifyOutcome { failures })
    } else {
        Err(AppError::verification(format!("tolerance breached by: {}", failures.join(", "))))
    }
}
