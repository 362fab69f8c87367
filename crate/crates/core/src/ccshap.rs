//! The consistency score between prediction-side and explanation-side
//! attributions, the per-email audit pipeline, and per-class aggregation.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{render_input, CleanEmail, InputTemplate, Label, TemplateError};
use crate::hash::derive_seed;
use crate::math::{mean_std, sqrt};
use crate::scoring::{AuditBackend, CachedScorer, CoalitionScorer, ScoreCache, ScoreError, ScoreRequest, ScoreTarget};
use crate::shapley::{exact_shapley, mc_shapley, normalize_values, McOptions, NormalizedShap, ShapVector, ShapleyError};
use crate::token::{tokenize_spans, CoalitionMask, TokenizeError};

/// Which Shapley route the audit uses. Monte Carlo is the default; exact is
/// available when the attributable token count fits under the exact limit
/// (oracle runs, golden files).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "mc")]
    MonteCarlo,
    #[serde(rename = "exact")]
    Exact,
}

#[derive(Debug, Clone)]
pub struct AuditOptions {
    pub template: InputTemplate,
    pub estimator: Estimator,
    pub n_samples: u32,
    pub seed: u64,
    pub k_top: usize,
    pub max_tokens: usize,
    pub exact_limit: usize,
    pub antithetic: bool,
    /// When set, prompt-template tokens are attributed like email content;
    /// by default they stay frozen-visible and get no attribution.
    pub attribute_template: bool,
    /// Recorded in every report for provenance.
    pub explanation_prompt: String,
    pub config_digest: String,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            template: InputTemplate::default(),
            estimator: Estimator::MonteCarlo,
            n_samples: 2000,
            seed: 42,
            k_top: 10,
            max_tokens: 256,
            exact_limit: crate::shapley::DEFAULT_EXACT_LIMIT,
            antithetic: true,
            attribute_template: false,
            explanation_prompt: "Explain why this email is {label}.".to_string(),
            config_digest: String::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CcShapError {
    #[error("attribution vectors differ in length: prediction {pred}, explanation {expl}")]
    LengthMismatch { pred: usize, expl: usize },
}

/// The consistency value plus the degeneracy flag; a degenerate comparison
/// reports 0 but is never silently folded into the healthy case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcShapOutcome {
    pub value: f64,
    pub degenerate: bool,
}

/// Cosine similarity of the two L1-renormalized attribution vectors
/// (1 minus the cosine distance). Inputs are renormalized before the
/// comparison, which is a no-op for already-normalized vectors. Range
/// [-1, 1]; a degenerate (all-zero) side yields 0 with the flag set.
pub fn cc_shap_score(pred: &NormalizedShap, expl: &NormalizedShap) -> Result<CcShapOutcome, CcShapError> {
    if pred.ratios.len() != expl.ratios.len() {
        return Err(CcShapError::LengthMismatch { pred: pred.ratios.len(), expl: expl.ratios.len() });
    }
    let pred = normalize_values(&pred.ratios);
    let expl = normalize_values(&expl.ratios);
    if pred.degenerate || expl.degenerate {
        return Ok(CcShapOutcome { value: 0.0, degenerate: true });
    }
    let dot: f64 = pred.ratios.iter().zip(&expl.ratios).map(|(a, b)| a * b).sum();
    let norm_pred = sqrt(pred.ratios.iter().map(|a| a * a).sum::<f64>());
    let norm_expl = sqrt(expl.ratios.iter().map(|b| b * b).sum::<f64>());
    let value = (dot / (norm_pred * norm_expl)).clamp(-1.0, 1.0);
    Ok(CcShapOutcome { value, degenerate: false })
}

/// One audited email. Serializes to a self-contained JSONL line; the raw
/// attribution vectors keep the estimator metadata alongside the
/// normalized ratios the score is computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcShapReport {
    pub email_id: String,
    /// The exact rendered string that was tokenized and audited.
    pub input_text: String,
    pub predicted_label: Label,
    pub ground_truth_label: Label,
    pub predicted_probability: f64,
    pub explanation_text: String,
    pub explanation_prompt: String,
    pub cc_shap: f64,
    pub degenerate_note: Option<String>,
    pub tokens: Vec<String>,
    pub pred_shap: NormalizedShap,
    pub expl_shap: NormalizedShap,
    pub pred_raw: ShapVector,
    pub expl_raw: ShapVector,
    pub top_pred_tokens: Vec<(String, f64)>,
    pub top_expl_tokens: Vec<(String, f64)>,
    pub truncated: bool,
    pub config_digest: String,
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error("backend: {0}")]
    Backend(#[from] ScoreError),
    #[error(transparent)]
    Shapley(#[from] ShapleyError),
    #[error(transparent)]
    CcShap(#[from] CcShapError),
}

fn run_estimator<S: crate::scoring::CoalitionScorer + ?Sized>(
    scorer: &S,
    sequence: &crate::token::TokenSequence,
    target: &ScoreTarget,
    options: &AuditOptions,
    email_seed: u64,
) -> Result<ShapVector, ShapleyError> {
    match options.estimator {
        Estimator::Exact => exact_shapley(scorer, sequence, target, options.exact_limit),
        Estimator::MonteCarlo => mc_shapley(
            scorer,
            sequence,
            target,
            McOptions { n_samples: options.n_samples, seed: email_seed, antithetic: options.antithetic },
        ),
    }
}

fn zero_shap_like(template: &ShapVector, target: &str) -> ShapVector {
    ShapVector {
        target: target.to_string(),
        n_samples: template.n_samples,
        baseline: 0.0,
        full_score: 0.0,
        values: alloc::vec![0.0; template.values.len()],
        stderr: alloc::vec![0.0; template.values.len()],
        token_indices: template.token_indices.clone(),
    }
}

fn top_tokens(
    sequence: &crate::token::TokenSequence,
    shap: &ShapVector,
    ratios: &[f64],
    k: usize,
) -> Vec<(String, f64)> {
    let mut ranked: Vec<(usize, f64)> = ratios.iter().copied().enumerate().collect();
    ranked.sort_by(|(ia, va), (ib, vb)| {
        vb.abs().partial_cmp(&va.abs()).unwrap_or(core::cmp::Ordering::Equal).then(ia.cmp(ib))
    });
    ranked
        .into_iter()
        .take(k)
        .map(|(i, value)| (sequence.surface[shap.token_indices[i]].clone(), value))
        .collect()
}

/// Audit one email end to end: render, tokenize, classify, obtain the
/// explanation, attribute both targets with a common permutation stream,
/// normalize, score, and assemble the report. Deterministic for a fixed
/// (options, backend): the RNG stream derives from (seed, content hash).
pub fn audit_email<B, C>(
    email: &CleanEmail,
    backend: &B,
    cache: &C,
    options: &AuditOptions,
) -> Result<CcShapReport, AuditError>
where
    B: AuditBackend + ?Sized,
    C: ScoreCache,
{
    let rendered = render_input(email, &options.template)?;
    let full_span = [(0usize, rendered.text.len())];
    let spans: &[(usize, usize)] = if options.attribute_template {
        &full_span
    } else {
        &rendered.content_spans
    };
    let sequence = tokenize_spans(&rendered.text, spans, Some(options.max_tokens))?;

    let scorer = CachedScorer::new(backend, cache);
    let full_mask = CoalitionMask::all_visible(sequence.len());
    let phishing_target = ScoreTarget::Classification(Label::Phishing);
    let legitimate_target = ScoreTarget::Classification(Label::Legitimate);
    let p_phishing = scorer.score(&ScoreRequest::new(&sequence, &full_mask, &phishing_target)?)?;
    let p_legitimate = scorer.score(&ScoreRequest::new(&sequence, &full_mask, &legitimate_target)?)?;
    let (predicted, predicted_probability) = if p_phishing > p_legitimate {
        (Label::Phishing, p_phishing)
    } else {
        (Label::Legitimate, p_legitimate)
    };

    let explanation = backend.explain(&sequence, predicted)?;
    let email_seed = derive_seed(options.seed, email.content_hash);

    let pred_target = ScoreTarget::Classification(predicted);
    let pred_raw = run_estimator(&scorer, &sequence, &pred_target, options, email_seed)?;

    let mut notes: Vec<&str> = Vec::new();
    let expl_raw = if explanation.is_degenerate() {
        notes.push("explanation degenerate: backend produced no usable explanation");
        zero_shap_like(&pred_raw, "explanation")
    } else {
        let expl_target = ScoreTarget::Explanation(explanation.clone());
        run_estimator(&scorer, &sequence, &expl_target, options, email_seed)?
    };

    let pred_shap = crate::shapley::normalize_contributions(&pred_raw);
    let expl_shap = crate::shapley::normalize_contributions(&expl_raw);
    if pred_shap.degenerate {
        notes.push("prediction-side attribution degenerate: all Shapley values zero");
    }
    if expl_shap.degenerate && !explanation.is_degenerate() {
        notes.push("explanation-side attribution degenerate: all Shapley values zero");
    }

    let outcome = cc_shap_score(&pred_shap, &expl_shap)?;
    let degenerate_note = if outcome.degenerate {
        let joined = if notes.is_empty() {
            "degenerate attribution".to_string()
        } else {
            notes.join("; ")
        };
        Some(joined)
    } else {
        None
    };

    let tokens: Vec<String> = pred_raw
        .token_indices
        .iter()
        .map(|&i| sequence.surface[i].clone())
        .collect();
    let top_pred_tokens = top_tokens(&sequence, &pred_raw, &pred_shap.ratios, options.k_top);
    let top_expl_tokens = top_tokens(&sequence, &expl_raw, &expl_shap.ratios, options.k_top);

    Ok(CcShapReport {
        email_id: email.id(),
        input_text: rendered.text,
        predicted_label: predicted,
        ground_truth_label: email.label,
        predicted_probability,
        explanation_text: explanation.text,
        explanation_prompt: options.explanation_prompt.clone(),
        cc_shap: outcome.value,
        degenerate_note,
        tokens,
        pred_shap,
        expl_shap,
        pred_raw,
        expl_raw,
        top_pred_tokens,
        top_expl_tokens,
        truncated: sequence.truncated,
        config_digest: options.config_digest.clone(),
    })
}

/// One summary row per ground-truth class: CC-SHAP mean and sample standard
/// deviation plus prediction accuracy, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub model: String,
    pub class: Label,
    pub count: usize,
    pub ccshap_mean: f64,
    pub ccshap_std: f64,
    pub accuracy_pct: f64,
}

/// Aggregate per-email reports by ground-truth class. Classes with no
/// reports emit no row; PHISHING sorts first.
pub fn aggregate(reports: &[CcShapReport], model: &str) -> Vec<ClassSummary> {
    let mut rows = Vec::new();
    for class in [Label::Phishing, Label::Legitimate] {
        let members: Vec<&CcShapReport> = reports.iter().filter(|r| r.ground_truth_label == class).collect();
        if members.is_empty() {
            continue;
        }
        let scores: Vec<f64> = members.iter().map(|r| r.cc_shap).collect();
        let (ccshap_mean, ccshap_std) = mean_std(&scores);
        let correct = members.iter().filter(|r| r.predicted_label == r.ground_truth_label).count();
        rows.push(ClassSummary {
            model: model.to_string(),
            class,
            count: members.len(),
            ccshap_mean,
            ccshap_std,
            accuracy_pct: 100.0 * correct as f64 / members.len() as f64,
        });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{synthetic_corpus, trained_toy_model, ConstantExplanationBackend, SelfConsistentBackend};
    use crate::model::ToyBackend;
    use crate::scoring::MemoryCache;

    fn normalized(values: &[f64]) -> NormalizedShap {
        normalize_values(values)
    }

    #[test]
    fn identical_vectors_score_one() {
        let v = normalized(&[0.5, -0.2, 0.3]);
        let outcome = cc_shap_score(&v, &v.clone()).unwrap();
        assert!((outcome.value - 1.0).abs() < 1e-12);
        assert!(!outcome.degenerate);
    }

    #[test]
    fn orthogonal_vectors_score_zero() {
        let a = normalized(&[1.0, 0.0]);
        let b = normalized(&[0.0, 1.0]);
        let outcome = cc_shap_score(&a, &b).unwrap();
        assert!(outcome.value.abs() < 1e-12);
    }

    #[test]
    fn antipodal_vectors_score_minus_one() {
        let a = normalized(&[0.5, -0.5]);
        let b = normalized(&[-0.5, 0.5]);
        let outcome = cc_shap_score(&a, &b).unwrap();
        assert!((outcome.value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_side_scores_zero_with_flag() {
        let a = normalized(&[1.0, 0.0]);
        let z = NormalizedShap { ratios: alloc::vec![0.0, 0.0], degenerate: true };
        let outcome = cc_shap_score(&a, &z).unwrap();
        assert_eq!(outcome.value, 0.0);
        assert!(outcome.degenerate);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let a = normalized(&[1.0]);
        let b = normalized(&[0.5, 0.5]);
        let err = cc_shap_score(&a, &b).unwrap_err();
        assert!(matches!(err, CcShapError::LengthMismatch { pred: 1, expl: 2 }));
    }

    #[test]
    fn symmetric_and_scale_invariant() {
        let raw_a = [0.2, -0.1, 0.4];
        let raw_b = [0.1, 0.3, -0.2];
        let a = normalized(&raw_a);
        let b = normalized(&raw_b);
        let ab = cc_shap_score(&a, &b).unwrap().value;
        let ba = cc_shap_score(&b, &a).unwrap().value;
        assert!((ab - ba).abs() < 1e-15);

        let scaled: Vec<f64> = raw_a.iter().map(|v| v * 37.5).collect();
        let a_scaled = normalized(&scaled);
        let scaled_score = cc_shap_score(&a_scaled, &b).unwrap().value;
        assert!((ab - scaled_score).abs() < 1e-12);
    }

    fn audit_options(estimator: Estimator) -> AuditOptions {
        AuditOptions { estimator, n_samples: 200, seed: 11, ..AuditOptions::default() }
    }

    #[test]
    fn self_consistent_backend_scores_exactly_one() {
        let backend = SelfConsistentBackend::new(trained_toy_model(5), 5);
        let corpus = synthetic_corpus(3, 21);
        for email in &corpus.records {
            let cache = MemoryCache::new();
            let report = audit_email(email, &backend, &cache, &audit_options(Estimator::MonteCarlo)).unwrap();
            assert!((report.cc_shap - 1.0).abs() <= 1e-9, "cc {} for {}", report.cc_shap, report.email_id);
            assert!(report.degenerate_note.is_none());
        }
    }

    #[test]
    fn constant_explanation_backend_is_degenerate() {
        let backend = ConstantExplanationBackend::new(trained_toy_model(5), 5);
        let email = &synthetic_corpus(1, 8).records[0];
        let cache = MemoryCache::new();
        let report = audit_email(email, &backend, &cache, &audit_options(Estimator::MonteCarlo)).unwrap();
        assert_eq!(report.cc_shap, 0.0);
        let note = report.degenerate_note.expect("degeneracy must be flagged");
        assert!(note.contains("explanation-side"));
    }

    #[test]
    fn audit_is_deterministic_per_seed() {
        let backend = ToyBackend::new(trained_toy_model(5), 5);
        let email = &synthetic_corpus(1, 4).records[0];
        let options = audit_options(Estimator::MonteCarlo);
        let a = audit_email(email, &backend, &MemoryCache::new(), &options).unwrap();
        let b = audit_email(email, &backend, &MemoryCache::new(), &options).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn audit_exact_mode_matches_mc_direction() {
        let backend = ToyBackend::new(trained_toy_model(5), 5);
        let email = &synthetic_corpus(1, 4).records[0];
        let exact = audit_email(email, &backend, &MemoryCache::new(), &audit_options(Estimator::Exact));
        // The synthetic emails are short but can exceed the default exact
        // limit; when they fit, exact and MC agree on the top token.
        if let Ok(exact) = exact {
            let mc_options = AuditOptions { n_samples: 2000, ..audit_options(Estimator::MonteCarlo) };
            let mc = audit_email(email, &backend, &MemoryCache::new(), &mc_options).unwrap();
            assert_eq!(exact.top_pred_tokens[0].0, mc.top_pred_tokens[0].0);
        }
    }

    #[test]
    fn aggregate_single_report_convention() {
        let backend = SelfConsistentBackend::new(trained_toy_model(5), 5);
        let email = &synthetic_corpus(1, 4).records[0];
        let report = audit_email(email, &backend, &MemoryCache::new(), &audit_options(Estimator::MonteCarlo)).unwrap();
        let correct = report.predicted_label == report.ground_truth_label;
        let rows = aggregate(core::slice::from_ref(&report), "toy");
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].count, 1);
        assert_eq!(rows[0].ccshap_std, 0.0);
        assert_eq!(rows[0].accuracy_pct, if correct { 100.0 } else { 0.0 });
    }

    #[test]
    fn aggregate_groups_by_ground_truth() {
        let backend = ToyBackend::new(trained_toy_model(5), 5);
        let corpus = synthetic_corpus(4, 13);
        let options = audit_options(Estimator::MonteCarlo);
        let reports: Vec<CcShapReport> = corpus
            .records
            .iter()
            .map(|e| audit_email(e, &backend, &MemoryCache::new(), &options).unwrap())
            .collect();
        let rows = aggregate(&reports, "toy");
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].class, Label::Phishing);
        assert_eq!(rows[0].count, 4);
        assert_eq!(rows[1].class, Label::Legitimate);
        assert_eq!(rows[1].count, 4);
        for row in &rows {
            assert!(row.ccshap_mean >= -1.0 && row.ccshap_mean <= 1.0);
        }
    }
}
