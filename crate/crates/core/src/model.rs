//! A self-contained trainable classifier and explanation generator, so the
//! full audit pipeline runs at desk scale with no external services.
//!
//! The model is logistic regression over hashed token counts. The same
//! weight container serves three objectives: binary cross-entropy,
//! triplet-margin contrastive learning (weights act as a diagonal metric
//! over the hashed space), and direct preference optimization against a
//! frozen reference. Training is full-batch gradient descent in a fixed
//! order, so a (seed, data, config) triple always yields the same model.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::corpus::{render_input, Corpus, InputTemplate, Label, TemplateError};
use crate::hash::{derive_seed, fnv1a_seeded};
use crate::math::{exp, log_sigmoid, sigmoid, sqrt, clamp_probability};
use crate::scoring::{CoalitionScorer, Explanation, ExplanationSource, ScoreError, ScoreRequest, ScoreTarget};
use crate::token::{tokenize_with_limit, CoalitionMask, TokenSequence, TokenizeError};

/// Linear model over a hashed token-feature space. Classification
/// probability is logistic(weights . counts + bias); masked positions
/// contribute nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTextModel {
    pub dim: usize,
    pub hash_seed: u64,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearTextModel {
    pub fn zeros(dim: usize, hash_seed: u64) -> Self {
        Self { dim, hash_seed, weights: alloc::vec![0.0; dim], bias: 0.0 }
    }

    /// Identity diagonal metric; the contrastive starting point.
    pub fn ones(dim: usize, hash_seed: u64) -> Self {
        Self { dim, hash_seed, weights: alloc::vec![1.0; dim], bias: 0.0 }
    }

    pub fn bucket(&self, surface: &str) -> usize {
        (fnv1a_seeded(surface.as_bytes(), self.hash_seed) % self.dim as u64) as usize
    }

    /// Hashed counts of the visible, non-pad positions. Sorted by bucket,
    /// so downstream accumulation order is fixed.
    pub fn featurize(&self, sequence: &TokenSequence, mask: Option<&CoalitionMask>) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for i in 0..sequence.len() {
            if sequence.tokens[i] == sequence.pad_id {
                continue;
            }
            if let Some(mask) = mask {
                if !mask.visible[i] {
                    continue;
                }
            }
            *counts.entry(self.bucket(&sequence.surface[i])).or_insert(0.0) += 1.0;
        }
        counts.into_iter().collect()
    }

    pub fn margin_of(&self, features: &[(usize, f64)]) -> f64 {
        let mut z = self.bias;
        for &(bucket, count) in features {
            z += self.weights[bucket] * count;
        }
        z
    }

    pub fn phishing_probability(&self, sequence: &TokenSequence, mask: Option<&CoalitionMask>) -> f64 {
        sigmoid(self.margin_of(&self.featurize(sequence, mask)))
    }

    pub fn label_probability(&self, sequence: &TokenSequence, mask: Option<&CoalitionMask>, label: Label) -> f64 {
        let p = self.phishing_probability(sequence, mask);
        match label {
            Label::Phishing => p,
            Label::Legitimate => 1.0 - p,
        }
    }

    /// Predicted label and its probability on the full input. Ties resolve
    /// to LEGITIMATE so an untrained model is deterministic.
    pub fn predict(&self, sequence: &TokenSequence) -> (Label, f64) {
        let p = self.phishing_probability(sequence, None);
        if p > 0.5 {
            (Label::Phishing, p)
        } else {
            (Label::Legitimate, 1.0 - p)
        }
    }
}

/// Anchor/positive/negative inputs for the contrastive objective; positive
/// shares the anchor's label, negative has the opposite one.
#[derive(Debug, Clone)]
pub struct TripletBatch {
    pub anchor: TokenSequence,
    pub positive: TokenSequence,
    pub negative: TokenSequence,
}

/// A labeled input with the ground-truth label preferred over the other.
#[derive(Debug, Clone)]
pub struct PreferencePair {
    pub input: TokenSequence,
    pub preferred: Label,
    pub rejected: Label,
}

impl PreferencePair {
    pub fn new(input: TokenSequence, preferred: Label) -> Self {
        Self { input, preferred, rejected: preferred.opposite() }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: u32,
    pub dim: usize,
    pub hash_seed: u64,
    pub seed: u64,
    pub margin: f64,
    pub beta: f64,
    pub max_tokens: usize,
    pub template: InputTemplate,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 100,
            dim: 1 << 16,
            hash_seed: 0x7061645f,
            seed: 42,
            margin: 1.0,
            beta: 0.1,
            max_tokens: 256,
            template: InputTemplate::default(),
        }
    }
}

/// One metrics row; epoch 0 is the evaluation at initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u32,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LinearTextModel,
    pub metrics: Vec<EpochMetrics>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("loss diverged to a non-finite value at epoch {epoch}; lower the learning rate")]
    Diverged { epoch: u32 },
    #[error("{which} corpus is empty")]
    EmptyCorpus { which: &'static str },
    #[error("{which} corpus has no {label} records")]
    MissingClass { which: &'static str, label: Label },
    #[error("beta must be positive, got {0}")]
    BadBeta(f64),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
}

struct Example {
    features: Vec<(usize, f64)>,
    label: Label,
}

fn prepare(corpus: &Corpus, model: &LinearTextModel, config: &TrainConfig) -> Result<Vec<Example>, TrainError> {
    let mut out = Vec::with_capacity(corpus.len());
    for email in &corpus.records {
        let rendered = render_input(email, &config.template)?;
        let sequence = tokenize_with_limit(&rendered.text, config.max_tokens)?;
        out.push(Example { features: model.featurize(&sequence, None), label: email.label });
    }
    Ok(out)
}

fn bce_eval(model: &LinearTextModel, examples: &[Example]) -> (f64, f64) {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for example in examples {
        let z = model.margin_of(&example.features);
        loss += match example.label {
            Label::Phishing => -log_sigmoid(z),
            Label::Legitimate => -log_sigmoid(-z),
        };
        let predicted = if z > 0.0 { Label::Phishing } else { Label::Legitimate };
        if predicted == example.label {
            correct += 1;
        }
    }
    let n = examples.len().max(1) as f64;
    (loss / n, correct as f64 / n)
}

/// Binary cross-entropy training by full-batch gradient descent.
pub fn train_bce(train: &Corpus, val: &Corpus, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyCorpus { which: "train" });
    }
    if val.is_empty() {
        return Err(TrainError::EmptyCorpus { which: "validation" });
    }
    let mut model = LinearTextModel::zeros(config.dim, config.hash_seed);
    let train_examples = prepare(train, &model, config)?;
    let val_examples = prepare(val, &model, config)?;

    let mut metrics = Vec::with_capacity(config.epochs as usize + 1);
    let record = |model: &LinearTextModel, epoch: u32, metrics: &mut Vec<EpochMetrics>| {
        let (train_loss, train_acc) = bce_eval(model, &train_examples);
        let (val_loss, val_acc) = bce_eval(model, &val_examples);
        metrics.push(EpochMetrics { epoch, train_loss, val_loss, train_acc, val_acc });
    };
    record(&model, 0, &mut metrics);

    let m = train_examples.len() as f64;
    let mut gradient = alloc::vec![0.0f64; config.dim];
    for epoch in 1..=config.epochs {
        for g in gradient.iter_mut() {
            *g = 0.0;
        }
        let mut bias_gradient = 0.0;
        for example in &train_examples {
            let z = model.margin_of(&example.features);
            let y = match example.label {
                Label::Phishing => 1.0,
                Label::Legitimate => 0.0,
            };
            let residual = sigmoid(z) - y;
            for &(bucket, count) in &example.features {
                gradient[bucket] += residual * count;
            }
            bias_gradient += residual;
        }
        let step = config.learning_rate / m;
        for (w, g) in model.weights.iter_mut().zip(&gradient) {
            *w -= step * g;
        }
        model.bias -= step * bias_gradient;

        record(&model, epoch, &mut metrics);
        let row = metrics.last().unwrap();
        if !row.train_loss.is_finite() || !row.val_loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
    }
    Ok(TrainOutcome { model, metrics })
}

/// Euclidean distance between diagonal-metric embeddings of two feature
/// vectors: sqrt(sum_b w_b^2 (x_b - y_b)^2) over the union of supports.
fn metric_distance(model: &LinearTextModel, a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let mut sum = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let (bucket, delta) = if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            let entry = a[i];
            i += 1;
            (entry.0, entry.1)
        } else if i >= a.len() || b[j].0 < a[i].0 {
            let entry = b[j];
            j += 1;
            (entry.0, -entry.1)
        } else {
            let entry = (a[i].0, a[i].1 - b[j].1);
            i += 1;
            j += 1;
            entry
        };
        let scaled = model.weights[bucket] * delta;
        sum += scaled * scaled;
    }
    sqrt(sum)
}

/// Hinge triplet loss max(0, d(a,p) - d(a,n) + margin) under the model's
/// diagonal metric.
pub fn triplet_loss(model: &LinearTextModel, triplet: &TripletBatch, margin: f64) -> f64 {
    let anchor = model.featurize(&triplet.anchor, None);
    let positive = model.featurize(&triplet.positive, None);
    let negative = model.featurize(&triplet.negative, None);
    let dp = metric_distance(model, &anchor, &positive);
    let dn = metric_distance(model, &anchor, &negative);
    (dp - dn + margin).max(0.0)
}

struct PreparedTriplet {
    anchor: usize,
    positive: usize,
    negative: usize,
}

/// Uniform random positive/negative per anchor; seeded and deterministic.
fn mine_triplet_indices(examples: &[Example], seed: u64) -> Vec<PreparedTriplet> {
    let phishing: Vec<usize> = indices_of(examples, Label::Phishing);
    let ham: Vec<usize> = indices_of(examples, Label::Legitimate);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(examples.len());
    for (anchor, example) in examples.iter().enumerate() {
        let (same, other) = match example.label {
            Label::Phishing => (&phishing, &ham),
            Label::Legitimate => (&ham, &phishing),
        };
        let positive = loop {
            let candidate = same[rng.random_range(0..same.len())];
            if candidate != anchor || same.len() == 1 {
                break candidate;
            }
        };
        let negative = other[rng.random_range(0..other.len())];
        out.push(PreparedTriplet { anchor, positive, negative });
    }
    out
}

fn indices_of(examples: &[Example], label: Label) -> Vec<usize> {
    examples
        .iter()
        .enumerate()
        .filter(|(_, e)| e.label == label)
        .map(|(i, _)| i)
        .collect()
}

fn require_both_classes(examples: &[Example], which: &'static str) -> Result<(), TrainError> {
    for label in [Label::Phishing, Label::Legitimate] {
        if !examples.iter().any(|e| e.label == label) {
            return Err(TrainError::MissingClass { which, label });
        }
    }
    Ok(())
}

fn triplet_eval(
    model: &LinearTextModel,
    examples: &[Example],
    triplets: &[PreparedTriplet],
    margin: f64,
) -> (f64, f64) {
    let mut loss = 0.0;
    let mut satisfied = 0usize;
    for t in triplets {
        let dp = metric_distance(model, &examples[t.anchor].features, &examples[t.positive].features);
        let dn = metric_distance(model, &examples[t.anchor].features, &examples[t.negative].features);
        loss += (dp - dn + margin).max(0.0);
        if dp < dn {
            satisfied += 1;
        }
    }
    let n = triplets.len().max(1) as f64;
    (loss / n, satisfied as f64 / n)
}

/// Triplet-margin contrastive training. Triplets are re-mined every epoch
/// (uniform positive/negative per anchor, seeded); the metrics rows are
/// evaluated on fixed held-out triplet sets so the curves are comparable
/// across epochs. The acc columns report the fraction of triplets with
/// d(a,p) < d(a,n).
pub fn train_contrastive(train: &Corpus, val: &Corpus, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyCorpus { which: "train" });
    }
    if val.is_empty() {
        return Err(TrainError::EmptyCorpus { which: "validation" });
    }
    let mut model = LinearTextModel::ones(config.dim, config.hash_seed);
    let train_examples = prepare(train, &model, config)?;
    let val_examples = prepare(val, &model, config)?;
    require_both_classes(&train_examples, "train")?;
    require_both_classes(&val_examples, "validation")?;

    let train_eval = mine_triplet_indices(&train_examples, derive_seed(config.seed, 0xeea1));
    let val_eval = mine_triplet_indices(&val_examples, derive_seed(config.seed, 0xeea2));

    let mut metrics = Vec::with_capacity(config.epochs as usize + 1);
    let record = |model: &LinearTextModel, epoch: u32, metrics: &mut Vec<EpochMetrics>| {
        let (train_loss, train_acc) = triplet_eval(model, &train_examples, &train_eval, config.margin);
        let (val_loss, val_acc) = triplet_eval(model, &val_examples, &val_eval, config.margin);
        metrics.push(EpochMetrics { epoch, train_loss, val_loss, train_acc, val_acc });
    };
    record(&model, 0, &mut metrics);

    let mut gradient = alloc::vec![0.0f64; config.dim];
    for epoch in 1..=config.epochs {
        let triplets = mine_triplet_indices(&train_examples, derive_seed(config.seed, epoch as u64));
        for g in gradient.iter_mut() {
            *g = 0.0;
        }
        for t in &triplets {
            let anchor = &train_examples[t.anchor].features;
            let positive = &train_examples[t.positive].features;
            let negative = &train_examples[t.negative].features;
            let dp = metric_distance(&model, anchor, positive);
            let dn = metric_distance(&model, anchor, negative);
            if dp - dn + config.margin <= 0.0 {
                continue;
            }
            accumulate_distance_gradient(&model, anchor, positive, dp, 1.0, &mut gradient);
            accumulate_distance_gradient(&model, anchor, negative, dn, -1.0, &mut gradient);
        }
        let step = config.learning_rate / triplets.len().max(1) as f64;
        for (w, g) in model.weights.iter_mut().zip(&gradient) {
            *w -= step * g;
        }

        record(&model, epoch, &mut metrics);
        let row = metrics.last().unwrap();
        if !row.train_loss.is_finite() || !row.val_loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
    }
    Ok(TrainOutcome { model, metrics })
}

/// d(d(x,y))/d(w_b) = w_b (x_b - y_b)^2 / d, accumulated with `sign`.
fn accumulate_distance_gradient(
    model: &LinearTextModel,
    a: &[(usize, f64)],
    b: &[(usize, f64)],
    distance: f64,
    sign: f64,
    gradient: &mut [f64],
) {
    if distance == 0.0 {
        return;
    }
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let (bucket, delta) = if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            let entry = a[i];
            i += 1;
            (entry.0, entry.1)
        } else if i >= a.len() || b[j].0 < a[i].0 {
            let entry = b[j];
            j += 1;
            (entry.0, -entry.1)
        } else {
            let entry = (a[i].0, a[i].1 - b[j].1);
            i += 1;
            j += 1;
            entry
        };
        gradient[bucket] += sign * model.weights[bucket] * delta * delta / distance;
    }
}

/// Build (input, ground-truth preferred, opposite rejected) pairs.
pub fn preference_pairs(corpus: &Corpus, config: &TrainConfig) -> Result<Vec<PreferencePair>, TrainError> {
    let mut out = Vec::with_capacity(corpus.len());
    for email in &corpus.records {
        let rendered = render_input(email, &config.template)?;
        let sequence = tokenize_with_limit(&rendered.text, config.max_tokens)?;
        out.push(PreferencePair::new(sequence, email.label));
    }
    Ok(out)
}

struct PreparedPair {
    features: Vec<(usize, f64)>,
    preferred: Label,
}

fn dpo_pair_stats(
    policy: &LinearTextModel,
    reference_margin: f64,
    pair: &PreparedPair,
    beta: f64,
) -> (f64, f64, bool) {
    let z = policy.margin_of(&pair.features);
    let (log_win, log_lose, dir) = match pair.preferred {
        Label::Phishing => (log_sigmoid(z), log_sigmoid(-z), 1.0),
        Label::Legitimate => (log_sigmoid(-z), log_sigmoid(z), -1.0),
    };
    let (ref_win, ref_lose) = match pair.preferred {
        Label::Phishing => (log_sigmoid(reference_margin), log_sigmoid(-reference_margin)),
        Label::Legitimate => (log_sigmoid(-reference_margin), log_sigmoid(reference_margin)),
    };
    let h = beta * ((log_win - ref_win) - (log_lose - ref_lose));
    let loss = -log_sigmoid(h);
    // d(loss)/dz: d(log pi(w) - log pi(l))/dz is exactly +/-1, so the chain
    // collapses to -sigmoid(-h) * beta * dir.
    let dloss_dz = -sigmoid(-h) * beta * dir;
    (loss, dloss_dz, log_win > log_lose)
}

fn dpo_eval(policy: &LinearTextModel, reference: &LinearTextModel, pairs: &[PreparedPair], beta: f64) -> (f64, f64) {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for pair in pairs {
        let ref_z = reference.margin_of(&pair.features);
        let (l, _, preferred_wins) = dpo_pair_stats(policy, ref_z, pair, beta);
        loss += l;
        if preferred_wins {
            correct += 1;
        }
    }
    let n = pairs.len().max(1) as f64;
    (loss / n, correct as f64 / n)
}

/// Direct preference optimization against a frozen reference. The policy
/// starts as a copy of the reference, so the epoch-0 loss is exactly ln 2
/// per pair. The acc columns report how often the preferred label outscores
/// the rejected one.
pub fn train_dpo(
    pairs: &[PreferencePair],
    val_pairs: &[PreferencePair],
    reference: &LinearTextModel,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyCorpus { which: "train" });
    }
    if val_pairs.is_empty() {
        return Err(TrainError::EmptyCorpus { which: "validation" });
    }
    if config.beta <= 0.0 {
        return Err(TrainError::BadBeta(config.beta));
    }
    let mut policy = reference.clone();
    let prepared: Vec<PreparedPair> = pairs
        .iter()
        .map(|p| PreparedPair { features: policy.featurize(&p.input, None), preferred: p.preferred })
        .collect();
    let prepared_val: Vec<PreparedPair> = val_pairs
        .iter()
        .map(|p| PreparedPair { features: policy.featurize(&p.input, None), preferred: p.preferred })
        .collect();

    let mut metrics = Vec::with_capacity(config.epochs as usize + 1);
    let record = |policy: &LinearTextModel, epoch: u32, metrics: &mut Vec<EpochMetrics>| {
        let (train_loss, train_acc) = dpo_eval(policy, reference, &prepared, config.beta);
        let (val_loss, val_acc) = dpo_eval(policy, reference, &prepared_val, config.beta);
        metrics.push(EpochMetrics { epoch, train_loss, val_loss, train_acc, val_acc });
    };
    record(&policy, 0, &mut metrics);

    let m = prepared.len() as f64;
    let mut gradient = alloc::vec![0.0f64; config.dim];
    for epoch in 1..=config.epochs {
        for g in gradient.iter_mut() {
            *g = 0.0;
        }
        let mut bias_gradient = 0.0;
        for pair in &prepared {
            let ref_z = reference.margin_of(&pair.features);
            let (_, dloss_dz, _) = dpo_pair_stats(&policy, ref_z, pair, config.beta);
            for &(bucket, count) in &pair.features {
                gradient[bucket] += dloss_dz * count;
            }
            bias_gradient += dloss_dz;
        }
        let step = config.learning_rate / m;
        for (w, g) in policy.weights.iter_mut().zip(&gradient) {
            *w -= step * g;
        }
        policy.bias -= step * bias_gradient;

        record(&policy, epoch, &mut metrics);
        let row = metrics.last().unwrap();
        if !row.train_loss.is_finite() || !row.val_loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
    }
    Ok(TrainOutcome { model: policy, metrics })
}

/// Deterministic template explanation citing the top-k tokens by absolute
/// weight contribution. Tokens in zero-weight buckets never appear; k is
/// clamped to the number of contributing tokens.
pub fn generate_explanation(model: &LinearTextModel, sequence: &TokenSequence, k: usize) -> Explanation {
    let (label, _) = model.predict(sequence);
    let mut contributions: Vec<(String, f64)> = Vec::new();
    for i in 0..sequence.len() {
        if sequence.tokens[i] == sequence.pad_id || sequence.frozen[i] {
            continue;
        }
        let surface = &sequence.surface[i];
        match contributions.iter_mut().find(|(s, _)| s == surface) {
            Some((_, value)) => *value += model.weights[model.bucket(surface)],
            None => contributions.push((surface.clone(), model.weights[model.bucket(surface)])),
        }
    }
    contributions.retain(|(_, v)| *v != 0.0);
    // Stable by first occurrence, then by magnitude.
    let mut ranked: Vec<(usize, (String, f64))> = contributions.into_iter().enumerate().collect();
    ranked.sort_by(|(ia, (_, va)), (ib, (_, vb))| {
        vb.abs().partial_cmp(&va.abs()).unwrap_or(core::cmp::Ordering::Equal).then(ia.cmp(ib))
    });
    let cited: Vec<String> = ranked.into_iter().take(k.max(1)).map(|(_, (s, _))| s).collect();
    let text = alloc::format!("Classified as {} because of: {}", label, cited.join(", "));
    Explanation { text, tokens: cited }
}

/// The built-in audit backend: classification probabilities straight from
/// the model; explanation likelihood as the geometric mean over the cited
/// tokens of sigmoid(dir * weight * visible-count), where dir points toward
/// the model's own full-input prediction. Unmasking a cited token that
/// supports the prediction raises the likelihood, so the explanation-side
/// attribution concentrates on exactly the cited evidence.
pub struct ToyBackend {
    model: LinearTextModel,
    id: String,
    k_top: usize,
}

impl ToyBackend {
    pub fn new(model: LinearTextModel, k_top: usize) -> Self {
        Self { model, id: "toy".to_string(), k_top }
    }

    pub fn with_id(model: LinearTextModel, k_top: usize, id: impl Into<String>) -> Self {
        Self { model, id: id.into(), k_top }
    }

    pub fn model(&self) -> &LinearTextModel {
        &self.model
    }

    fn explanation_likelihood(&self, sequence: &TokenSequence, mask: &CoalitionMask, explanation: &Explanation) -> f64 {
        let (label, _) = self.model.predict(sequence);
        let dir = match label {
            Label::Phishing => 1.0,
            Label::Legitimate => -1.0,
        };
        let mut log_sum = 0.0;
        for token in &explanation.tokens {
            let weight = self.model.weights[self.model.bucket(token)];
            let visible_count = (0..sequence.len())
                .filter(|&i| {
                    mask.visible[i]
                        && sequence.tokens[i] != sequence.pad_id
                        && sequence.surface[i] == *token
                })
                .count() as f64;
            log_sum += log_sigmoid(dir * weight * visible_count);
        }
        exp(log_sum / explanation.tokens.len() as f64)
    }
}

impl CoalitionScorer for ToyBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        let value = match request.target {
            ScoreTarget::Classification(label) => {
                self.model.label_probability(request.sequence, Some(request.mask), *label)
            }
            ScoreTarget::Explanation(explanation) => {
                self.explanation_likelihood(request.sequence, request.mask, explanation)
            }
        };
        Ok(clamp_probability(value))
    }
}

impl ExplanationSource for ToyBackend {
    fn explain(&self, sequence: &TokenSequence, _predicted: Label) -> Result<Explanation, ScoreError> {
        Ok(generate_explanation(&self.model, sequence, self.k_top))
    }
}
