//! Deterministic fixtures: analytic coalition scorers with known Shapley
//! values, a synthetic separable email corpus, and the standard oracle
//! suite behind `verify`. These live in the library (not test code) because
//! the verification subcommand runs them at audit time.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::corpus::{split, CleanEmail, Corpus, Label};
use crate::hash::derive_seed;
use crate::math::clamp_probability;
use crate::model::{train_bce, LinearTextModel, ToyBackend, TrainConfig};
use crate::scoring::{CoalitionScorer, Explanation, ExplanationSource, ScoreError, ScoreRequest, ScoreTarget};
use crate::token::{tokenize, TokenSequence};

/// n distinct word tokens "t0 t1 ...", no frozen positions.
pub fn plain_sequence(n: usize) -> TokenSequence {
    let text: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
    tokenize(&text.join(" ")).expect("nonempty")
}

/// Ignores the mask entirely; every Shapley value is exactly zero.
pub struct ConstantScorer {
    value: f64,
}

impl ConstantScorer {
    pub fn new(value: f64) -> Self {
        Self { value }
    }
}

impl CoalitionScorer for ConstantScorer {
    fn backend_id(&self) -> &str {
        "fixture:constant"
    }

    fn score(&self, _request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        Ok(clamp_probability(self.value))
    }
}

/// P(s) = base + sum of per-position weights over visible positions. By the
/// additivity axiom the Shapley value of position i is exactly weights[i].
pub struct AdditiveScorer {
    base: f64,
    weights: Vec<f64>,
}

impl AdditiveScorer {
    pub fn new(base: f64, weights: Vec<f64>) -> Self {
        Self { base, weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl CoalitionScorer for AdditiveScorer {
    fn backend_id(&self) -> &str {
        "fixture:additive"
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        let mut p = self.base;
        for (visible, weight) in request.mask.visible.iter().zip(&self.weights) {
            if *visible {
                p += weight;
            }
        }
        Ok(clamp_probability(p))
    }
}

/// Symmetric in positions `first` and `second` (each contributes the same
/// pair weight); every other position carries a distinct small weight so
/// the rest of the vector is not accidentally symmetric too.
pub struct SymmetricPairScorer {
    pub first: usize,
    pub second: usize,
}

impl CoalitionScorer for SymmetricPairScorer {
    fn backend_id(&self) -> &str {
        "fixture:symmetric-pair"
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        let mut p = 0.2;
        for (i, visible) in request.mask.visible.iter().enumerate() {
            if !visible {
                continue;
            }
            if i == self.first || i == self.second {
                p += 0.15;
            } else {
                p += 0.01 * (i + 1) as f64;
            }
        }
        Ok(clamp_probability(p))
    }
}

/// Ignores position `dummy` completely (its marginal contribution is zero
/// in every coalition) and responds nonlinearly to the count of the others,
/// so the fixture is not additive.
pub struct PlantedDummyScorer {
    pub dummy: usize,
}

impl CoalitionScorer for PlantedDummyScorer {
    fn backend_id(&self) -> &str {
        "fixture:planted-dummy"
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        let n = request.mask.len();
        let relevant = (n - 1).max(1) as f64;
        let visible = request
            .mask
            .visible
            .iter()
            .enumerate()
            .filter(|&(i, &v)| v && i != self.dummy)
            .count() as f64;
        let fraction = visible / relevant;
        Ok(clamp_probability(0.1 + 0.6 * fraction + 0.2 * fraction * fraction))
    }
}

const SHARED_WORDS: &[&str] = &[
    "please", "the", "your", "account", "team", "today", "for", "and", "with", "this", "we",
    "have", "about", "you",
];
const PHISHING_WORDS: &[&str] = &[
    "suspended", "password", "immediately", "winner", "claim", "refund", "confirm", "security",
];
const HAM_WORDS: &[&str] = &[
    "meeting", "agenda", "quarterly", "report", "schedule", "lunch", "project", "budget",
];

/// Linearly separable synthetic corpus: every phishing body contains the
/// token "urgent-verify", no ham body ever does. Each record carries a
/// unique ref token so content hashes never collide.
pub fn synthetic_corpus(per_class: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0x5e));
    let mut records = Vec::with_capacity(per_class * 2);
    for i in 0..per_class {
        let body = synth_body(&mut rng, true, i);
        let subject = format!("{} {}", pick(&mut rng, PHISHING_WORDS), pick(&mut rng, SHARED_WORDS));
        records.push(CleanEmail::new(
            format!("alerts{}@secure-notify.example", i % 7),
            subject,
            body,
            Label::Phishing,
        ));
    }
    for i in 0..per_class {
        let body = synth_body(&mut rng, false, i);
        let subject = format!("{} {}", pick(&mut rng, HAM_WORDS), pick(&mut rng, SHARED_WORDS));
        records.push(CleanEmail::new(
            format!("colleague{}@corp.example", i % 7),
            subject,
            body,
            Label::Legitimate,
        ));
    }
    Corpus::new(records)
}

fn pick<'a>(rng: &mut ChaCha12Rng, pool: &'a [&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

fn synth_body(rng: &mut ChaCha12Rng, phishing: bool, index: usize) -> String {
    let class_pool = if phishing { PHISHING_WORDS } else { HAM_WORDS };
    let length = rng.random_range(8..=14);
    let mut words: Vec<String> = (0..length)
        .map(|_| {
            if rng.random_range(0..10) < 4 {
                pick(rng, class_pool).to_string()
            } else {
                pick(rng, SHARED_WORDS).to_string()
            }
        })
        .collect();
    if phishing {
        let at = rng.random_range(0..=words.len());
        words.insert(at, "urgent-verify".to_string());
    }
    words.push(format!("ref-{index}"));
    words.join(" ")
}

/// Small, fast BCE model trained on the synthetic corpus; shared by the
/// trained-model fixture and the audit tests.
pub fn trained_toy_model(seed: u64) -> LinearTextModel {
    let corpus = synthetic_corpus(16, seed);
    let (train, val) = split(&corpus, 0.75, seed).expect("split fixture");
    let config = TrainConfig { epochs: 40, dim: 1 << 12, ..TrainConfig::default() };
    train_bce(&train, &val, &config).expect("fixture training converges").model
}

/// A backend whose explanation scorer IS the classification scorer (of the
/// model's own predicted label). Both attribution vectors are then computed
/// from the same function, so CC-SHAP is exactly 1: the analytic
/// upper-bound sentinel.
pub struct SelfConsistentBackend {
    inner: ToyBackend,
}

impl SelfConsistentBackend {
    pub fn new(model: LinearTextModel, k_top: usize) -> Self {
        Self { inner: ToyBackend::with_id(model, k_top, "toy-self-consistent") }
    }
}

impl CoalitionScorer for SelfConsistentBackend {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        match request.target {
            ScoreTarget::Classification(_) => self.inner.score(request),
            ScoreTarget::Explanation(_) => {
                let (predicted, _) = self.inner.model().predict(request.sequence);
                let target = ScoreTarget::Classification(predicted);
                let rewritten = ScoreRequest::new(request.sequence, request.mask, &target)?;
                self.inner.score(&rewritten)
            }
        }
    }
}

impl ExplanationSource for SelfConsistentBackend {
    fn explain(&self, sequence: &TokenSequence, predicted: Label) -> Result<Explanation, ScoreError> {
        self.inner.explain(sequence, predicted)
    }
}

/// A backend whose explanation scorer is constant, so the explanation-side
/// attribution is identically zero: the degenerate guard path.
pub struct ConstantExplanationBackend {
    inner: ToyBackend,
}

impl ConstantExplanationBackend {
    pub fn new(model: LinearTextModel, k_top: usize) -> Self {
        Self { inner: ToyBackend::with_id(model, k_top, "toy-constant-explanation") }
    }
}

impl CoalitionScorer for ConstantExplanationBackend {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        match request.target {
            ScoreTarget::Classification(_) => self.inner.score(request),
            ScoreTarget::Explanation(_) => Ok(0.5),
        }
    }
}

impl ExplanationSource for ConstantExplanationBackend {
    fn explain(&self, sequence: &TokenSequence, predicted: Label) -> Result<Explanation, ScoreError> {
        self.inner.explain(sequence, predicted)
    }
}

/// One oracle-suite entry: a scorer with a sequence and target to attribute.
pub struct VerifyFixture {
    pub name: &'static str,
    pub sequence: TokenSequence,
    pub scorer: Box<dyn CoalitionScorer>,
    pub target: ScoreTarget,
}

/// The standard five-fixture oracle suite (constant, additive,
/// symmetric-pair, planted-dummy, trained toy model) over 6-12 token
/// inputs.
pub fn standard_suite(seed: u64) -> Vec<VerifyFixture> {
    let classification = ScoreTarget::Classification(Label::Phishing);
    let mut suite: Vec<VerifyFixture> = Vec::new();

    suite.push(VerifyFixture {
        name: "constant",
        sequence: plain_sequence(8),
        scorer: Box::new(ConstantScorer::new(0.5)),
        target: classification.clone(),
    });

    let weights: Vec<f64> = (0..10).map(|i| 0.01 * (i + 1) as f64).collect();
    suite.push(VerifyFixture {
        name: "additive",
        sequence: plain_sequence(10),
        scorer: Box::new(AdditiveScorer::new(0.05, weights)),
        target: classification.clone(),
    });

    suite.push(VerifyFixture {
        name: "symmetric-pair",
        sequence: plain_sequence(9),
        scorer: Box::new(SymmetricPairScorer { first: 0, second: 1 }),
        target: classification.clone(),
    });

    suite.push(VerifyFixture {
        name: "planted-dummy",
        sequence: plain_sequence(7),
        scorer: Box::new(PlantedDummyScorer { dummy: 3 }),
        target: classification.clone(),
    });

    let model = trained_toy_model(seed);
    let sequence = tokenize("urgent-verify your account password suspended today please act").expect("tokens");
    let backend = ToyBackend::with_id(model, 5, "fixture:trained-toy");
    suite.push(VerifyFixture {
        name: "trained-toy",
        sequence,
        scorer: Box::new(backend),
        target: classification,
    });

    suite
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_corpus_is_separable_and_unique() {
        let corpus = synthetic_corpus(25, 3);
        assert_eq!(corpus.count(Label::Phishing), 25);
        assert_eq!(corpus.count(Label::Legitimate), 25);
        for record in &corpus.records {
            let has_marker = record.body.contains("urgent-verify");
            assert_eq!(has_marker, record.label == Label::Phishing, "body: {}", record.body);
        }
        let deduped = crate::corpus::deduplicate(&corpus.records);
        assert_eq!(deduped.len(), corpus.len());
    }

    #[test]
    fn synthetic_corpus_is_deterministic() {
        assert_eq!(synthetic_corpus(5, 9), synthetic_corpus(5, 9));
        assert_ne!(synthetic_corpus(5, 9), synthetic_corpus(5, 10));
    }

    #[test]
    fn suite_sizes_are_in_range() {
        for fixture in standard_suite(7) {
            let n = fixture.sequence.free_indices().len();
            assert!((6..=12).contains(&n), "{} has {} tokens", fixture.name, n);
        }
    }
}
