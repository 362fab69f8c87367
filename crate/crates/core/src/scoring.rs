//! The black-box coalition-scoring contract the Shapley engine consumes.
//!
//! A scorer maps (sequence, visibility mask, target) to a probability in
//! [1e-9, 1-1e-9]. The classification target asks for the probability of a
//! label given the masked input; the explanation target asks for the
//! length-normalized likelihood of the explanation given the masked input
//! (geometric mean of per-token probabilities, so scores are comparable
//! across explanation lengths). Scorers must be pure within one audit
//! session: identical requests yield identical scores.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::hash::{fnv1a, fnv1a_seeded};
use crate::token::{CoalitionMask, TokenSequence};

/// A generated explanation. `text` is what a text-in backend scores as a
/// continuation; `tokens` is the unit list a token-level backend scores
/// (for the built-in model, the cited tokens).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub text: String,
    pub tokens: Vec<String>,
}

impl Explanation {
    pub fn is_degenerate(&self) -> bool {
        self.text.trim().is_empty() || self.tokens.is_empty()
    }

    pub fn digest(&self) -> u64 {
        fnv1a_seeded(self.text.as_bytes(), 0x45)
    }
}

/// What the probability is being asked about.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreTarget {
    Classification(Label),
    Explanation(Explanation),
}

impl ScoreTarget {
    pub fn digest(&self) -> u64 {
        match self {
            ScoreTarget::Classification(label) => fnv1a_seeded(label.as_str().as_bytes(), 0xc1),
            ScoreTarget::Explanation(e) => e.digest(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScoreError {
    /// Remote transport failure after retries; retryable at a higher level.
    #[error("transport: {0}")]
    Transport(String),
    /// The backend answered but the answer is unusable.
    #[error("backend: {0}")]
    Backend(String),
    /// Caller broke the scoring contract (length mismatch, empty target).
    #[error("contract violation: {0}")]
    Contract(String),
}

/// One scoring request. The mask must match the sequence length, and an
/// explanation target must carry at least one token.
#[derive(Debug, Clone)]
pub struct ScoreRequest<'a> {
    pub sequence: &'a TokenSequence,
    pub mask: &'a CoalitionMask,
    pub target: &'a ScoreTarget,
}

impl<'a> ScoreRequest<'a> {
    pub fn new(
        sequence: &'a TokenSequence,
        mask: &'a CoalitionMask,
        target: &'a ScoreTarget,
    ) -> Result<Self, ScoreError> {
        if sequence.len() != mask.len() {
            return Err(ScoreError::Contract(alloc::format!(
                "mask length {} does not match sequence length {}",
                mask.len(),
                sequence.len()
            )));
        }
        if let ScoreTarget::Explanation(e) = target {
            if e.tokens.is_empty() {
                return Err(ScoreError::Contract("explanation target has no tokens".into()));
            }
        }
        Ok(Self { sequence, mask, target })
    }
}

/// A probability oracle over masked inputs. Implementations clamp their
/// output with [`crate::math::clamp_probability`] and never return NaN.
pub trait CoalitionScorer {
    /// Stable identifier mixed into cache keys.
    fn backend_id(&self) -> &str;

    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError>;
}

/// Produces the explanation whose likelihood the explanation-side audit
/// attributes.
pub trait ExplanationSource {
    fn explain(&self, sequence: &TokenSequence, predicted: Label) -> Result<Explanation, ScoreError>;
}

/// Full backend surface the audit pipeline needs.
pub trait AuditBackend: CoalitionScorer + ExplanationSource {}

impl<T: CoalitionScorer + ExplanationSource> AuditBackend for T {}

/// Cache key: (backend, sequence, mask bits, target) digests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CacheKey {
    pub backend: u64,
    pub sequence: u64,
    pub mask: u64,
    pub target: u64,
}

impl CacheKey {
    pub fn for_request(backend_id: &str, request: &ScoreRequest<'_>) -> Self {
        Self {
            backend: fnv1a(backend_id.as_bytes()),
            sequence: request.sequence.digest(),
            mask: request.mask.digest(),
            target: request.target.digest(),
        }
    }
}

/// Score memo. Implementations must return stored values bit-exact and
/// tolerate concurrent insertion of the same key (values are identical by
/// scorer purity, so last-write-wins is safe).
pub trait ScoreCache {
    fn get(&self, key: &CacheKey) -> Option<f64>;
    fn put(&self, key: CacheKey, value: f64);
}

/// In-memory cache for single-threaded use (tests, the exact oracle).
#[derive(Debug, Default)]
pub struct MemoryCache {
    entries: core::cell::RefCell<alloc::collections::BTreeMap<CacheKey, f64>>,
}

impl MemoryCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.borrow().is_empty()
    }
}

impl ScoreCache for MemoryCache {
    fn get(&self, key: &CacheKey) -> Option<f64> {
        self.entries.borrow().get(key).copied()
    }

    fn put(&self, key: CacheKey, value: f64) {
        self.entries.borrow_mut().insert(key, value);
    }
}

/// Memoizing wrapper: hits return the stored value bit-exact, misses
/// delegate and store. Also counts delegated calls, which the coalition
/// tests use to bound backend traffic.
pub struct CachedScorer<'a, S: ?Sized, C> {
    scorer: &'a S,
    cache: &'a C,
    calls: core::cell::Cell<u64>,
}

impl<'a, S: CoalitionScorer + ?Sized, C: ScoreCache> CachedScorer<'a, S, C> {
    pub fn new(scorer: &'a S, cache: &'a C) -> Self {
        Self { scorer, cache, calls: core::cell::Cell::new(0) }
    }

    /// Number of requests that reached the inner scorer.
    pub fn backend_calls(&self) -> u64 {
        self.calls.get()
    }
}

impl<S: CoalitionScorer + ?Sized, C: ScoreCache> CoalitionScorer for CachedScorer<'_, S, C> {
    fn backend_id(&self) -> &str {
        self.scorer.backend_id()
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        let key = CacheKey::for_request(self.scorer.backend_id(), request);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let value = self.scorer.score(request)?;
        if !value.is_finite() {
            return Err(ScoreError::Backend(alloc::format!("non-finite score {value}")));
        }
        self.calls.set(self.calls.get() + 1);
        self.cache.put(key, value);
        Ok(value)
    }
}
