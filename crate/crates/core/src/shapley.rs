//! Per-token Shapley value estimation.
//!
//! Two routes to the same quantity: exact enumeration over all coalitions
//! of the attributable tokens (feasible up to `exact_limit`), and seeded
//! Monte Carlo permutation sampling. The sampler draws N uniform random
//! permutations of the token indices and, walking each permutation, credits
//! every token with the probability shift caused by unmasking it after its
//! predecessors; the mean over permutations is an unbiased estimate of the
//! exact value. Uniform-over-subsets sampling would not be — the coalition
//! a permutation induces for a token is distributed exactly as the Shapley
//! weights require.
//!
//! Frozen positions (prompt-template tokens) are visible in every coalition
//! and get no attribution.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::sqrt;
use crate::scoring::{CoalitionScorer, ScoreError, ScoreRequest, ScoreTarget};
use crate::token::{CoalitionMask, TokenSequence};

/// Default cap on exact enumeration (2^n scorer calls).
pub const DEFAULT_EXACT_LIMIT: usize = 14;

/// Per-token attributions for one (sequence, target) pair. `values[i]`
/// belongs to sequence position `token_indices[i]`; frozen positions do not
/// appear. `n_samples` is 0 for the exact route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapVector {
    pub target: String,
    pub n_samples: u32,
    pub baseline: f64,
    pub full_score: f64,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    #[serde(skip)]
    pub token_indices: Vec<usize>,
}

impl ShapVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Eq-style contribution ratios: each value divided by the L1 norm of all
/// values, so magnitudes sum to 1 and every entry lies in [-1, 1]. An
/// all-zero input has no direction; it comes back zeroed with the
/// `degenerate` flag set instead of erroring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedShap {
    pub ratios: Vec<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Error)]
pub enum ShapleyError {
    #[error("{n} attributable tokens exceed the exact limit {limit}; use mc_shapley")]
    TooManyTokens { n: usize, limit: usize },
    #[error("need at least one permutation sample")]
    NoSamples,
    #[error("scorer failed on mask {mask}: {source}")]
    ScoreFailed {
        mask: String,
        #[source]
        source: ScoreError,
    },
}

fn target_name(target: &ScoreTarget) -> String {
    match target {
        ScoreTarget::Classification(label) => alloc::format!("classification:{label}"),
        ScoreTarget::Explanation(_) => String::from("explanation"),
    }
}

fn mask_bits(mask: &CoalitionMask) -> String {
    mask.visible.iter().map(|&v| if v { '1' } else { '0' }).collect()
}

fn score_mask<S: CoalitionScorer + ?Sized>(
    scorer: &S,
    sequence: &TokenSequence,
    mask: &CoalitionMask,
    target: &ScoreTarget,
) -> Result<f64, ShapleyError> {
    let request = ScoreRequest::new(sequence, mask, target)
        .map_err(|source| ShapleyError::ScoreFailed { mask: mask_bits(mask), source })?;
    scorer
        .score(&request)
        .map_err(|source| ShapleyError::ScoreFailed { mask: mask_bits(mask), source })
}

/// Classical Shapley values by full coalition enumeration:
/// phi_j = sum over coalitions s not containing j of
/// |s|!(n-1-|s|)!/n! * (P(s+j) - P(s)). Deterministic; 2^n scorer calls.
pub fn exact_shapley<S: CoalitionScorer + ?Sized>(
    scorer: &S,
    sequence: &TokenSequence,
    target: &ScoreTarget,
    exact_limit: usize,
) -> Result<ShapVector, ShapleyError> {
    let free = sequence.free_indices();
    let n = free.len();
    if n > exact_limit {
        return Err(ShapleyError::TooManyTokens { n, limit: exact_limit });
    }

    // Score every coalition once, indexed by its bitmask over `free`.
    let mut scores = Vec::with_capacity(1usize << n);
    for bits in 0..(1u32 << n) {
        let mut mask = CoalitionMask::baseline_for(sequence);
        for (b, &pos) in free.iter().enumerate() {
            if bits >> b & 1 == 1 {
                mask.visible[pos] = true;
            }
        }
        scores.push(score_mask(scorer, sequence, &mask, target)?);
    }

    let weights = coalition_weights(n);
    let mut values = alloc::vec![0.0f64; n];
    for bits in 0..(1u32 << n) {
        let size = bits.count_ones() as usize;
        for (j, value) in values.iter_mut().enumerate() {
            if bits >> j & 1 == 0 {
                let with_j = bits | (1 << j);
                *value += weights[size] * (scores[with_j as usize] - scores[bits as usize]);
            }
        }
    }

    Ok(ShapVector {
        target: target_name(target),
        n_samples: 0,
        baseline: scores[0],
        full_score: *scores.last().unwrap_or(&0.0),
        values,
        stderr: alloc::vec![0.0; n],
        token_indices: free,
    })
}

/// |s|!(n-1-|s|)!/n! for |s| = 0..n-1 (index n unused but harmless).
fn coalition_weights(n: usize) -> Vec<f64> {
    let mut factorial = alloc::vec![1.0f64; n + 1];
    for i in 1..=n {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    (0..=n)
        .map(|s| {
            if s < n {
                factorial[s] * factorial[n - 1 - s] / factorial[n]
            } else {
                0.0
            }
        })
        .collect()
}

/// Options for the Monte Carlo estimator. With `antithetic` on, odd-indexed
/// permutations are the reverse of their predecessor, which cancels much of
/// the positional variance; turn it off when testing unbiasedness of the
/// raw sampler.
#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    pub n_samples: u32,
    pub seed: u64,
    pub antithetic: bool,
}

impl McOptions {
    pub fn new(n_samples: u32, seed: u64) -> Self {
        Self { n_samples, seed, antithetic: true }
    }
}

/// Monte Carlo permutation-sampling estimate of the Shapley values.
/// Deterministic per (seed, n_samples, antithetic): permutation p draws its
/// RNG from stream (seed, p), so results are independent of evaluation
/// schedule. Every permutation contributes one marginal per token; the mean
/// is the estimate and `stderr` carries the per-token standard error.
pub fn mc_shapley<S: CoalitionScorer + ?Sized>(
    scorer: &S,
    sequence: &TokenSequence,
    target: &ScoreTarget,
    options: McOptions,
) -> Result<ShapVector, ShapleyError> {
    if options.n_samples == 0 {
        return Err(ShapleyError::NoSamples);
    }
    let free = sequence.free_indices();
    let n = free.len();
    let n_samples = options.n_samples;

    let baseline_mask = CoalitionMask::baseline_for(sequence);
    let baseline = score_mask(scorer, sequence, &baseline_mask, target)?;
    let full_mask = CoalitionMask::all_visible(sequence.len());
    let full_score = score_mask(scorer, sequence, &full_mask, target)?;

    let mut sums = alloc::vec![0.0f64; n];
    let mut sum_squares = alloc::vec![0.0f64; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut previous_order: Vec<usize> = order.clone();

    for p in 0..n_samples {
        if options.antithetic && p % 2 == 1 {
            order.copy_from_slice(&previous_order);
            order.reverse();
        } else {
            let mut rng = ChaCha12Rng::seed_from_u64(crate::hash::derive_seed(options.seed, p as u64));
            order = (0..n).collect();
            order.shuffle(&mut rng);
            previous_order.copy_from_slice(&order);
        }

        let mut mask = baseline_mask.clone();
        let mut previous = baseline;
        for &j in &order {
            mask.visible[free[j]] = true;
            let score = score_mask(scorer, sequence, &mask, target)?;
            let marginal = score - previous;
            sums[j] += marginal;
            sum_squares[j] += marginal * marginal;
            previous = score;
        }
    }

    let count = n_samples as f64;
    let values: Vec<f64> = sums.iter().map(|s| s / count).collect();
    let stderr: Vec<f64> = if n_samples > 1 {
        values
            .iter()
            .zip(&sum_squares)
            .map(|(&mean, &ss)| {
                let variance = (ss - count * mean * mean).max(0.0) / (count - 1.0);
                sqrt(variance / count)
            })
            .collect()
    } else {
        alloc::vec![0.0; n]
    };

    Ok(ShapVector {
        target: target_name(target),
        n_samples,
        baseline,
        full_score,
        values,
        stderr,
        token_indices: free,
    })
}

/// Contribution ratios c_j = phi_j / sum_i |phi_i|. A zero vector is
/// returned zeroed with the degenerate flag set.
pub fn normalize_contributions(shap: &ShapVector) -> NormalizedShap {
    normalize_values(&shap.values)
}

/// L1-normalize a raw value vector; see [`normalize_contributions`].
pub fn normalize_values(values: &[f64]) -> NormalizedShap {
    let l1: f64 = values.iter().map(|v| v.abs()).sum();
    if l1 == 0.0 {
        return NormalizedShap { ratios: alloc::vec![0.0; values.len()], degenerate: true };
    }
    NormalizedShap { ratios: values.iter().map(|v| v / l1).collect(), degenerate: false }
}
