//! Tokenization and coalition masking.
//!
//! The built-in tokenizer lowercases and splits on word boundaries, keeping
//! punctuation as separate tokens. Hyphens and apostrophes between word
//! characters stay inside the token ("urgent-verify" is one token). Masking
//! replaces hidden positions with a reserved pad id and a `<mask>` surface
//! literal, preserving sequence length.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::fnv1a;

/// Reserved pad id; the tokenizer never assigns it to a real token.
pub const PAD_ID: u32 = u32::MAX;

/// Surface literal carried by masked positions, and by text rendered for
/// backends that consume prompts rather than token ids.
pub const MASK_LITERAL: &str = "<mask>";

#[derive(Debug, Error)]
pub enum TokenizeError {
    /// The cleaned text produced no tokens.
    #[error("nothing to attribute: text is empty after cleaning")]
    Empty,
}

/// A tokenized model input. `tokens` and `surface` are parallel; `frozen`
/// marks positions that stay visible in every coalition and are excluded
/// from attribution (prompt-template tokens, unless the audit is configured
/// to attribute them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<u32>,
    pub surface: Vec<String>,
    pub pad_id: u32,
    pub frozen: Vec<bool>,
    pub truncated: bool,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Positions subject to attribution (not frozen).
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.frozen[i]).collect()
    }

    /// Stable digest over ids and frozen bits, for cache keys.
    pub fn digest(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.len() * 5);
        for (&id, &frozen) in self.tokens.iter().zip(&self.frozen) {
            bytes.extend_from_slice(&id.to_le_bytes());
            bytes.push(frozen as u8);
        }
        fnv1a(&bytes)
    }

    /// Render the sequence as prompt text with hidden positions replaced by
    /// the mask literal. Surfaces are joined by single spaces.
    pub fn masked_text(&self, mask: &CoalitionMask) -> String {
        let parts: Vec<&str> = self
            .surface
            .iter()
            .enumerate()
            .map(|(i, s)| if mask.visible[i] { s.as_str() } else { MASK_LITERAL })
            .collect();
        parts.join(" ")
    }
}

/// Visibility bitset over one token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoalitionMask {
    pub visible: Vec<bool>,
}

impl CoalitionMask {
    pub fn all_visible(n: usize) -> Self {
        Self { visible: alloc::vec![true; n] }
    }

    pub fn all_hidden(n: usize) -> Self {
        Self { visible: alloc::vec![false; n] }
    }

    /// Everything hidden except the frozen positions. This is the "empty
    /// coalition" during attribution.
    pub fn baseline_for(seq: &TokenSequence) -> Self {
        Self { visible: seq.frozen.clone() }
    }

    pub fn len(&self) -> usize {
        self.visible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty()
    }

    pub fn count_visible(&self) -> usize {
        self.visible.iter().filter(|&&v| v).count()
    }

    pub fn digest(&self) -> u64 {
        let bytes: Vec<u8> = self.visible.iter().map(|&v| v as u8).collect();
        fnv1a(&bytes)
    }
}

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("mask length {mask} does not match sequence length {sequence}")]
    LengthMismatch { sequence: usize, mask: usize },
}

/// Replace hidden positions with the pad id (and the `<mask>` surface
/// literal); visible positions pass through untouched.
pub fn apply_mask(sequence: &TokenSequence, mask: &CoalitionMask) -> Result<TokenSequence, MaskError> {
    if sequence.len() != mask.len() {
        return Err(MaskError::LengthMismatch { sequence: sequence.len(), mask: mask.len() });
    }
    let mut out = sequence.clone();
    for i in 0..out.len() {
        if !mask.visible[i] {
            out.tokens[i] = out.pad_id;
            out.surface[i] = MASK_LITERAL.to_string();
        }
    }
    Ok(out)
}

/// Tokenize plain text with no length cap and no frozen positions.
pub fn tokenize(text: &str) -> Result<TokenSequence, TokenizeError> {
    tokenize_spans(text, &[(0, text.len())], None)
}

/// Tokenize with a budget: at most `max_tokens` tokens are kept (tail
/// truncated) and the `truncated` flag records whether the cap bit.
pub fn tokenize_with_limit(text: &str, max_tokens: usize) -> Result<TokenSequence, TokenizeError> {
    tokenize_spans(text, &[(0, text.len())], Some(max_tokens))
}

/// Tokenize `text` where only byte ranges in `attributable` produce free
/// tokens; everything outside (prompt-template scaffolding) is frozen.
/// Ranges must be non-overlapping and ascending.
pub fn tokenize_spans(
    text: &str,
    attributable: &[(usize, usize)],
    max_tokens: Option<usize>,
) -> Result<TokenSequence, TokenizeError> {
    let mut tokens = Vec::new();
    let mut surface = Vec::new();
    let mut frozen = Vec::new();
    let mut truncated = false;

    for raw in split_tokens(text) {
        if let Some(cap) = max_tokens {
            if tokens.len() >= cap {
                truncated = true;
                break;
            }
        }
        let lowered: String = raw.text.chars().flat_map(char::to_lowercase).collect();
        let inside = attributable
            .iter()
            .any(|&(start, end)| raw.start >= start && raw.end <= end);
        tokens.push(token_id(&lowered));
        surface.push(lowered);
        frozen.push(!inside);
    }

    if tokens.is_empty() {
        return Err(TokenizeError::Empty);
    }
    Ok(TokenSequence { tokens, surface, pad_id: PAD_ID, frozen, truncated })
}

/// Hash a surface into [0, u32::MAX), which can never collide with PAD_ID.
fn token_id(surface: &str) -> u32 {
    (fnv1a(surface.as_bytes()) % (u32::MAX as u64)) as u32
}

struct RawToken<'a> {
    text: &'a str,
    start: usize,
    end: usize,
}

/// Word tokens are alphanumeric runs, optionally joined by single interior
/// hyphens/apostrophes; any other non-whitespace char is its own token.
fn split_tokens(text: &str) -> Vec<RawToken<'_>> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let mut i = 0;
    while i < n {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_alphanumeric() {
            let mut j = i + 1;
            while j < n {
                let cj = chars[j].1;
                if cj.is_alphanumeric() {
                    j += 1;
                } else if (cj == '-' || cj == '\'')
                    && j + 1 < n
                    && chars[j + 1].1.is_alphanumeric()
                {
                    j += 2;
                } else {
                    break;
                }
            }
            let end = if j < n { chars[j].0 } else { text.len() };
            out.push(RawToken { text: &text[pos..end], start: pos, end });
            i = j;
        } else {
            let end = if i + 1 < n { chars[i + 1].0 } else { text.len() };
            out.push(RawToken { text: &text[pos..end], start: pos, end });
            i += 1;
        }
    }
    out
}
