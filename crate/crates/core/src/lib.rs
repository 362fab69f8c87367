//! Core engine for auditing the consistency between a text classifier's
//! prediction and its generated explanation.
//!
//! Both the classification decision and the explanation are attributed back
//! to the input tokens with Shapley values (exact enumeration on small
//! inputs, seeded Monte Carlo permutation sampling otherwise). The two
//! attribution vectors are L1-normalized and compared with cosine
//! similarity; a score of 1 means the explanation cites exactly the evidence
//! that drove the decision.
//!
//! The crate is `no_std` + `alloc`: it holds the corpus transforms, the
//! tokenizer and masking contract, the Shapley engine, the consistency
//! score, and a self-contained trainable linear model. All float math goes
//! through `libm`, so results are bit-identical across platforms. File IO,
//! the CLI, and the remote-backend client live in the companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod ccshap;
pub mod clean;
pub mod corpus;
pub mod fixtures;
pub mod hash;
pub mod math;
pub mod model;
pub mod scoring;
pub mod shapley;
pub mod token;

pub use ccshap::{aggregate, audit_email, cc_shap_score, AuditOptions, CcShapReport, ClassSummary, Estimator};
pub use corpus::{balance, deduplicate, render_input, split, CleanEmail, Corpus, InputTemplate, Label, RawEmail};
pub use model::{generate_explanation, train_bce, train_contrastive, train_dpo, LinearTextModel, TrainConfig};
pub use scoring::{AuditBackend, CoalitionScorer, Explanation, ExplanationSource, ScoreRequest, ScoreTarget};
pub use shapley::{exact_shapley, mc_shapley, normalize_contributions, NormalizedShap, ShapVector};
pub use token::{apply_mask, tokenize, CoalitionMask, TokenSequence, PAD_ID};
