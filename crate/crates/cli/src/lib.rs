//! Corpus preparation, toy-model training, faithfulness audits, and report
//! emission around the `ccshap-core` engine. The `ccshap` binary exposes
//! the `ingest`, `train`, `audit`, and `verify` subcommands; everything it
//! does is also callable through this library (the integration tests drive
//! it that way).

pub mod backend;
pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod mail;
pub mod remote;
pub mod report;
