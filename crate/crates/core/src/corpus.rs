//! Email corpus types and the pure corpus transforms: record cleaning,
//! deduplication, class balancing, stratified splitting, and prompt
//! rendering. File-format loaders live in the companion crate.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clean::clean_text;
use crate::hash::fnv1a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "PHISHING")]
    Phishing,
    #[serde(rename = "LEGITIMATE")]
    Legitimate,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Phishing => "PHISHING",
            Label::Legitimate => "LEGITIMATE",
        }
    }

    pub fn opposite(&self) -> Label {
        match self {
            Label::Phishing => Label::Legitimate,
            Label::Legitimate => Label::Phishing,
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s.trim().to_uppercase().as_str() {
            "PHISHING" | "PHISH" | "SPAM" | "1" => Some(Label::Phishing),
            "LEGITIMATE" | "HAM" | "LEGIT" | "0" => Some(Label::Legitimate),
            _ => None,
        }
    }
}

impl core::fmt::Display for Label {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a raw record came from, which decides its label when the source
/// format carries none (class-pure mbox/eml collections).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    PhishingSource,
    HamSource,
    Unlabeled,
}

/// An email as ingested, before any cleaning. `body_raw` is byte-exact from
/// the input.
#[derive(Debug, Clone)]
pub struct RawEmail {
    pub source_id: String,
    pub headers: Vec<(String, String)>,
    pub body_raw: String,
    pub origin: Origin,
}

impl RawEmail {
    /// Case-insensitive header lookup; first match wins.
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// The audit unit: a cleaned, labeled email.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanEmail {
    pub sender: String,
    pub subject: String,
    pub body: String,
    pub label: Label,
    pub content_hash: u64,
}

impl CleanEmail {
    pub fn new(sender: String, subject: String, body: String, label: Label) -> Self {
        let content_hash = content_hash(&sender, &subject, &body);
        Self { sender, subject, body, label, content_hash }
    }

    /// Hex id used in reports and seed derivation.
    pub fn id(&self) -> String {
        format!("{:016x}", self.content_hash)
    }
}

/// Digest of the case-folded, whitespace-normalized (sender, subject, body)
/// triple; this is the duplicate identity.
pub fn content_hash(sender: &str, subject: &str, body: &str) -> u64 {
    let mut normalized = String::new();
    for (i, field) in [sender, subject, body].iter().enumerate() {
        if i > 0 {
            normalized.push('\u{1f}');
        }
        let folded: String = field.to_lowercase();
        let words: Vec<&str> = folded.split_whitespace().collect();
        normalized.push_str(&words.join(" "));
    }
    fnv1a(normalized.as_bytes())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub records: Vec<CleanEmail>,
}

impl Corpus {
    pub fn new(records: Vec<CleanEmail>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    pub fn class_counts(&self) -> [(Label, usize); 2] {
        [
            (Label::Phishing, self.count(Label::Phishing)),
            (Label::Legitimate, self.count(Label::Legitimate)),
        ]
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("class {label} has only {available} records, need {requested}")]
    InsufficientClass { label: Label, available: usize, requested: usize },
    #[error("train fraction must be inside (0, 1), got {0}")]
    BadFraction(f64),
    #[error("corpus is empty")]
    Empty,
}

/// Why a raw record was excluded from the corpus; these feed the skip report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    EmptyBody,
    Unlabeled,
    NonEnglish,
    Malformed(String),
}

impl core::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SkipReason::EmptyBody => f.write_str("body empty after cleaning"),
            SkipReason::Unlabeled => f.write_str("no label"),
            SkipReason::NonEnglish => f.write_str("stopword ratio below threshold"),
            SkipReason::Malformed(detail) => write!(f, "malformed: {detail}"),
        }
    }
}

/// Knobs for the raw-to-clean transform.
#[derive(Debug, Clone)]
pub struct CleanOptions {
    /// Drop records whose body stopword ratio falls below this.
    pub stopword_threshold: f64,
    /// Bodies shorter than this many tokens skip the language check.
    pub language_check_min_tokens: usize,
}

impl Default for CleanOptions {
    fn default() -> Self {
        Self { stopword_threshold: 0.02, language_check_min_tokens: 20 }
    }
}

/// High-frequency English function words; enough for a coarse language gate.
const STOPWORDS: &[&str] = &[
    "the", "be", "to", "of", "and", "a", "an", "in", "that", "have", "has", "had", "i", "it",
    "for", "not", "on", "with", "he", "she", "as", "you", "your", "do", "at", "this", "but",
    "his", "her", "by", "from", "they", "we", "say", "or", "will", "my", "one", "all", "would",
    "there", "their", "what", "so", "up", "out", "if", "about", "who", "get", "which", "go",
    "me", "when", "can", "like", "no", "just", "him", "know", "take", "into", "is", "are",
    "was", "were", "been", "our", "us", "please", "dear", "thanks", "thank", "regards",
];

/// Turn a raw record into a clean one, or say why it cannot be used.
pub fn clean_email(raw: &RawEmail, options: &CleanOptions) -> Result<CleanEmail, SkipReason> {
    let label = match raw.origin {
        Origin::PhishingSource => Label::Phishing,
        Origin::HamSource => Label::Legitimate,
        Origin::Unlabeled => return Err(SkipReason::Unlabeled),
    };
    let sender = clean_text(raw.header("from").unwrap_or(""));
    let subject = clean_text(raw.header("subject").unwrap_or(""));
    let body = clean_text(&raw.body_raw);
    if body.is_empty() && subject.is_empty() {
        return Err(SkipReason::EmptyBody);
    }
    if !looks_english(&body, options) {
        return Err(SkipReason::NonEnglish);
    }
    Ok(CleanEmail::new(sender, subject, body, label))
}

fn looks_english(body: &str, options: &CleanOptions) -> bool {
    let words: Vec<String> = body
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect();
    if words.len() < options.language_check_min_tokens {
        return true;
    }
    let hits = words.iter().filter(|w| STOPWORDS.contains(&w.as_str())).count();
    hits as f64 / words.len() as f64 >= options.stopword_threshold
}

/// Keep the first occurrence of each content hash, preserving order.
pub fn deduplicate(records: &[CleanEmail]) -> Vec<CleanEmail> {
    let mut seen = alloc::collections::BTreeSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.content_hash))
        .cloned()
        .collect()
}

/// Seeded uniform downsample to exactly `per_class` records per class,
/// preserving the input's relative order among the kept records.
pub fn balance(corpus: &Corpus, per_class: usize, seed: u64) -> Result<Corpus, CorpusError> {
    for (label, available) in corpus.class_counts() {
        if available < per_class {
            return Err(CorpusError::InsufficientClass { label, available, requested: per_class });
        }
    }
    let mut keep = alloc::vec![false; corpus.len()];
    for label in [Label::Phishing, Label::Legitimate] {
        let members: Vec<usize> = corpus
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect();
        let mut rng = ChaCha12Rng::seed_from_u64(crate::hash::derive_seed(seed, 0x42a1 + label as u64));
        for picked in sample(&mut rng, members.len(), per_class) {
            keep[members[picked]] = true;
        }
    }
    let records = corpus
        .records
        .iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(_, r)| r.clone())
        .collect();
    Ok(Corpus::new(records))
}

/// Stratified train/validation split. Train and validation are disjoint and
/// their union is the input; each class splits independently at
/// `train_fraction` (rounded). Deterministic per seed.
pub fn split(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<(Corpus, Corpus), CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::BadFraction(train_fraction));
    }
    let mut train_keep = alloc::vec![false; corpus.len()];
    for label in [Label::Phishing, Label::Legitimate] {
        let members: Vec<usize> = corpus
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        let n_train = libm::round(train_fraction * members.len() as f64) as usize;
        let n_train = n_train.min(members.len());
        let mut rng = ChaCha12Rng::seed_from_u64(crate::hash::derive_seed(seed, 0x5911 + label as u64));
        for picked in sample(&mut rng, members.len(), n_train) {
            train_keep[members[picked]] = true;
        }
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (i, record) in corpus.records.iter().enumerate() {
        if train_keep[i] {
            train.push(record.clone());
        } else {
            val.push(record.clone());
        }
    }
    Ok((Corpus::new(train), Corpus::new(val)))
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template is missing the {{{0}}} placeholder")]
    MissingPlaceholder(&'static str),
}

/// Prompt template with `{sender}`, `{subject}`, `{body}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputTemplate {
    pub text: String,
}

impl Default for InputTemplate {
    fn default() -> Self {
        Self { text: "From: {sender}\nSubject: {subject}\n{body}".to_string() }
    }
}

impl InputTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        for name in ["sender", "subject", "body"] {
            if !self.text.contains(&format!("{{{name}}}")) {
                return Err(TemplateError::MissingPlaceholder(match name {
                    "sender" => "sender",
                    "subject" => "subject",
                    _ => "body",
                }));
            }
        }
        Ok(())
    }
}

/// The rendered audit input plus the byte spans holding email content (as
/// opposed to template scaffolding). The spans drive which tokens are
/// attributable when template attribution is off.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedInput {
    pub text: String,
    pub content_spans: Vec<(usize, usize)>,
}

/// Substitute the email's fields into the template. The output is the exact
/// string later tokenized and audited.
pub fn render_input(email: &CleanEmail, template: &InputTemplate) -> Result<RenderedInput, TemplateError> {
    template.validate()?;
    let mut text = String::with_capacity(template.text.len() + email.body.len());
    let mut content_spans = Vec::with_capacity(3);
    let mut rest = template.text.as_str();
    while let Some(open) = rest.find('{') {
        let Some(close_rel) = rest[open..].find('}') else { break };
        let close = open + close_rel;
        let name = &rest[open + 1..close];
        let value = match name {
            "sender" => Some(&email.sender),
            "subject" => Some(&email.subject),
            "body" => Some(&email.body),
            _ => None,
        };
        match value {
            Some(value) => {
                text.push_str(&rest[..open]);
                let start = text.len();
                text.push_str(value);
                content_spans.push((start, text.len()));
                rest = &rest[close + 1..];
            }
            None => {
                text.push_str(&rest[..close + 1]);
                rest = &rest[close + 1..];
            }
        }
    }
    text.push_str(rest);
    Ok(RenderedInput { text, content_spans })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn mail(sender: &str, subject: &str, body: &str, label: Label) -> CleanEmail {
        CleanEmail::new(sender.into(), subject.into(), body.into(), label)
    }

    fn toy_corpus(phishing: usize, ham: usize) -> Corpus {
        let mut records = Vec::new();
        for i in 0..phishing {
            records.push(mail("a@x", &format!("p{i}"), &format!("urgent body {i}"), Label::Phishing));
        }
        for i in 0..ham {
            records.push(mail("b@y", &format!("h{i}"), &format!("meeting body {i}"), Label::Legitimate));
        }
        Corpus::new(records)
    }

    #[test]
    fn content_hash_is_normalization_invariant() {
        let a = content_hash("A@X.com", "Hello  World", "pay\tnow");
        let b = content_hash("a@x.COM", "hello world", "PAY NOW");
        assert_eq!(a, b);
    }

    #[test]
    fn content_hash_field_boundaries_matter() {
        assert_ne!(content_hash("a", "b c", "d"), content_hash("a", "b", "c d"));
    }

    #[test]
    fn dedup_removes_later_copies() {
        let a = mail("s", "x", "same body", Label::Phishing);
        let b = mail("s", "y", "other body", Label::Phishing);
        let out = deduplicate(&[a.clone(), a.clone(), b.clone()]);
        assert_eq!(out, vec![a, b]);
    }

    #[test]
    fn dedup_identity_on_distinct() {
        let corpus = toy_corpus(3, 3);
        assert_eq!(deduplicate(&corpus.records), corpus.records);
    }

    #[test]
    fn dedup_planted_duplicates() {
        let mut records = toy_corpus(1250, 1250).records;
        for i in 0..100 {
            let copy = records[i].clone();
            records.push(copy);
        }
        assert_eq!(records.len(), 2600);
        assert_eq!(deduplicate(&records).len(), 2500);
    }

    #[test]
    fn balance_equalizes_counts() {
        let corpus = toy_corpus(2, 2);
        let balanced = balance(&corpus, 1, 7).unwrap();
        assert_eq!(balanced.count(Label::Phishing), 1);
        assert_eq!(balanced.count(Label::Legitimate), 1);
    }

    #[test]
    fn balance_is_deterministic() {
        let corpus = toy_corpus(50, 80);
        let a = balance(&corpus, 40, 11).unwrap();
        let b = balance(&corpus, 40, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn balance_insufficient_class_errors() {
        let corpus = toy_corpus(2, 5);
        let err = balance(&corpus, 3, 1).unwrap_err();
        match err {
            CorpusError::InsufficientClass { label, available, requested } => {
                assert_eq!(label, Label::Phishing);
                assert_eq!(available, 2);
                assert_eq!(requested, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn split_is_stratified_and_partitions() {
        let corpus = toy_corpus(100, 100);
        let (train, val) = split(&corpus, 0.8, 3).unwrap();
        assert_eq!(train.count(Label::Phishing), 80);
        assert_eq!(train.count(Label::Legitimate), 80);
        assert_eq!(val.count(Label::Phishing), 20);
        assert_eq!(val.count(Label::Legitimate), 20);

        let mut union: Vec<u64> = train.records.iter().chain(&val.records).map(|r| r.content_hash).collect();
        union.sort_unstable();
        let mut input: Vec<u64> = corpus.records.iter().map(|r| r.content_hash).collect();
        input.sort_unstable();
        assert_eq!(union, input);
    }

    #[test]
    fn split_same_seed_identical() {
        let corpus = toy_corpus(30, 30);
        let a = split(&corpus, 0.9, 5).unwrap();
        let b = split(&corpus, 0.9, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let corpus = toy_corpus(2, 2);
        assert!(matches!(split(&corpus, 0.0, 1), Err(CorpusError::BadFraction(_))));
        assert!(matches!(split(&corpus, 1.0, 1), Err(CorpusError::BadFraction(_))));
    }

    #[test]
    fn clean_email_assigns_label_from_origin() {
        let raw = RawEmail {
            source_id: "m1".into(),
            headers: vec![("From".into(), "evil@phish.example".into()), ("Subject".into(), "Act now".into())],
            body_raw: "<b>Verify</b> your account immediately or it will be closed, please act today for the security of your account and your funds".into(),
            origin: Origin::PhishingSource,
        };
        let clean = clean_email(&raw, &CleanOptions::default()).unwrap();
        assert_eq!(clean.label, Label::Phishing);
        assert!(clean.body.starts_with("Verify your account"));
    }

    #[test]
    fn clean_email_rejects_unlabeled() {
        let raw = RawEmail {
            source_id: "m2".into(),
            headers: vec![],
            body_raw: "hello".into(),
            origin: Origin::Unlabeled,
        };
        assert_eq!(clean_email(&raw, &CleanOptions::default()).unwrap_err(), SkipReason::Unlabeled);
    }

    #[test]
    fn language_gate_drops_long_non_english() {
        let body: String = core::iter::repeat("hola gracias señor cuenta banco urgente verificar ahora ")
            .take(5)
            .collect();
        let raw = RawEmail {
            source_id: "m3".into(),
            headers: vec![("Subject".into(), "x".into())],
            body_raw: body,
            origin: Origin::HamSource,
        };
        assert_eq!(clean_email(&raw, &CleanOptions::default()).unwrap_err(), SkipReason::NonEnglish);
    }

    #[test]
    fn language_gate_skips_short_bodies() {
        let raw = RawEmail {
            source_id: "m4".into(),
            headers: vec![("Subject".into(), "x".into())],
            body_raw: "Pay now !!".into(),
            origin: Origin::HamSource,
        };
        assert!(clean_email(&raw, &CleanOptions::default()).is_ok());
    }

    #[test]
    fn render_fills_placeholders() {
        let email = mail("a@x", "Hi", "body text", Label::Phishing);
        let template = InputTemplate::default();
        let rendered = render_input(&email, &template).unwrap();
        assert_eq!(rendered.text, "From: a@x\nSubject: Hi\nbody text");
        assert_eq!(rendered.content_spans.len(), 3);
        let (bs, be) = rendered.content_spans[2];
        assert_eq!(&rendered.text[bs..be], "body text");
    }

    #[test]
    fn render_empty_body_is_fine() {
        let email = mail("a@x", "Hi", "", Label::Legitimate);
        let rendered = render_input(&email, &InputTemplate::default()).unwrap();
        assert_eq!(rendered.text, "From: a@x\nSubject: Hi\n");
    }

    #[test]
    fn render_missing_placeholder_errors() {
        let email = mail("a@x", "Hi", "b", Label::Phishing);
        let template = InputTemplate::new("Subject: {subject}\n{body}");
        assert!(matches!(render_input(&email, &template), Err(TemplateError::MissingPlaceholder("sender"))));
    }

    #[test]
    fn render_contains_body_verbatim() {
        let email = mail("a@x", "s", "the exact body words", Label::Phishing);
        let rendered = render_input(&email, &InputTemplate::default()).unwrap();
        assert!(rendered.text.contains("the exact body words"));
    }
}
