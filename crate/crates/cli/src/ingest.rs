//! Corpus ingestion: file-format loaders (.eml directory, mbox, JSONL,
//! CSV), the raw-to-clean pipeline, skip reports, and the canonical corpus
//! JSONL format.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ccshap_core::corpus::{
    clean_email, deduplicate, CleanEmail, CleanOptions, Corpus, Label, Origin, RawEmail, SkipReason,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    EmlDir,
    Mbox,
    Jsonl,
    Csv,
}

impl CorpusFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eml_dir" | "eml" => Some(Self::EmlDir),
            "mbox" => Some(Self::Mbox),
            "jsonl" => Some(Self::Jsonl),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a directory of .eml files")]
    NotADirectory { path: PathBuf },
}

/// One excluded record and why; serialized as a JSONL skip report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkipEntry {
    pub source_id: String,
    pub reason: String,
}

fn skip(source_id: impl Into<String>, reason: &SkipReason) -> SkipEntry {
    SkipEntry { source_id: source_id.into(), reason: reason.to_string() }
}

/// Load raw emails from one source. Malformed records are skipped and
/// reported, never silently dropped; unreadable files are hard errors that
/// name the file.
pub fn load_corpus(
    path: &Path,
    format: CorpusFormat,
    origin: Origin,
) -> Result<(Vec<RawEmail>, Vec<SkipEntry>), IngestError> {
    match format {
        CorpusFormat::EmlDir => load_eml_dir(path, origin),
        CorpusFormat::Mbox => load_mbox(path, origin),
        CorpusFormat::Jsonl => load_jsonl(path, origin),
        CorpusFormat::Csv => load_csv(path, origin),
    }
}

fn read_file(path: &Path) -> Result<String, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn raw_from_message(source_id: String, msg: crate::mail::ParsedMessage, origin: Origin) -> RawEmail {
    RawEmail { source_id, headers: msg.headers, body_raw: msg.body, origin }
}

fn load_eml_dir(path: &Path, origin: Origin) -> Result<(Vec<RawEmail>, Vec<SkipEntry>), IngestError> {
    if !path.is_dir() {
        return Err(IngestError::NotADirectory { path: path.to_path_buf() });
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|e| e.to_string_lossy().eq_ignore_ascii_case("eml"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();

    let mut emails = Vec::new();
    let mut skips = Vec::new();
    for file in files {
        let source_id = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let content = read_file(&file)?;
        match crate::mail::parse_message(&content) {
            Ok(msg) => emails.push(raw_from_message(source_id, msg, origin)),
            Err(e) => skips.push(skip(source_id, &SkipReason::Malformed(e.to_string()))),
        }
    }
    Ok((emails, skips))
}

fn load_mbox(path: &Path, origin: Origin) -> Result<(Vec<RawEmail>, Vec<SkipEntry>), IngestError> {
    let content = read_file(path)?;
    let stem = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut emails = Vec::new();
    let mut skips = Vec::new();
    for (index, chunk) in crate::mail::split_mbox(&content).into_iter().enumerate() {
        let source_id = format!("{stem}#{index}");
        match crate::mail::parse_message(chunk) {
            Ok(msg) => emails.push(raw_from_message(source_id, msg, origin)),
            Err(e) => skips.push(skip(source_id, &SkipReason::Malformed(e.to_string()))),
        }
    }
    Ok((emails, skips))
}

/// Row shape shared by the JSONL and CSV interchange formats.
#[derive(Debug, Deserialize)]
struct InterchangeRow {
    #[serde(default)]
    sender: String,
    #[serde(default)]
    subject: String,
    #[serde(default)]
    body: String,
    #[serde(default)]
    label: String,
}

fn raw_from_row(source_id: String, row: InterchangeRow, fallback: Origin) -> RawEmail {
    let origin = match Label::parse(&row.label) {
        Some(Label::Phishing) => Origin::PhishingSource,
        Some(Label::Legitimate) => Origin::HamSource,
        None if row.label.trim().is_empty() => fallback,
        None => Origin::Unlabeled,
    };
    RawEmail {
        source_id,
        headers: vec![
            ("From".to_string(), row.sender),
            ("Subject".to_string(), row.subject),
        ],
        body_raw: row.body,
        origin,
    }
}

fn load_jsonl(path: &Path, fallback: Origin) -> Result<(Vec<RawEmail>, Vec<SkipEntry>), IngestError> {
    let file = fs::File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let stem = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut emails = Vec::new();
    let mut skips = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let source_id = format!("{stem}:{}", index + 1);
        match serde_json::from_str::<InterchangeRow>(&line) {
            Ok(row) => emails.push(raw_from_row(source_id, row, fallback)),
            Err(e) => skips.push(skip(source_id, &SkipReason::Malformed(format!("json: {e}")))),
        }
    }
    Ok((emails, skips))
}

fn load_csv(path: &Path, fallback: Origin) -> Result<(Vec<RawEmail>, Vec<SkipEntry>), IngestError> {
    let file = fs::File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let stem = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let mut emails = Vec::new();
    let mut skips = Vec::new();
    for (index, result) in reader.deserialize::<InterchangeRow>().enumerate() {
        let source_id = format!("{stem}:{}", index + 2);
        match result {
            Ok(row) => emails.push(raw_from_row(source_id, row, fallback)),
            Err(source) => skips.push(skip(source_id, &SkipReason::Malformed(format!("csv: {source}")))),
        }
    }
    Ok((emails, skips))
}

/// Raw records through cleaning and deduplication; every exclusion lands in
/// the skip report. Records keep their ingestion order (sorted by source
/// id first so concurrent loaders cannot change the outcome).
pub fn clean_pipeline(
    mut raw: Vec<RawEmail>,
    options: &CleanOptions,
) -> (Corpus, Vec<SkipEntry>) {
    raw.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    let mut cleaned = Vec::with_capacity(raw.len());
    let mut skips = Vec::new();
    for email in &raw {
        match clean_email(email, options) {
            Ok(clean) => cleaned.push(clean),
            Err(reason) => skips.push(skip(email.source_id.clone(), &reason)),
        }
    }
    let before = cleaned.len();
    let deduped = deduplicate(&cleaned);
    if deduped.len() < before {
        // Duplicates are not individually attributable to a source id once
        // hashed; record the count.
        skips.push(SkipEntry {
            source_id: "(dedup)".to_string(),
            reason: format!("{} duplicate records removed", before - deduped.len()),
        });
    }
    (Corpus::new(deduped), skips)
}

/// Write the canonical corpus JSONL: one CleanEmail per line, UTF-8, keys
/// sender,subject,body,label,content_hash.
pub fn write_corpus_jsonl(path: &Path, corpus: &Corpus) -> Result<(), IngestError> {
    let mut out = Vec::new();
    for record in &corpus.records {
        serde_json::to_writer(&mut out, record).expect("CleanEmail serializes");
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

pub fn read_corpus_jsonl(path: &Path) -> Result<Corpus, IngestError> {
    let file = fs::File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CleanEmail = serde_json::from_str(&line).map_err(|e| IngestError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?;
        records.push(record);
    }
    Ok(Corpus::new(records))
}

pub fn write_skip_report(path: &Path, skips: &[SkipEntry]) -> Result<(), IngestError> {
    let mut out = Vec::new();
    for entry in skips {
        serde_json::to_writer(&mut out, entry).expect("SkipEntry serializes");
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}
