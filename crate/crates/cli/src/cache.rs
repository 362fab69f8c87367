//! On-disk score cache: an append-only log of key digest -> float64 bits,
//! so interrupted audits resume without re-querying the backend. Values are
//! stored as raw bit patterns and come back bit-exact.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use ccshap_core::scoring::{CacheKey, MemoryCache, ScoreCache};

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cannot open score cache {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

struct DiskCacheInner {
    entries: HashMap<CacheKey, u64>,
    writer: BufWriter<File>,
}

/// Thread-safe persistent cache. Concurrent insertion of the same key is
/// tolerated (scorer purity makes the values identical; last write wins on
/// replay).
pub struct DiskCache {
    inner: Mutex<DiskCacheInner>,
}

impl DiskCache {
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|source| CacheError::Io { path: path.to_path_buf(), source })?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|source| CacheError::Io { path: path.to_path_buf(), source })?;
                if let Some((key, value)) = parse_line(&line) {
                    entries.insert(key, value);
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| CacheError::Io { path: path.to_path_buf(), source })?;
        Ok(Self { inner: Mutex::new(DiskCacheInner { entries, writer: BufWriter::new(file) }) })
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn parse_line(line: &str) -> Option<(CacheKey, u64)> {
    let (key_hex, value_hex) = line.trim().split_once(' ')?;
    if key_hex.len() != 64 {
        return None;
    }
    let field = |range: std::ops::Range<usize>| u64::from_str_radix(&key_hex[range], 16).ok();
    let key = CacheKey {
        backend: field(0..16)?,
        sequence: field(16..32)?,
        mask: field(32..48)?,
        target: field(48..64)?,
    };
    let value = u64::from_str_radix(value_hex, 16).ok()?;
    Some((key, value))
}

fn format_line(key: &CacheKey, bits: u64) -> String {
    format!(
        "{:016x}{:016x}{:016x}{:016x} {:016x}\n",
        key.backend, key.sequence, key.mask, key.target, bits
    )
}

impl ScoreCache for DiskCache {
    fn get(&self, key: &CacheKey) -> Option<f64> {
        self.inner.lock().unwrap().entries.get(key).map(|bits| f64::from_bits(*bits))
    }

    fn put(&self, key: CacheKey, value: f64) {
        let bits = value.to_bits();
        let mut inner = self.inner.lock().unwrap();
        if inner.entries.insert(key, bits).is_none() {
            let line = format_line(&key, bits);
            let _ = inner.writer.write_all(line.as_bytes());
            let _ = inner.writer.flush();
        }
    }
}

/// Per-email working cache layered over an optional shared persistent one.
/// Reads check the local memo first; writes go to both.
pub struct LayeredCache<'a> {
    local: MemoryCache,
    shared: Option<&'a DiskCache>,
}

impl<'a> LayeredCache<'a> {
    pub fn new(shared: Option<&'a DiskCache>) -> Self {
        Self { local: MemoryCache::new(), shared }
    }
}

impl ScoreCache for LayeredCache<'_> {
    fn get(&self, key: &CacheKey) -> Option<f64> {
        self.local.get(key).or_else(|| self.shared.and_then(|s| s.get(key)))
    }

    fn put(&self, key: CacheKey, value: f64) {
        self.local.put(key, value);
        if let Some(shared) = self.shared {
            shared.put(key, value);
        }
    }
}
