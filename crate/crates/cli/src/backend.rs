//! Backend construction and the model checkpoint format.
//!
//! Checkpoint layout (all little-endian): 8-byte magic "CCSHAPM1",
//! u32 version, u64 dim, u64 hash_seed, f64 bias, then dim f64 weights.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ccshap_core::model::{LinearTextModel, ToyBackend};
use ccshap_core::scoring::AuditBackend;

use crate::config::{AuditConfig, BackendKind};
use crate::remote::{RemoteBackend, RemoteError};

const MAGIC: &[u8; 8] = b"CCSHAPM1";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a model checkpoint (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("unsupported checkpoint version {found} in {path}")]
    BadVersion { path: PathBuf, found: u32 },
}

pub fn save_checkpoint(path: &Path, model: &LinearTextModel) -> Result<(), CheckpointError> {
    let io_err = |source| CheckpointError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    writer.write_all(MAGIC).map_err(io_err)?;
    writer.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    writer.write_all(&(model.dim as u64).to_le_bytes()).map_err(io_err)?;
    writer.write_all(&model.hash_seed.to_le_bytes()).map_err(io_err)?;
    writer.write_all(&model.bias.to_le_bytes()).map_err(io_err)?;
    for weight in &model.weights {
        writer.write_all(&weight.to_le_bytes()).map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}

pub fn load_checkpoint(path: &Path) -> Result<LinearTextModel, CheckpointError> {
    let io_err = |source| CheckpointError::Io { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(io_err)?;
    let mut reader = BufReader::new(file);

    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic { path: path.to_path_buf() });
    }
    let mut u32_buf = [0u8; 4];
    reader.read_exact(&mut u32_buf).map_err(io_err)?;
    let version = u32::from_le_bytes(u32_buf);
    if version != VERSION {
        return Err(CheckpointError::BadVersion { path: path.to_path_buf(), found: version });
    }
    let mut u64_buf = [0u8; 8];
    reader.read_exact(&mut u64_buf).map_err(io_err)?;
    let dim = u64::from_le_bytes(u64_buf) as usize;
    reader.read_exact(&mut u64_buf).map_err(io_err)?;
    let hash_seed = u64::from_le_bytes(u64_buf);
    reader.read_exact(&mut u64_buf).map_err(io_err)?;
    let bias = f64::from_le_bytes(u64_buf);
    let mut weights = Vec::with_capacity(dim);
    for _ in 0..dim {
        reader.read_exact(&mut u64_buf).map_err(io_err)?;
        weights.push(f64::from_le_bytes(u64_buf));
    }
    Ok(LinearTextModel { dim, hash_seed, weights, bias })
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
}

/// Build the configured audit backend. The box is Send + Sync so the batch
/// loop can share it across worker threads.
pub fn build_backend(config: &AuditConfig) -> Result<Box<dyn AuditBackend + Send + Sync>, BackendError> {
    match config.backend {
        BackendKind::Toy => {
            let model = load_checkpoint(&config.checkpoint)?;
            Ok(Box::new(ToyBackend::new(model, config.k_top)))
        }
        BackendKind::Remote => {
            let endpoint = config.remote.clone().expect("validated: remote section present");
            Ok(Box::new(RemoteBackend::new(endpoint, config.explanation_prompt.clone())?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let mut model = LinearTextModel::zeros(128, 0xabcd);
        model.bias = -0.125;
        model.weights[3] = 0.1 + 0.2;
        model.weights[127] = -9.75e-3;
        save_checkpoint(&path, &model).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        std::fs::write(&path, b"NOTAMODELxxxxxxxxxxxxxxxx").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(CheckpointError::BadMagic { .. })));
    }

    #[test]
    fn truncated_checkpoint_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let mut model = LinearTextModel::zeros(64, 1);
        model.bias = 1.0;
        save_checkpoint(&path, &model).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(CheckpointError::Io { .. })));
    }
}
