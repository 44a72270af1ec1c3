//! Checkpoint container: named tensors plus a JSON metadata blob.
//!
//! Layout: an 8-byte magic, a length-prefixed JSON manifest (tensor names,
//! shapes, metadata, payload hash), then the little-endian f64 payload of
//! every tensor in manifest order. Save → load round-trips bit-exactly and
//! the payload hash is verified on load.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::tensor::Tensor;
use crate::error::ModelError;

const MAGIC: &[u8; 8] = b"TQCKPT1\n";

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tensors: Vec<ManifestEntry>,
    payload_sha256: String,
    meta: serde_json::Value,
}

/// A set of named tensors with free-form metadata.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor)>,
    pub meta: serde_json::Value,
}

fn payload_bytes(tensors: &[(String, Tensor)]) -> Vec<u8> {
    let mut out = Vec::new();
    for (_, t) in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn new(tensors: Vec<(String, Tensor)>, meta: serde_json::Value) -> Self {
        Checkpoint { tensors, meta }
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let payload = payload_bytes(&self.tensors);
        let manifest = Manifest {
            tensors: self
                .tensors
                .iter()
                .map(|(name, t)| ManifestEntry { name: name.clone(), shape: t.shape().to_vec() })
                .collect(),
            payload_sha256: hex(&Sha256::digest(&payload)),
            meta: self.meta.clone(),
        };
        let manifest_json = serde_json::to_vec(&manifest)
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;

        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&(manifest_json.len() as u64).to_le_bytes())?;
        w.write_all(&manifest_json)?;
        w.write_all(&payload)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ModelError::Checkpoint("bad magic; not a checkpoint file".into()));
        }
        let mut len_bytes = [0u8; 8];
        r.read_exact(&mut len_bytes)?;
        let manifest_len = u64::from_le_bytes(len_bytes) as usize;
        let mut manifest_json = vec![0u8; manifest_len];
        r.read_exact(&mut manifest_json)?;
        let manifest: Manifest = serde_json::from_slice(&manifest_json)
            .map_err(|e| ModelError::Checkpoint(format!("bad manifest: {e}")))?;

        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        let got_hash = hex(&Sha256::digest(&payload));
        if got_hash != manifest.payload_sha256 {
            return Err(ModelError::Checkpoint(format!(
                "payload hash mismatch: manifest says {}, payload is {got_hash}",
                manifest.payload_sha256
            )));
        }

        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        let mut offset = 0usize;
        for entry in manifest.tensors {
            let n: usize = entry.shape.iter().product();
            let bytes = n * 8;
            if offset + bytes > payload.len() {
                return Err(ModelError::Checkpoint(format!(
                    "payload truncated at tensor `{}`",
                    entry.name
                )));
            }
            let data: Vec<f64> = payload[offset..offset + bytes]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            offset += bytes;
            tensors.push((entry.name, Tensor::new(entry.shape, data)));
        }
        if offset != payload.len() {
            return Err(ModelError::Checkpoint("trailing bytes after payload".into()));
        }
        Ok(Checkpoint { tensors, meta: manifest.meta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn save_load_round_trips_bit_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let tensors = vec![
            ("a".to_string(), Tensor::matrix(2, 3, vec![1.0, -2.5, 3.125, 0.1, f64::MIN_POSITIVE, 1e300])),
            ("b".to_string(), Tensor::vector(vec![0.3333333333333333])),
            ("empty".to_string(), Tensor::vector(vec![])),
        ];
        let meta = serde_json::json!({"kind": "test", "dims": {"d": 4}});
        let ckpt = Checkpoint::new(tensors.clone(), meta.clone());
        ckpt.save(&path).unwrap();

        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.meta, meta);
        assert_eq!(back.tensors.len(), tensors.len());
        for ((n1, t1), (n2, t2)) in back.tensors.iter().zip(&tensors) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            let b1: Vec<u8> = t1.data().iter().flat_map(|v| v.to_le_bytes()).collect();
            let b2: Vec<u8> = t2.data().iter().flat_map(|v| v.to_le_bytes()).collect();
            assert_eq!(b1, b2);
        }
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ckpt = Checkpoint::new(
            vec![("a".to_string(), Tensor::vector(vec![1.0, 2.0]))],
            serde_json::json!({}),
        );
        ckpt.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
