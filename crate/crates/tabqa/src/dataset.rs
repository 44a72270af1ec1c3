//! JSONL dataset (de)serialization and split manifests.
//!
//! One JSON object per line, schema-versioned, with deterministic field
//! order, so `deserialize ∘ serialize` is the identity byte-for-byte on
//! valid datasets. Loading re-validates every invariant, including
//! re-executing each gold trace through the interpreter.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::DataError;
use crate::sample::Sample;
use crate::table::{DEFAULT_COLS, DEFAULT_ROWS};

/// Current dataset line-format version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Line {
    v: u32,
    sample: Sample,
}

/// Writes samples as versioned JSONL.
pub fn serialize_dataset<W: Write>(samples: &[Sample], sink: W) -> Result<(), DataError> {
    let mut w = BufWriter::new(sink);
    for sample in samples {
        let line = Line { v: SCHEMA_VERSION, sample: sample.clone() };
        serde_json::to_writer(&mut w, &line)
            .map_err(|e| DataError::Validation(format!("serialization failed: {e}")))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads and fully re-validates a JSONL dataset with the given geometry.
pub fn deserialize_dataset<R: Read>(
    source: R,
    rows: usize,
    cols: usize,
) -> Result<Vec<Sample>, DataError> {
    let reader = BufReader::new(source);
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&text).map_err(|e| DataError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if parsed.v != SCHEMA_VERSION {
            return Err(DataError::Parse {
                line: line_no,
                message: format!(
                    "unsupported schema version {} (expected {SCHEMA_VERSION})",
                    parsed.v
                ),
            });
        }
        parsed.sample.validate(rows, cols).map_err(|e| DataError::ValidationAt {
            line: line_no,
            message: e.to_string(),
        })?;
        samples.push(parsed.sample);
    }
    Ok(samples)
}

/// [`deserialize_dataset`] with the default 10×10 geometry.
pub fn deserialize_dataset_default<R: Read>(source: R) -> Result<Vec<Sample>, DataError> {
    deserialize_dataset(source, DEFAULT_ROWS, DEFAULT_COLS)
}

pub fn write_split(path: &Path, samples: &[Sample]) -> Result<(), DataError> {
    let file = File::create(path)?;
    serialize_dataset(samples, file)
}

pub fn read_split(path: &Path, rows: usize, cols: usize) -> Result<Vec<Sample>, DataError> {
    let file = File::open(path)?;
    deserialize_dataset(file, rows, cols)
}

/// The canonical single-line JSON encoding of one sample.
pub fn sample_line(sample: &Sample) -> String {
    let line = Line { v: SCHEMA_VERSION, sample: sample.clone() };
    serde_json::to_string(&line).expect("sample serialization cannot fail")
}

/// SHA-256 of the canonical line encoding, for overlap checks.
pub fn sample_hash(sample: &Sample) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(sample_line(sample).as_bytes());
    h.finalize().into()
}

/// Split sizes plus provenance, written alongside the JSONL files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub schema_hash: String,
    pub rows: usize,
    pub cols: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| DataError::Validation(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| DataError::Parse {
            line: 0,
            message: e.to_string(),
        })
    }
}

/// The three split files plus manifest under one directory.
#[derive(Debug)]
pub struct SplitPaths {
    pub train: std::path::PathBuf,
    pub valid: std::path::PathBuf,
    pub test: std::path::PathBuf,
    pub manifest: std::path::PathBuf,
}

impl SplitPaths {
    pub fn in_dir(dir: &Path) -> Self {
        SplitPaths {
            train: dir.join("train.jsonl"),
            valid: dir.join("valid.jsonl"),
            test: dir.join("test.jsonl"),
            manifest: dir.join("manifest.json"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, GenConfig, Schema};

    fn tiny_corpus() -> Vec<Sample> {
        let schema = Schema::default();
        let config = GenConfig { train: 6, valid: 0, test: 0, ..GenConfig::default() };
        generate_dataset(&config, &schema).unwrap().train
    }

    #[test]
    fn empty_dataset_round_trips_to_empty_file() {
        let mut buf = Vec::new();
        serialize_dataset(&[], &mut buf).unwrap();
        assert!(buf.is_empty());
        assert!(deserialize_dataset_default(&buf[..]).unwrap().is_empty());
    }

    #[test]
    fn one_sample_per_line_round_trip() {
        let samples = tiny_corpus();
        let mut buf = Vec::new();
        serialize_dataset(&samples, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), samples.len());

        let back = deserialize_dataset_default(&buf[..]).unwrap();
        assert_eq!(back, samples);

        // serialize(deserialize(f)) == f
        let mut buf2 = Vec::new();
        serialize_dataset(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let samples = tiny_corpus();
        let mut buf = Vec::new();
        serialize_dataset(&samples, &mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("{not json\n");
        let err = deserialize_dataset_default(text.as_bytes()).unwrap_err();
        match err {
            DataError::Parse { line, .. } => assert_eq!(line, samples.len() + 1),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn wrong_geometry_is_named_in_the_error() {
        let samples = tiny_corpus();
        let mut buf = Vec::new();
        serialize_dataset(&samples[..1], &mut buf).unwrap();
        let err = deserialize_dataset(&buf[..], 10, 11).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("table must be 10×11"), "got: {msg}");
    }

    #[test]
    fn tampered_denotation_is_rejected() {
        let samples = tiny_corpus();
        let mut buf = Vec::new();
        serialize_dataset(&samples, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // Corrupt the stored denotation of the first line.
        let mut lines: Vec<String> = text.lines().map(|s| s.to_string()).collect();
        let mut v: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
        v["sample"]["denotation"] = serde_json::json!({"entity": "bogus_answer"});
        lines[0] = serde_json::to_string(&v).unwrap();
        let tampered = lines.join("\n");

        let err = deserialize_dataset_default(tampered.as_bytes()).unwrap_err();
        match err {
            DataError::ValidationAt { line, .. } => assert_eq!(line, 1),
            other => panic!("expected validation error, got {other}"),
        }
    }
}
