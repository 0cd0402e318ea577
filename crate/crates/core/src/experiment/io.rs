//! On-disk formats: checkpoints, corpora and JSON-lines metrics.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Error, Result};
use crate::model::ParameterVector;
use crate::synth::{CorpusBundle, CORPUS_VERSION};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointFile {
    pub version: u32,
    #[serde(rename = "V")]
    pub vocab: usize,
    #[serde(rename = "F")]
    pub dim: usize,
    pub values: Vec<f64>,
}

impl From<&ParameterVector> for CheckpointFile {
    fn from(p: &ParameterVector) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            vocab: p.vocab(),
            dim: p.dim(),
            values: p.values().to_vec(),
        }
    }
}

impl TryFrom<CheckpointFile> for ParameterVector {
    type Error = Error;

    fn try_from(c: CheckpointFile) -> Result<Self> {
        if c.version != CHECKPOINT_VERSION {
            return Err(invalid_input(format!(
                "unsupported checkpoint version {}",
                c.version
            )));
        }
        ParameterVector::from_values(c.vocab, c.dim, c.values)
    }
}

pub fn checkpoint_to_string(p: &ParameterVector) -> String {
    serde_json::to_string(&CheckpointFile::from(p)).expect("checkpoint serializes")
}

pub fn checkpoint_from_str(text: &str) -> Result<ParameterVector> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    file.try_into()
}

pub fn write_checkpoint(path: &Path, p: &ParameterVector) -> Result<()> {
    write_text(path, &checkpoint_to_string(p))
}

pub fn read_checkpoint(path: &Path) -> Result<ParameterVector> {
    checkpoint_from_str(&read_text(path)?)
}

pub fn write_corpus(path: &Path, bundle: &CorpusBundle) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, bundle)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: &Path) -> Result<CorpusBundle> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let bundle: CorpusBundle = serde_json::from_reader(BufReader::new(file))?;
    if bundle.version != CORPUS_VERSION {
        return Err(invalid_input(format!(
            "unsupported corpus version {}",
            bundle.version
        )));
    }
    Ok(bundle)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// One compact JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            rows.push(serde_json::from_str(&line)?);
        }
    }
    Ok(rows)
}
