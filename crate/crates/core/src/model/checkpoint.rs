//! Binary checkpoint container.
//!
//! ```text
//! b"SENTCKPT" | u32 LE format version | u64 LE header length | header JSON | f64 LE parameters
//! ```
//!
//! The JSON header carries the label space, featurizer, hidden-layer spec and
//! the name and shape of every parameter block; the blocks follow in the
//! listed order. Parameters are always stored as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classifier::{Classifier, HiddenSpec};
use super::featurize::FeaturizerConfig;
use crate::dataset::LabelSpace;
use crate::error::{Result, SentError};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"SENTCKPT";
pub const FORMAT_VERSION: u32 = 1;
const MAX_HEADER: u64 = 64 << 20;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    label_space: LabelSpace,
    featurizer: FeaturizerConfig,
    hidden: Option<HiddenSpec>,
    arrays: Vec<ArrayInfo>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrayInfo {
    name: String,
    shape: Vec<usize>,
}

pub fn write_checkpoint<T: Scalar, W: Write>(mut w: W, model: &Classifier<T>) -> Result<()> {
    let blocks = model.blocks();
    let header = Header {
        format_version: FORMAT_VERSION,
        label_space: model.label_space().clone(),
        featurizer: *model.featurizer(),
        hidden: model.hidden(),
        arrays: blocks
            .iter()
            .map(|(name, shape, _)| ArrayInfo {
                name: name.to_string(),
                shape: shape.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let io = |e| SentError::io("<checkpoint>", e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&json).map_err(io)?;
    for (_, _, values) in blocks {
        for v in values {
            w.write_all(&v.as_f64().to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut r: R) -> Result<Classifier<T>> {
    let bad = |m: &str| SentError::Checkpoint(m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(|_| bad("truncated version"))?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(SentError::Checkpoint(format!("unsupported format version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(|_| bad("truncated header length"))?;
    let len = u64::from_le_bytes(len);
    if len > MAX_HEADER {
        return Err(bad("header too large"));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json).map_err(|_| bad("truncated header"))?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| SentError::Checkpoint(format!("bad header: {e}")))?;
    if header.format_version != version {
        return Err(bad("header and container versions differ"));
    }

    let template = Classifier::<T>::zeros(header.label_space.clone(), header.featurizer, header.hidden)?;
    let expected = template.blocks();
    if expected.len() != header.arrays.len()
        || expected
            .iter()
            .zip(&header.arrays)
            .any(|((name, shape, _), info)| *name != info.name || *shape != info.shape)
    {
        return Err(bad("parameter blocks do not match the declared architecture"));
    }
    let total = template.params().len();
    let mut raw = vec![0u8; total * 8];
    r.read_exact(&mut raw).map_err(|_| bad("truncated parameter data"))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| SentError::io("<checkpoint>", e))? != 0 {
        return Err(bad("trailing bytes after parameter data"));
    }
    let params = raw
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    Classifier::from_params(header.label_space, header.featurizer, header.hidden, params)
}

pub fn save_checkpoint<T: Scalar>(path: &Path, model: &Classifier<T>) -> Result<()> {
    let f = File::create(path).map_err(|e| SentError::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_checkpoint(&mut w, model)?;
    w.flush().map_err(|e| SentError::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Classifier<T>> {
    let f = File::open(path).map_err(|e| SentError::io(path, e))?;
    read_checkpoint(BufReader::new(f))
}
