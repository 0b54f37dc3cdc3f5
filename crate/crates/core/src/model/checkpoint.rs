//! Checkpoint files.
//!
//! Layout: the 8-byte magic `CHKWISE1`, a little-endian `u32` header length,
//! a JSON header, then `param_count` little-endian floats of the header's
//! dtype. When the header says `optimizer: true`, the Adam first and second
//! moments follow in the same encoding.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::optim::AdamState;
use super::real::Real;
use super::trainer::Student;
use super::transformer::{ModelConfig, Transformer};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::store::Provenance;

const MAGIC: &[u8; 8] = b"CHKWISE1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub dtype: String,
    pub config: ModelConfig,
    pub vocab_hash: String,
    pub step: u64,
    pub param_count: usize,
    pub optimizer: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// SHA-256 of the little-endian parameter bytes.
pub fn param_hash<F: Real>(params: &[F]) -> String {
    let mut h = Sha256::new();
    let mut buf = Vec::with_capacity(F::BYTES);
    for &p in params {
        buf.clear();
        p.write_le(&mut buf);
        h.update(&buf);
    }
    hex::encode(h.finalize())
}

fn write_floats<F: Real>(out: &mut Vec<u8>, xs: &[F]) {
    out.reserve(xs.len() * F::BYTES);
    for &x in xs {
        x.write_le(out);
    }
}

fn read_floats<F: Real>(bytes: &[u8], n: usize, at: &mut usize) -> Result<Vec<F>> {
    let need = n * F::BYTES;
    if bytes.len() < *at + need {
        return Err(Error::Checkpoint("truncated parameter array".into()));
    }
    let xs = bytes[*at..*at + need].chunks_exact(F::BYTES).map(F::read_le).collect();
    *at += need;
    Ok(xs)
}

/// Serializes a model (and optionally its optimizer state) to bytes.
pub fn encode<F: Real>(model: &Transformer<F>, adam: Option<&AdamState<F>>) -> Result<Vec<u8>> {
    encode_with(model, adam, None)
}

/// [`encode`] with a provenance record in the header.
pub fn encode_with<F: Real>(
    model: &Transformer<F>,
    adam: Option<&AdamState<F>>,
    provenance: Option<&Provenance>,
) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        version: FORMAT_VERSION,
        dtype: F::DTYPE.to_string(),
        config: *model.config(),
        vocab_hash: Vocabulary.hash(),
        step: adam.map_or(0, |a| a.step),
        param_count: model.param_count(),
        optimizer: adam.is_some(),
        provenance: provenance.cloned(),
    };
    let head = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(head.len() as u32).to_le_bytes());
    out.extend_from_slice(&head);
    write_floats(&mut out, model.params());
    if let Some(a) = adam {
        write_floats(&mut out, &a.m);
        write_floats(&mut out, &a.v);
    }
    Ok(out)
}

/// Inverse of [`encode`].
pub fn decode<F: Real>(bytes: &[u8]) -> Result<(CheckpointHeader, Transformer<F>, Option<AdamState<F>>)> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + hlen {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[12..12 + hlen])?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", header.version)));
    }
    if header.dtype != F::DTYPE {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} parameters, expected {}",
            header.dtype,
            F::DTYPE
        )));
    }
    if header.config.vocab_size == Vocabulary::SIZE && header.vocab_hash != Vocabulary.hash() {
        return Err(Error::Checkpoint("vocabulary hash mismatch".into()));
    }
    let mut at = 12 + hlen;
    let params = read_floats(bytes, header.param_count, &mut at)?;
    let model = Transformer::from_params(header.config, params)?;
    let adam = if header.optimizer {
        let m = read_floats(bytes, header.param_count, &mut at)?;
        let v = read_floats(bytes, header.param_count, &mut at)?;
        Some(AdamState { m, v, step: header.step })
    } else {
        None
    };
    if at != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after parameter array".into()));
    }
    Ok((header, model, adam))
}

pub fn save_student(student: &Student, path: &Path) -> Result<()> {
    save_model(&student.model, Some(&student.adam), path, None)
}

/// Writes a checkpoint file.
pub fn save_model(
    model: &Transformer<f32>,
    adam: Option<&AdamState<f32>>,
    path: &Path,
    provenance: Option<&Provenance>,
) -> Result<()> {
    let bytes = encode_with(model, adam, provenance)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path.display().to_string(), e))?;
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(bytes)
}

/// Header and model of an f32 checkpoint file.
pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, Transformer<f32>)> {
    let (h, m, _) = decode::<f32>(&read_file(path)?)?;
    Ok((h, m))
}

pub fn load_student(path: &Path) -> Result<Student> {
    let (_, model, adam) = decode::<f32>(&read_file(path)?)?;
    match adam {
        Some(a) => Student::with_state(model, a),
        None => Ok(Student::from_model(model)),
    }
}
