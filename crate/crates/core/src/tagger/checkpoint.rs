//! Versioned binary checkpoint.
//!
//! ```text
//! magic    8 bytes  "EMBVTAGR"
//! version  u32 LE
//! header   u64 LE length + UTF-8 JSON {config, tags, alphabet, word_dim}
//! groups   u32 LE count, then per group:
//!          u32 LE name length, name, u64 LE rows, u64 LE cols,
//!          rows·cols f64 LE values (row-major)
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::model::{TaggerConfig, TaggerModel, TaggerParameters, PARAMETER_GROUPS};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 8] = b"EMBVTAGR";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Upper bound on header and matrix sizes accepted when loading.
const MAX_HEADER_BYTES: u64 = 64 << 20;
const MAX_ELEMENTS: u64 = 1 << 32;

#[derive(Serialize, Deserialize)]
struct Header {
    config: TaggerConfig,
    tags: Vec<String>,
    alphabet: String,
    word_dim: usize,
}

pub fn save_checkpoint<W: Write>(model: &TaggerModel, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        tags: model.tags.clone(),
        alphabet: model.alphabet.iter().collect(),
        word_dim: model.word_dim,
    })
    .expect("header serializes");
    out.write_u64::<LittleEndian>(header.len() as u64)?;
    out.write_all(&header)?;
    let mats = model.params.matrices();
    out.write_u32::<LittleEndian>(mats.len() as u32)?;
    for (name, m) in PARAMETER_GROUPS.iter().zip(mats) {
        out.write_u32::<LittleEndian>(name.len() as u32)?;
        out.write_all(name.as_bytes())?;
        out.write_u64::<LittleEndian>(m.rows() as u64)?;
        out.write_u64::<LittleEndian>(m.cols() as u64)?;
        for &v in m.as_slice() {
            out.write_f64::<LittleEndian>(v)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn truncated(what: &str) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Checkpoint(format!("truncated {what}")),
        _ => Error::Io(e),
    }
}

fn read_bytes<R: Read>(src: &mut R, len: u64, what: &str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    src.take(len).read_to_end(&mut buf)?;
    if buf.len() as u64 != len {
        return Err(Error::Checkpoint(format!("truncated {what}")));
    }
    Ok(buf)
}

pub fn load_checkpoint<R: Read>(mut src: R) -> Result<TaggerModel> {
    let mut magic = [0u8; 8];
    src.read_exact(&mut magic).map_err(truncated("magic"))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a tagger checkpoint".into()));
    }
    let version = src.read_u32::<LittleEndian>().map_err(truncated("version"))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let header_len = src.read_u64::<LittleEndian>().map_err(truncated("header"))?;
    if header_len > MAX_HEADER_BYTES {
        return Err(Error::Checkpoint("header too large".into()));
    }
    let header: Header = serde_json::from_slice(&read_bytes(&mut src, header_len, "header")?)
        .map_err(|e| Error::Checkpoint(format!("invalid header: {e}")))?;
    header
        .config
        .validate()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;

    let count = src.read_u32::<LittleEndian>().map_err(truncated("group count"))?;
    if count as usize != PARAMETER_GROUPS.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter groups, found {count}",
            PARAMETER_GROUPS.len()
        )));
    }
    let mut mats = Vec::with_capacity(PARAMETER_GROUPS.len());
    for expected in PARAMETER_GROUPS {
        let name_len = src.read_u32::<LittleEndian>().map_err(truncated("group name"))?;
        let name = read_bytes(&mut src, name_len as u64, "group name")?;
        if name != expected.as_bytes() {
            return Err(Error::Checkpoint(format!(
                "expected group {expected:?}, found {:?}",
                String::from_utf8_lossy(&name)
            )));
        }
        let rows = src.read_u64::<LittleEndian>().map_err(truncated("shape"))?;
        let cols = src.read_u64::<LittleEndian>().map_err(truncated("shape"))?;
        let n = rows
            .checked_mul(cols)
            .filter(|&n| n <= MAX_ELEMENTS)
            .ok_or_else(|| Error::Checkpoint(format!("group {expected:?} is too large")))?;
        let raw = read_bytes(&mut src, n * 8, expected)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!("non-finite value in {expected:?}")));
        }
        mats.push(Matrix::from_vec(rows as usize, cols as usize, data));
    }
    let mut it = mats.into_iter();
    let mut next = || it.next().expect("group count checked");
    let gru = |n: &mut dyn FnMut() -> Matrix| super::gru::GruWeights {
        input: n(),
        recurrent: n(),
        bias: n(),
    };
    let char_embeddings = next();
    let char_forward = gru(&mut next);
    let char_backward = gru(&mut next);
    let token_forward = gru(&mut next);
    let token_backward = gru(&mut next);
    let params = TaggerParameters {
        char_embeddings,
        char_forward,
        char_backward,
        token_forward,
        token_backward,
        emission_weights: next(),
        emission_bias: next(),
        transitions: next(),
    };
    let model = TaggerModel::from_parts(
        header.config,
        header.tags,
        header.alphabet.chars().collect(),
        header.word_dim,
        params,
    );
    model
        .check_shapes()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(model)
}
