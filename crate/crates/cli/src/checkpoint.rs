//! Self-describing binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic           8 bytes  "PCCKPT01"
//! mode            1 byte   0 = word, 1 = subword tokenization
//! num_layers      u32
//! hidden_dim      u32
//! num_heads       u32
//! ff_dim          u32
//! max_seq_len     u32
//! vocab_size      u32
//! dropout_rate    f64
//! vocab_hash      u64      FNV-1a of the vocabulary file bytes
//! tensor_count    u32
//! per tensor:
//!   name_len      u32
//!   name          name_len bytes, UTF-8 (e.g. "layer.0.query.weight")
//!   len           u64      element count
//!   data          len f64, row-major for matrices
//! ```
//!
//! Tensor shapes are implied by the config and the tensor name; loading
//! verifies the name order and every element count against the config before
//! accepting the file.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use puncase_core::model::{EncoderConfig, ModelParameters};
use puncase_core::tokenizer::TokenizerMode;

const MAGIC: &[u8; 8] = b"PCCKPT01";

pub struct Checkpoint {
    pub params: ModelParameters,
    pub mode: TokenizerMode,
    pub vocab_hash: u64,
}

pub fn save(
    path: &Path,
    params: &ModelParameters,
    mode: TokenizerMode,
    vocab_hash: u64,
) -> Result<()> {
    let file =
        fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&[match mode {
        TokenizerMode::Word => 0u8,
        TokenizerMode::Subword => 1u8,
    }])?;
    let config = &params.config;
    for dim in [
        config.num_layers,
        config.hidden_dim,
        config.num_heads,
        config.ff_dim,
        config.max_seq_len,
        config.vocab_size,
    ] {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    w.write_all(&config.dropout_rate.to_le_bytes())?;
    w.write_all(&vocab_hash.to_le_bytes())?;
    w.write_all(&(params.tensor_count() as u32).to_le_bytes())?;
    for t in 0..params.tensor_count() {
        let name = params.tensor_name(t);
        let data = params.tensor(t);
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(data.len() as u64).to_le_bytes())?;
        for &v in data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .with_context(|| format!("{}: truncated header", path.display()))?;
    if &magic != MAGIC {
        bail!("{}: not a puncase checkpoint", path.display());
    }
    let mode = match read_u8(&mut r)? {
        0 => TokenizerMode::Word,
        1 => TokenizerMode::Subword,
        other => bail!("{}: unknown tokenizer mode {other}", path.display()),
    };
    let config = EncoderConfig {
        num_layers: read_u32(&mut r)? as usize,
        hidden_dim: read_u32(&mut r)? as usize,
        num_heads: read_u32(&mut r)? as usize,
        ff_dim: read_u32(&mut r)? as usize,
        max_seq_len: read_u32(&mut r)? as usize,
        vocab_size: read_u32(&mut r)? as usize,
        dropout_rate: read_f64(&mut r)?,
    };
    config
        .validate()
        .map_err(|e| anyhow::anyhow!("{}: invalid stored config: {e}", path.display()))?;
    let vocab_hash = read_u64(&mut r)?;

    let mut params = ModelParameters::zeros(&config);
    let tensor_count = read_u32(&mut r)? as usize;
    if tensor_count != params.tensor_count() {
        bail!(
            "{}: {tensor_count} tensors stored, config implies {}",
            path.display(),
            params.tensor_count()
        );
    }
    for t in 0..tensor_count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .with_context(|| format!("{}: tensor {t} name not UTF-8", path.display()))?;
        let expected = params.tensor_name(t);
        if name != expected {
            bail!(
                "{}: tensor {t} named {name:?}, expected {expected:?}",
                path.display()
            );
        }
        let len = read_u64(&mut r)? as usize;
        let slot = params.tensor_mut(t);
        if len != slot.len() {
            bail!(
                "{}: tensor {name} holds {len} elements, config implies {}",
                path.display(),
                slot.len()
            );
        }
        let mut buf = [0u8; 8];
        for v in slot.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        bail!("{}: trailing bytes after tensors", path.display());
    }
    Ok(Checkpoint {
        params,
        mode,
        vocab_hash,
    })
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut buf = [0u8; 1];
    r.read_exact(&mut buf)?;
    Ok(buf[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
