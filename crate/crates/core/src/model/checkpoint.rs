//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "ADVSENT1"
//! hash_dim u32, hidden_dim u32, dropout f64
//! block count u32 (always 8), then per block in fixed order:
//!   name length u16, name bytes (UTF-8)
//!   rank u32, dims (u64 each)
//!   values (f64 little-endian, row-major)
//! ```
//!
//! Values are written bit-for-bit, so a write/read round trip is exact and
//! identical parameters always produce identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams, ParamBlock};

const MAGIC: &[u8; 8] = b"ADVSENT1";

pub fn write_checkpoint(path: &Path, cfg: &ModelConfig, params: &ModelParams) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_into(&mut w, cfg, params).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_into<W: Write>(w: &mut W, cfg: &ModelConfig, params: &ModelParams) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(cfg.hash_dim as u32).to_le_bytes())?;
    w.write_all(&(cfg.hidden_dim as u32).to_le_bytes())?;
    w.write_all(&cfg.dropout.to_le_bytes())?;
    w.write_all(&(ParamBlock::ALL.len() as u32).to_le_bytes())?;
    for block in ParamBlock::ALL {
        let tensor = params.block(block);
        let name = block.name().as_bytes();
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &dim in tensor.shape() {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
        for &value in tensor.data() {
            w.write_all(&value.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(ModelConfig, ModelParams)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    read_from(&mut r).map_err(|e| match e {
        ReadError::Io(io) => Error::io(path, io),
        ReadError::Format(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
    })
}

enum ReadError {
    Io(std::io::Error),
    Format(String),
}

impl From<std::io::Error> for ReadError {
    fn from(e: std::io::Error) -> Self {
        ReadError::Io(e)
    }
}

fn read_from<R: Read>(r: &mut R) -> std::result::Result<(ModelConfig, ModelParams), ReadError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ReadError::Format("bad magic, not a checkpoint".to_string()));
    }
    let hash_dim = read_u32(r)? as usize;
    let hidden_dim = read_u32(r)? as usize;
    let dropout = f64::from_le_bytes(read_array::<8, R>(r)?);
    let cfg = ModelConfig {
        hash_dim,
        hidden_dim,
        dropout,
    };
    let count = read_u32(r)? as usize;
    if count != ParamBlock::ALL.len() {
        return Err(ReadError::Format(format!(
            "expected {} parameter blocks, found {count}",
            ParamBlock::ALL.len()
        )));
    }

    let mut params = ModelParams::init(&ModelConfig { hash_dim: 1, hidden_dim: 1, dropout }, 0);
    for block in ParamBlock::ALL {
        let name_len = u16::from_le_bytes(read_array::<2, R>(r)?) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        if name != block.name().as_bytes() {
            return Err(ReadError::Format(format!(
                "expected block `{}`, found `{}`",
                block.name(),
                String::from_utf8_lossy(&name)
            )));
        }
        let rank = read_u32(r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(read_array::<8, R>(r)?) as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = vec![0.0f64; len];
        for value in &mut data {
            *value = f64::from_le_bytes(read_array::<8, R>(r)?);
        }
        *params.block_mut(block) = Tensor::new(shape, data)
            .map_err(|e| ReadError::Format(format!("block `{}`: {e}", block.name())))?;
    }

    // Cross-check the header against the actual encoder shape.
    if params.encoder_weight.shape() != [cfg.hash_dim, cfg.hidden_dim] {
        return Err(ReadError::Format(format!(
            "encoder shape {:?} does not match header ({}, {})",
            params.encoder_weight.shape(),
            cfg.hash_dim,
            cfg.hidden_dim
        )));
    }
    Ok((cfg, params))
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    Ok(u32::from_le_bytes(read_array::<4, R>(r)?))
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> std::io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}
