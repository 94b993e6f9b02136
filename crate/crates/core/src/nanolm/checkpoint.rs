//! Checkpoint directories: `config.json` plus `params.bin`.
//!
//! `params.bin` layout (little-endian): magic `NLMP`, format version (u32),
//! element width in bytes (u8), tensor count (u32), then per tensor the
//! name length (u32), UTF-8 name, rank (u32), dims (u64 each) and data.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::model::Model;
use super::real::Real;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"NLMP";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConfigFile {
    format_version: u32,
    model: ModelConfig,
    step: u64,
    width: u8,
}

pub fn save_checkpoint<R: Real>(dir: &Path, model: &Model<R>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let cfg = ConfigFile { format_version: FORMAT_VERSION, model: model.config.clone(), step: model.step, width: R::WIDTH };
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
    let mut out = Vec::with_capacity(model.params.len() * R::WIDTH as usize + 4096);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(R::WIDTH);
    out.extend_from_slice(&(model.layout.tensors().len() as u32).to_le_bytes());
    for t in model.layout.tensors() {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &p in &model.params[t.range.clone()] {
            p.write_le(&mut out);
        }
    }
    let tmp = dir.join("params.bin.tmp");
    fs::write(&tmp, out)?;
    fs::rename(tmp, dir.join("params.bin"))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self.buf.get(self.at..self.at + n).ok_or_else(|| Error::BadCheckpoint("truncated params.bin".into()))?;
        self.at += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_value<S: Real>(bytes: &[u8]) -> f64 {
    S::read_le(bytes).to_f64()
}

/// Loads a checkpoint, converting stored values to precision `R`.
pub fn load_checkpoint<R: Real>(dir: &Path) -> Result<Model<R>> {
    let cfg: ConfigFile = serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)?;
    if cfg.format_version != FORMAT_VERSION {
        return Err(Error::BadCheckpoint(format!("unsupported format version {}", cfg.format_version)));
    }
    let mut model = Model::<R>::init(cfg.model)?;
    model.step = cfg.step;
    let bytes = fs::read(dir.join("params.bin"))?;
    let mut r = Reader { buf: &bytes, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::BadCheckpoint("bad magic".into()));
    }
    if r.u32()? != FORMAT_VERSION {
        return Err(Error::BadCheckpoint("params.bin version mismatch".into()));
    }
    let width = r.take(1)?[0];
    let decode: fn(&[u8]) -> f64 = match width {
        4 => read_value::<f32>,
        8 => read_value::<f64>,
        w => return Err(Error::BadCheckpoint(format!("unsupported element width {w}"))),
    };
    let count = r.u32()? as usize;
    if count != model.layout.tensors().len() {
        return Err(Error::BadCheckpoint(format!("expected {} tensors, found {count}", model.layout.tensors().len())));
    }
    let tensors = model.layout.tensors().to_vec();
    for t in tensors {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| Error::BadCheckpoint("tensor name is not UTF-8".into()))?;
        if name != t.name {
            return Err(Error::BadCheckpoint(format!("expected tensor {}, found {name}", t.name)));
        }
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if shape != t.shape {
            return Err(Error::BadCheckpoint(format!("shape mismatch for {name}: {shape:?} vs {:?}", t.shape)));
        }
        let data = r.take(t.range.len() * width as usize)?;
        for (p, chunk) in model.params[t.range.clone()].iter_mut().zip(data.chunks_exact(width as usize)) {
            *p = R::from_f64(decode(chunk));
        }
    }
    Ok(model)
}
