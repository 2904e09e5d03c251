//! Binary checkpoints: config, frozen embeddings, parameters and optimizer
//! state, all little-endian.

use std::path::Path;

use jnrf_tensor::{Scalar, Tensor};

use crate::config::ModelConfig;
use crate::embedding::EmbeddingTable;
use crate::error::{CoreError, Result};
use crate::model::Jnrf;
use crate::train::{AdamConfig, OptimizerState};

pub const MAGIC: &[u8; 8] = b"JNRFCKPT";
pub const VERSION: u32 = 1;

const EMBEDDING: &str = "embedding";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Kind {
    Param = 0,
    Frozen = 1,
    AdamM = 2,
    AdamV = 3,
}

impl Kind {
    fn from_u8(b: u8) -> Result<Self> {
        Ok(match b {
            0 => Kind::Param,
            1 => Kind::Frozen,
            2 => Kind::AdamM,
            3 => Kind::AdamV,
            _ => return Err(CoreError::Checkpoint(format!("unknown record kind {b}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub model: Jnrf<T>,
    pub optimizer: Option<OptimizerState<T>>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_record<T: Scalar>(out: &mut Vec<u8>, name: &str, kind: Kind, t: &Tensor<T>) {
    put_u32(out, name.len());
    out.extend_from_slice(name.as_bytes());
    out.push(kind as u8);
    put_u32(out, t.rows());
    put_u32(out, t.cols());
    for &x in t.data() {
        out.extend_from_slice(&x.as_f64().to_le_bytes());
    }
}

pub fn to_bytes<T: Scalar>(model: &Jnrf<T>, optimizer: Option<&OptimizerState<T>>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let config = model.config.to_text();
    put_u32(&mut out, config.len());
    out.extend_from_slice(config.as_bytes());

    let p = &model.params;
    let n_records = 1 + p.len() * if optimizer.is_some() { 3 } else { 1 };
    put_u32(&mut out, n_records);
    put_record(&mut out, EMBEDDING, Kind::Frozen, model.table.weights());
    for slot in 0..p.len() {
        put_record(&mut out, p.name(slot), Kind::Param, p.get(slot));
    }
    match optimizer {
        Some(opt) => {
            for slot in 0..p.len() {
                put_record(&mut out, p.name(slot), Kind::AdamM, &opt.m[slot]);
                put_record(&mut out, p.name(slot), Kind::AdamV, &opt.v[slot]);
            }
            out.push(1);
            out.extend_from_slice(&opt.step.to_le_bytes());
            let c = opt.config;
            for x in [c.lr, c.beta1, c.beta2, c.eps] {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        None => out.push(0),
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            CoreError::Checkpoint(format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CoreError::Checkpoint("invalid utf-8 string".into()))
    }
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(CoreError::Checkpoint("not a checkpoint file".into()));
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(CoreError::Checkpoint(format!("unsupported version {version}, expected {VERSION}")));
    }
    let config = ModelConfig::from_text(&r.string()?)?;
    let n_records = r.u32()?;
    let mut records = Vec::with_capacity(n_records);
    for _ in 0..n_records {
        let name = r.string()?;
        let kind = Kind::from_u8(r.u8()?)?;
        let (rows, cols) = (r.u32()?, r.u32()?);
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| CoreError::Checkpoint(format!("record {name} too large")))?;
        let raw = r.take(len.checked_mul(8).ok_or_else(|| CoreError::Checkpoint(format!("record {name} too large")))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        records.push((name, kind, Tensor::from_vec(rows, cols, data)?));
    }

    let table = records
        .iter()
        .find(|(n, k, _)| *k == Kind::Frozen && n == EMBEDDING)
        .map(|(_, _, t)| EmbeddingTable::new(t.clone()))
        .ok_or_else(|| CoreError::Checkpoint("missing embedding table".into()))?;
    let mut model = Jnrf::new(config, table)?;
    let mut m = model.params.zeros_like();
    let mut v = model.params.zeros_like();
    let mut seen = vec![false; model.params.len()];
    for (name, kind, t) in records {
        match kind {
            Kind::Frozen => {}
            Kind::Param => {
                model.params.assign(&name, t)?;
                seen[model.params.slot(&name).unwrap()] = true;
            }
            Kind::AdamM | Kind::AdamV => {
                let slot = model
                    .params
                    .slot(&name)
                    .ok_or_else(|| CoreError::Checkpoint(format!("optimizer state for unknown parameter {name}")))?;
                let expected = model.params.get(slot).shape();
                if t.shape() != expected {
                    return Err(CoreError::ParamShape {
                        name,
                        expected,
                        found: t.shape(),
                    });
                }
                if kind == Kind::AdamM {
                    m[slot] = t;
                } else {
                    v[slot] = t;
                }
            }
        }
    }
    if let Some(slot) = seen.iter().position(|s| !s) {
        return Err(CoreError::Checkpoint(format!("missing parameter {}", model.params.name(slot))));
    }
    let optimizer = match r.u8()? {
        0 => None,
        _ => {
            let step = r.u64()?;
            let config = AdamConfig {
                lr: r.f64()?,
                beta1: r.f64()?,
                beta2: r.f64()?,
                eps: r.f64()?,
            };
            Some(OptimizerState { config, m, v, step })
        }
    };
    if r.pos != bytes.len() {
        return Err(CoreError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint { model, optimizer })
}

pub fn save_checkpoint<T: Scalar>(path: &Path, model: &Jnrf<T>, optimizer: Option<&OptimizerState<T>>) -> Result<()> {
    std::fs::write(path, to_bytes(model, optimizer)).map_err(|e| CoreError::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
    from_bytes(&bytes)
}
