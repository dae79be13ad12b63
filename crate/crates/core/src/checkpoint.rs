//! Versioned binary checkpoints.
//!
//! ```text
//! magic        4 bytes  "RJCM"
//! version      u32      currently 1
//! config_len   u64
//! config       config_len bytes of UTF-8 JSON (CheckpointHeader)
//! n_tensors    u64
//! per tensor:
//!   name_len   u32
//!   name       name_len bytes, UTF-8
//!   rows       u64
//!   cols       u64
//!   payload    rows * cols f64, row-major
//! ```
//!
//! All integers and floats are little-endian. Model parameters come first in
//! declaration order, followed by the normalization statistics as
//! `norm.{a,v,t}.mean` and `norm.{a,v,t}.std` column vectors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ModalityStats, NormTarget, Normalizer};
use crate::error::{Error, Result};
use crate::fusion::Modality;
use crate::metrics::Target;
use crate::model::{Model, ModelConfig, ParamStore};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RJCM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    pub target: Target,
    pub norm_targets: [NormTarget; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub target: Target,
    pub normalizer: Normalizer,
}

fn put_tensor(buf: &mut Vec<u8>, name: &str, t: &Tensor) {
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.extend_from_slice(&(t.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(t.cols() as u64).to_le_bytes());
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let header = CheckpointHeader {
            model: self.model.config().clone(),
            target: self.target,
            norm_targets: self.normalizer.stats.each_ref().map(|s| s.target),
        };
        let config = serde_json::to_vec(&header)?;
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(config.len() as u64).to_le_bytes());
        buf.extend_from_slice(&config);
        let store = self.model.store();
        buf.extend_from_slice(&((store.len() + 6) as u64).to_le_bytes());
        for (name, t) in store.iter() {
            put_tensor(&mut buf, name, t);
        }
        for m in Modality::ALL {
            let s = &self.normalizer.stats[m.index()];
            put_tensor(&mut buf, &format!("norm.{}.mean", m.tag()), &Tensor::from_raw(s.mean.len(), 1, s.mean.clone()));
            put_tensor(&mut buf, &format!("norm.{}.std", m.tag()), &Tensor::from_raw(s.std.len(), 1, s.std.clone()));
        }
        Ok(buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize, what: &str| -> Result<(usize, &[u8])> {
            let start = pos;
            match start.checked_add(n).filter(|&e| e <= bytes.len()) {
                Some(end) => {
                    pos = end;
                    Ok((start, &bytes[start..end]))
                }
                None => Err(Error::Format { offset: start as u64, msg: format!("truncated while reading {what}") }),
            }
        };
        let (_, magic) = take(4, "magic")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Format { offset: 0, msg: "bad magic, expected RJCM".into() });
        }
        let (at, v) = take(4, "version")?;
        let version = u32::from_le_bytes(v.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format { offset: at as u64, msg: format!("unsupported checkpoint version {version}") });
        }
        let (_, len) = take(8, "config length")?;
        let len = u64::from_le_bytes(len.try_into().unwrap()) as usize;
        let (at, config) = take(len, "config")?;
        let header: CheckpointHeader = serde_json::from_slice(config)
            .map_err(|e| Error::Format { offset: at as u64, msg: format!("config block: {e}") })?;
        let (_, n) = take(8, "tensor count")?;
        let n = u64::from_le_bytes(n.try_into().unwrap());
        let mut tensors = ParamStore::new();
        for _ in 0..n {
            let (_, nl) = take(4, "name length")?;
            let nl = u32::from_le_bytes(nl.try_into().unwrap()) as usize;
            let (at, name) = take(nl, "name")?;
            let name = std::str::from_utf8(name)
                .map_err(|_| Error::Format { offset: at as u64, msg: "tensor name is not UTF-8".into() })?
                .to_string();
            let (_, r) = take(8, "rows")?;
            let (_, c) = take(8, "cols")?;
            let rows = u64::from_le_bytes(r.try_into().unwrap()) as usize;
            let cols = u64::from_le_bytes(c.try_into().unwrap()) as usize;
            let size = rows
                .checked_mul(cols)
                .and_then(|s| s.checked_mul(8))
                .ok_or_else(|| Error::Format { offset: at as u64, msg: format!("tensor `{name}` too large") })?;
            let (at, raw) = take(size, "tensor payload")?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            let tensor = Tensor::new(rows, cols, data)
                .map_err(|e| Error::Format { offset: at as u64, msg: format!("tensor `{name}`: {e}") })?;
            tensors.push(name, tensor);
        }
        if pos != bytes.len() {
            return Err(Error::Format { offset: pos as u64, msg: "trailing bytes".into() });
        }

        let mut store = ParamStore::new();
        let mut norm: [Option<(Vec<f64>, Vec<f64>)>; 3] = Default::default();
        let mut pending_mean: [Option<Vec<f64>>; 3] = Default::default();
        for (name, t) in tensors.iter() {
            if let Some(rest) = name.strip_prefix("norm.") {
                let m = Modality::ALL
                    .into_iter()
                    .find(|m| rest.starts_with(&format!("{}.", m.tag())))
                    .ok_or_else(|| Error::Contract(format!("unknown normalization tensor `{name}`")))?;
                if rest.ends_with(".mean") {
                    pending_mean[m.index()] = Some(t.data().to_vec());
                } else if rest.ends_with(".std") {
                    let mean = pending_mean[m.index()]
                        .take()
                        .ok_or_else(|| Error::Contract(format!("`{name}` without matching mean")))?;
                    norm[m.index()] = Some((mean, t.data().to_vec()));
                }
            } else {
                store.push(name, t.clone());
            }
        }
        let [a, v, t] = norm;
        let stats = [a, v, t]
            .into_iter()
            .zip(header.norm_targets)
            .map(|(s, target)| {
                let (mean, std) = s.ok_or_else(|| Error::Contract("missing normalization statistics".into()))?;
                Ok(ModalityStats { mean, std, target })
            })
            .collect::<Result<Vec<_>>>()?;
        let stats: [ModalityStats; 3] = stats.try_into().expect("three modalities");
        for (m, s) in stats.iter().enumerate() {
            let expected = header.model.fusion.dims()[m];
            if s.mean.len() != expected {
                return Err(Error::shape("normalizer", (s.mean.len(), 1), (expected, 1)));
            }
        }
        let model = Model::from_store(header.model, store)?;
        Ok(Self { model, target: header.target, normalizer: Normalizer { stats } })
    }
}
