//! `MMF1` feature files.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic        4 bytes  "MMF1"
//! id_len       u32
//! id           id_len bytes, UTF-8
//! fps          f64
//! n_modalities u32      always 3 (audio, visual, text)
//! per modality:
//!   dim        u64
//!   frames     u64
//!   payload    dim * frames f64, row-major (feature-major, one column per frame)
//! n_labels     u64      equals frames
//! valence      n_labels f64, -5 marks a missing annotation
//! arousal      n_labels f64
//! ```

use std::path::Path;

use super::SequenceRecord;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MMF_MAGIC: &[u8; 4] = b"MMF1";

pub fn encode_features(rec: &SequenceRecord) -> Vec<u8> {
    let payload: usize = rec.features.iter().map(|f| f.len() * 8 + 16).sum();
    let mut buf = Vec::with_capacity(32 + rec.id.len() + payload + rec.frames() * 16);
    buf.extend_from_slice(MMF_MAGIC);
    buf.extend_from_slice(&(rec.id.len() as u32).to_le_bytes());
    buf.extend_from_slice(rec.id.as_bytes());
    buf.extend_from_slice(&rec.fps.to_le_bytes());
    buf.extend_from_slice(&3u32.to_le_bytes());
    for f in &rec.features {
        buf.extend_from_slice(&(f.rows() as u64).to_le_bytes());
        buf.extend_from_slice(&(f.cols() as u64).to_le_bytes());
        for v in f.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf.extend_from_slice(&(rec.valence.len() as u64).to_le_bytes());
    for v in rec.valence.iter().chain(&rec.arousal) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn write_features(path: impl AsRef<Path>, rec: &SequenceRecord) -> Result<()> {
    rec.validate()?;
    std::fs::write(path, encode_features(rec))?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<SequenceRecord> {
    decode_features(&std::fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format { offset: self.pos as u64, msg: msg.into() }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(self.err(format!(
                "truncated while reading {what} ({n} bytes needed, {} left)",
                self.bytes.len() - self.pos
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: u64, what: &str) -> Result<Vec<f64>> {
        let bytes = usize::try_from(n)
            .ok()
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| self.err(format!("{what}: length {n} too large")))?;
        let start = self.pos;
        let raw = self.take(bytes, what)?;
        let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format { offset: (start + i * 8) as u64, msg: format!("non-finite value in {what}") });
        }
        Ok(values)
    }
}

pub fn decode_features(bytes: &[u8]) -> Result<SequenceRecord> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != MMF_MAGIC {
        return Err(Error::Format { offset: 0, msg: "bad magic, expected MMF1".into() });
    }
    let id_len = c.u32("id length")? as usize;
    let id_at = c.pos;
    let id = std::str::from_utf8(c.take(id_len, "id")?)
        .map_err(|_| Error::Format { offset: id_at as u64, msg: "id is not UTF-8".into() })?
        .to_string();
    let fps = f64::from_le_bytes(c.take(8, "fps")?.try_into().unwrap());
    let n_mod = c.u32("modality count")?;
    if n_mod != 3 {
        return Err(c.err(format!("expected 3 modalities, found {n_mod}")));
    }
    let mut features = Vec::with_capacity(3);
    let mut frames = None;
    for m in 0..3 {
        let dim = c.u64("dim")?;
        let at = c.pos;
        let t = c.u64("frame count")?;
        if t == 0 {
            return Err(Error::Format { offset: at as u64, msg: "empty sequence (0 frames)".into() });
        }
        if *frames.get_or_insert(t) != t {
            return Err(Error::Format {
                offset: at as u64,
                msg: format!("modality {m} has {t} frames, expected {}", frames.unwrap()),
            });
        }
        if dim == 0 {
            return Err(c.err(format!("modality {m} has zero feature dimension")));
        }
        let count = dim.checked_mul(t).ok_or_else(|| c.err("payload size overflows"))?;
        let data = c.f64s(count, "feature payload")?;
        features.push(Tensor::from_raw(dim as usize, t as usize, data));
    }
    let at = c.pos;
    let n_labels = c.u64("label count")?;
    if Some(n_labels) != frames {
        return Err(Error::Format {
            offset: at as u64,
            msg: format!("{n_labels} labels for {} frames", frames.unwrap()),
        });
    }
    let valence = c.f64s(n_labels, "valence")?;
    let arousal = c.f64s(n_labels, "arousal")?;
    if c.pos != bytes.len() {
        return Err(c.err(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    let [a, v, t]: [Tensor; 3] = features.try_into().expect("three modalities");
    let rec = SequenceRecord { id, features: [a, v, t], valence, arousal, fps };
    rec.validate().map_err(|e| Error::Format { offset: at as u64, msg: e.to_string() })?;
    Ok(rec)
}
