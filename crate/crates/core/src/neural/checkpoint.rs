//! Binary parameter checkpoints.
//!
//! Layout (all integers `u32` little-endian):
//!
//! ```text
//! magic        8 bytes  "SKYFCKPT"
//! version      u32      1
//! layer_count  u32
//! per layer:   u32 tensor_count (0 or 2)
//!              per tensor: u32 rank, then `rank` u32 dims
//! payload      f64 little-endian, layer order, weight before bias
//! ```

use std::path::Path;

use crate::error::{Error, Result};

use super::params::{LayerParams, ParamStore};
use super::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"SKYFCKPT";
pub const VERSION: u32 = 1;

pub fn encode(params: &ParamStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.layer_count() as u32).to_le_bytes());
    for slot in params.slots() {
        match slot {
            None => out.extend_from_slice(&0u32.to_le_bytes()),
            Some(p) => {
                out.extend_from_slice(&2u32.to_le_bytes());
                for t in [&p.weight, &p.bias] {
                    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
                    for &d in t.shape() {
                        out.extend_from_slice(&(d as u32).to_le_bytes());
                    }
                }
            }
        }
    }
    for (_, p) in params.iter() {
        for v in p.weight.data().iter().chain(p.bias.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(format!("truncated at byte {}", self.at));
        };
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn decode_inner(bytes: &[u8]) -> std::result::Result<ParamStore, String> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let layers = r.u32()? as usize;
    let mut shapes = Vec::with_capacity(layers.min(4096));
    for i in 0..layers {
        match r.u32()? {
            0 => shapes.push(None),
            2 => {
                let mut pair = Vec::with_capacity(2);
                for _ in 0..2 {
                    let rank = r.u32()? as usize;
                    if rank > 8 {
                        return Err(format!("layer {i}: rank {rank} too large"));
                    }
                    let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
                    pair.push(dims);
                }
                let bias = pair.pop().expect("two shapes");
                let weight = pair.pop().expect("two shapes");
                shapes.push(Some((weight, bias)));
            }
            n => return Err(format!("layer {i}: {n} tensors")),
        }
    }
    let mut slots = Vec::with_capacity(shapes.len());
    for shape in shapes {
        let Some((ws, bs)) = shape else {
            slots.push(None);
            continue;
        };
        let mut read = |s: Vec<usize>| -> std::result::Result<Tensor, String> {
            let n: usize = s.iter().product();
            let data = (0..n).map(|_| r.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
            Tensor::new(s, data).map_err(|e| e.to_string())
        };
        let weight = read(ws)?;
        let bias = read(bs)?;
        slots.push(Some(LayerParams { weight, bias }));
    }
    if r.at != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.at));
    }
    Ok(ParamStore::from_layers(slots))
}

pub fn decode(bytes: &[u8]) -> Result<ParamStore> {
    decode_inner(bytes).map_err(|reason| Error::Format {
        path: "<checkpoint bytes>".into(),
        reason,
    })
}

/// Writes to a sibling temporary file and renames it into place.
pub fn save(path: &Path, params: &ParamStore) -> Result<()> {
    crate::io_util::write_atomic(path, &encode(params))
}

pub fn load(path: &Path) -> Result<ParamStore> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_inner(&bytes).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}
