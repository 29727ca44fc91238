//! Binary weights container.
//!
//! ```text
//! magic    4 bytes  "MRWT"
//! version  u32 LE
//! count    u32 LE
//! count x { name_len u32, name utf-8, ndim u32, dims ndim x u64, data f64 LE }
//! ```
//!
//! Entries are the trainable tensors in registration order, then each
//! batch-norm layer's `<layer>.running_mean` and `<layer>.running_var`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use multirep_core::kernels::Tensor;
use multirep_core::models::Model;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MRWT";
pub const VERSION: u32 = 1;

/// Named tensors as stored in a container.
pub type Entries = Vec<(String, Vec<usize>, Vec<f64>)>;

pub fn model_entries(model: &Model) -> Entries {
    let mut out: Entries = model
        .params()
        .iter()
        .map(|(name, t)| (name.to_string(), t.shape().to_vec(), t.data().to_vec()))
        .collect();
    for (name, state) in model.norm_states() {
        let c = state.channels();
        out.push((format!("{name}.running_mean"), vec![c], state.running_mean.clone()));
        out.push((format!("{name}.running_var"), vec![c], state.running_var.clone()));
    }
    out
}

pub fn encode(entries: &Entries) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, shape, data) in entries {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            format!("truncated at byte {} (needed {n} more)", self.pos)
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Entries, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err("not a weights file (bad magic)".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| "parameter name is not UTF-8".to_string())?
            .to_string();
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            shape.push(usize::try_from(r.u64()?).map_err(|_| format!("{name}: dimension too large"))?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| format!("{name}: shape overflows"))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| format!("{name}: shape overflows"))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push((name, shape, data));
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(out)
}

/// Overwrites `model`'s tensors and running statistics from `entries`.
/// Names and shapes must match exactly.
pub fn apply_entries(model: &mut Model, entries: Entries) -> std::result::Result<(), String> {
    let expected = model_entries(model);
    let mut by_name: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
    for (name, shape, data) in entries {
        if by_name.insert(name.clone(), (shape, data)).is_some() {
            return Err(format!("duplicate entry `{name}`"));
        }
    }
    for (name, shape, _) in &expected {
        match by_name.get(name) {
            None => return Err(format!("missing entry `{name}`")),
            Some((s, _)) if s != shape => {
                return Err(format!("entry `{name}` has shape {s:?}, model expects {shape:?}"))
            }
            _ => {}
        }
    }
    if by_name.len() != expected.len() {
        let extra: Vec<&String> = by_name
            .keys()
            .filter(|k| !expected.iter().any(|(n, _, _)| n == *k))
            .collect();
        return Err(format!("unexpected entries {extra:?}"));
    }
    for (name, t) in model.params_mut().iter_mut() {
        let (shape, data) = by_name.remove(name).expect("checked above");
        *t = Tensor::new(shape, data).map_err(|e| e.to_string())?;
    }
    for (name, state) in model.norm_states_mut() {
        state.running_mean = by_name.remove(&format!("{name}.running_mean")).expect("checked above").1;
        state.running_var = by_name.remove(&format!("{name}.running_var")).expect("checked above").1;
    }
    Ok(())
}

pub fn save_weights(model: &Model, path: &Path) -> Result<()> {
    crate::tsv::write_file(path, &encode(&model_entries(model)))
}

pub fn load_weights(model: &mut Model, path: &Path) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let entries = decode(&bytes).map_err(|m| Error::format(path, m))?;
    apply_entries(model, entries).map_err(|m| Error::format(path, m))
}
