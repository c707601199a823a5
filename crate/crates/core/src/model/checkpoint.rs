//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! b"PDMRECKP" | version | element width (4 or 8)
//! | len | model config text | len | free-form notes
//! | tensor count | { len | name | rows | cols | values } ...
//! ```

use std::io::{Read, Write};

use super::config::ModelConfig;
use super::encoder::Model;
use super::params::shapes;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Real};

const MAGIC: &[u8; 8] = b"PDMRECKP";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

/// Serialises `model` with optional `notes` (e.g. the training config).
pub fn to_bytes<T: Real>(model: &Model<T>, notes: &str) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION as usize);
    put_u32(&mut out, T::BYTES);
    put_str(&mut out, &model.config.to_text());
    put_str(&mut out, notes);
    let entries = model.params.entries();
    put_u32(&mut out, entries.len());
    for (name, m) in entries {
        put_str(&mut out, &name);
        put_u32(&mut out, m.rows());
        put_u32(&mut out, m.cols());
        for &v in m.data() {
            v.write_le(&mut out);
        }
    }
    out
}

pub fn save<T: Real>(model: &Model<T>, notes: &str, mut w: impl Write) -> Result<()> {
    w.write_all(&to_bytes(model, notes))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format("checkpoint string is not utf-8".into()))
    }
}

/// Parses a checkpoint, converting stored values to `T`, and checks every
/// tensor name and shape against the embedded config.
pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<(Model<T>, String)> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let width = c.u32()?;
    if width != 4 && width != 8 {
        return Err(Error::Format(format!("unsupported element width {width}")));
    }
    let config = ModelConfig::from_text(&c.string()?)?;
    let notes = c.string()?;
    let expected = shapes(&config);
    let expected = expected.entries();
    let count = c.u32()?;
    if count != expected.len() {
        return Err(Error::Format(format!(
            "checkpoint has {count} tensors, config implies {}",
            expected.len()
        )));
    }
    let mut loaded = Vec::with_capacity(count);
    for (want_name, &(want_r, want_c)) in expected {
        let name = c.string()?;
        let (rows, cols) = (c.u32()?, c.u32()?);
        if name != want_name || (rows, cols) != (want_r, want_c) {
            return Err(Error::Format(format!(
                "tensor `{name}` {rows}x{cols} does not match expected `{want_name}` {want_r}x{want_c}"
            )));
        }
        let raw = c.take(rows * cols * width)?;
        let data = raw
            .chunks_exact(width)
            .map(|b| {
                if width == 4 {
                    T::from_f64_lossy(f32::read_le(b) as f64)
                } else {
                    T::from_f64_lossy(f64::read_le(b))
                }
            })
            .collect();
        loaded.push(Matrix::from_vec(rows, cols, data)?);
    }
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    let mut params = shapes(&config).map(|_, _| Matrix::zeros(0, 0));
    for (slot, m) in params.slots_mut().into_iter().zip(loaded) {
        *slot = m;
    }
    Ok((Model::from_parts(config, params)?, notes))
}

pub fn load<T: Real>(mut r: impl Read) -> Result<(Model<T>, String)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}
