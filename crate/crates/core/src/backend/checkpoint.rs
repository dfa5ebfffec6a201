//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     4 bytes   b"AIDW"
//! version   u32       FORMAT_VERSION
//! width     u32       bytes per float in every payload (4 = f32, 8 = f64)
//! count     u32       number of entries
//! entry * count:
//!   name_len  u32
//!   name      name_len bytes of UTF-8
//!   rank      u32
//!   dims      rank * u64
//!   payload   product(dims) * width bytes, IEEE-754 little-endian, row-major
//! ```
//!
//! Entries appear in parameter registration order. Readers reject unknown
//! versions rather than guessing.

use std::fs;
use std::path::Path;

use super::params::ParamStore;
use super::tensor::{lit, Real, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"AIDW";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode<T: Real>(store: &ParamStore<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(T::BYTES as u32).to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, t) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in t.data() {
            x.write_le(&mut out);
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!("truncated checkpoint at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a checkpoint; payloads of either width are converted into `T`.
pub fn decode<T: Real>(bytes: &[u8]) -> Result<ParamStore<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let width = r.u32()? as usize;
    if width != 4 && width != 8 {
        return Err(Error::Format(format!("unsupported float width {width}")));
    }
    let count = r.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| Error::Format(format!("entry name is not UTF-8: {e}")))?
            .to_string();
        let rank = r.u32()? as usize;
        let dims = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let payload = r.take(n * width)?;
        let data: Vec<T> = payload
            .chunks(width)
            .map(|c| if width == 4 { lit(f32::read_le(c) as f64) } else { lit(f64::read_le(c)) })
            .collect();
        if store.find(&name).is_some() {
            return Err(Error::Format(format!("duplicate entry {name}")));
        }
        store.add(name, Tensor::from_vec(&dims, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after last entry".into()));
    }
    Ok(store)
}

pub fn save<T: Real>(store: &ParamStore<T>, path: &Path) -> Result<()> {
    fs::write(path, encode(store))?;
    Ok(())
}

pub fn load<T: Real>(path: &Path) -> Result<ParamStore<T>> {
    decode(&fs::read(path)?)
}
