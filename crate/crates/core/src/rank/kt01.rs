//! KT01 kernel files.
//!
//! Little-endian layout: magic `KT01`, `u16` name length, UTF-8 name,
//! `u32` ndim (always 4), `ndim` × `u32` dims `(c_out, c_in, k, k)`, then
//! `product(dims)` × `f32` in row-major order.

use std::fs;
use std::path::Path;

use super::{KernelTensor, RankError};

pub const MAGIC: &[u8; 4] = b"KT01";

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RankError> {
        let end = self.pos.checked_add(n).ok_or(RankError::Truncated)?;
        let out = self.bytes.get(self.pos..end).ok_or(RankError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, RankError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, RankError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_kernel(bytes: &[u8]) -> Result<KernelTensor, RankError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4).map_err(|_| RankError::BadMagic)? != MAGIC {
        return Err(RankError::BadMagic);
    }
    let name_len = cur.u16()? as usize;
    let layer_name = std::str::from_utf8(cur.take(name_len)?)
        .map_err(|e| RankError::BadShape(format!("layer name is not UTF-8: {e}")))?
        .to_string();
    let ndim = cur.u32()?;
    if ndim != 4 {
        return Err(RankError::BadShape(format!("ndim must be 4, got {ndim}")));
    }
    let mut dims = [0u32; 4];
    for d in dims.iter_mut() {
        *d = cur.u32()?;
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .filter(|c| c.checked_mul(4).is_some())
        .ok_or(RankError::DimOverflow)?;
    let payload = cur.take(count * 4)?;
    if cur.pos != bytes.len() {
        return Err(RankError::TrailingBytes(bytes.len() - cur.pos));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    KernelTensor::new(layer_name, dims, data)
}

pub fn encode_kernel(t: &KernelTensor) -> Vec<u8> {
    let name = t.layer_name.as_bytes();
    let mut out = Vec::with_capacity(4 + 2 + name.len() + 4 + 16 + t.data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name);
    out.extend_from_slice(&4u32.to_le_bytes());
    for d in t.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn load_kernel(path: impl AsRef<Path>) -> Result<KernelTensor, RankError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| RankError::Io(format!("{}: {e}", path.display())))?;
    decode_kernel(&bytes)
}

pub fn write_kernel(path: impl AsRef<Path>, t: &KernelTensor) -> Result<(), RankError> {
    let path = path.as_ref();
    fs::write(path, encode_kernel(t)).map_err(|e| RankError::Io(format!("{}: {e}", path.display())))
}
