//! `AFT1` tensor blobs: magic `AFT1`, `u32` LE rank, `rank` × `u32` LE dims,
//! then the raw little-endian `f32` payload.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::FormatError;
use crate::tensor::TensorF32;

pub const TENSOR_MAGIC: [u8; 4] = *b"AFT1";

pub fn encode_tensor(t: &TensorF32) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.rank() + 4 * t.len());
    write_tensor(&mut out, t);
    out
}

pub fn write_tensor(out: &mut Vec<u8>, t: &TensorF32) {
    out.extend_from_slice(&TENSOR_MAGIC);
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Decodes a buffer holding exactly one tensor.
pub fn decode_tensor(bytes: &[u8]) -> Result<TensorF32, FormatError> {
    let mut r = Reader::new(bytes);
    let t = r.tensor()?;
    r.finish()?;
    Ok(t)
}

/// Bounds-checked little-endian cursor.
pub struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<(), FormatError> {
        let available = self.bytes.len() - self.pos;
        let found = &self.bytes[self.pos..self.pos + available.min(4)];
        if found != expected {
            return Err(FormatError::BadMagic {
                expected,
                found: found.to_vec(),
            });
        }
        self.pos += 4;
        Ok(())
    }

    pub fn u16(&mut self) -> Result<u16, FormatError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn tensor(&mut self) -> Result<TensorF32, FormatError> {
        self.magic(TENSOR_MAGIC)?;
        let rank = self.u32()? as usize;
        if rank == 0 {
            return Err(FormatError::InvalidHeader("rank 0".into()));
        }
        // Every dim needs 4 bytes, so a rank larger than the remaining input is
        // necessarily truncated; check before allocating.
        if rank > (self.bytes.len() - self.pos) / 4 {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: rank * 4,
                available: self.bytes.len() - self.pos,
            });
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d = self.u32()? as usize;
            if d == 0 {
                return Err(FormatError::InvalidHeader("zero-sized dimension".into()));
            }
            dims.push(d);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| FormatError::InvalidHeader("element count overflows".into()))?;
        let payload = self.take(count)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        TensorF32::new(dims, data).map_err(|e| FormatError::InvalidHeader(e.to_string()))
    }

    pub fn finish(self) -> Result<(), FormatError> {
        let rest = self.bytes.len() - self.pos;
        if rest != 0 {
            return Err(FormatError::TrailingBytes(rest));
        }
        Ok(())
    }
}
