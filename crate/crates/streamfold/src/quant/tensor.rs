//! Densely bit-packed tensor container and its binary file format.
//!
//! Elements are packed LSB-first: element `i` occupies bits
//! `[i*bits, (i+1)*bits)` of a little-endian bit stream, so the lowest-index
//! element sits in the least significant bits of each 64-bit word. The file
//! format is: magic `QTNS`, version byte, encoding byte, bits byte, rank byte,
//! one little-endian u32 per dimension, then the payload padded with zero bits
//! to a byte boundary.

use std::io::{Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"QTNS";
const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// Unsigned activation level codes in `0..2^bits`.
    UnsignedLevel,
    /// One bit per weight; 1 decodes to +1, 0 to -1.
    Bipolar,
    /// Two's complement weight codes.
    TwosComplement,
    /// Sign-extended raw accumulator values.
    SignedAccumulator,
}

impl Encoding {
    pub fn as_byte(self) -> u8 {
        match self {
            Encoding::UnsignedLevel => 0,
            Encoding::Bipolar => 1,
            Encoding::TwosComplement => 2,
            Encoding::SignedAccumulator => 3,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            0 => Encoding::UnsignedLevel,
            1 => Encoding::Bipolar,
            2 => Encoding::TwosComplement,
            3 => Encoding::SignedAccumulator,
            other => {
                return Err(Error::parse("tensor", format!("unknown encoding byte {other}")))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QTensor {
    dims: Vec<u32>,
    bits: u8,
    encoding: Encoding,
    payload: Vec<u8>,
}

impl QTensor {
    /// All-zero tensor. `bits` must be in 1..=64 and the dimensions non-empty
    /// and positive.
    pub fn zeroed(dims: &[u32], bits: u8, encoding: Encoding) -> Result<Self> {
        if bits == 0 || bits > 64 {
            return Err(Error::TensorMismatch(format!("bits {bits} outside 1..=64")));
        }
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::TensorMismatch(format!("bad dimensions {dims:?}")));
        }
        let count = dims.iter().map(|&d| d as u64).product::<u64>();
        let bytes = (count * bits as u64 + 7) / 8;
        if bytes > (1 << 32) {
            return Err(Error::TensorMismatch("tensor too large".into()));
        }
        Ok(QTensor {
            dims: dims.to_vec(),
            bits,
            encoding,
            payload: vec![0u8; bytes as usize],
        })
    }

    /// Builds a tensor from per-element codes in index order. Codes must fit
    /// in `bits`.
    pub fn from_codes(dims: &[u32], bits: u8, encoding: Encoding, codes: &[u64]) -> Result<Self> {
        let mut t = Self::zeroed(dims, bits, encoding)?;
        if codes.len() != t.len() {
            return Err(Error::LengthMismatch {
                left: codes.len(),
                right: t.len(),
            });
        }
        for (i, &code) in codes.iter().enumerate() {
            t.set(i, code)?;
        }
        Ok(t)
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    /// Element count.
    pub fn len(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Raw code of element `idx` (flat index).
    pub fn get(&self, idx: usize) -> u64 {
        debug_assert!(idx < self.len());
        let bits = self.bits as usize;
        let base = idx * bits;
        let mut v = 0u64;
        for b in 0..bits {
            let bit = base + b;
            if (self.payload[bit >> 3] >> (bit & 7)) & 1 == 1 {
                v |= 1 << b;
            }
        }
        v
    }

    pub fn set(&mut self, idx: usize, code: u64) -> Result<()> {
        if idx >= self.len() {
            return Err(Error::TensorMismatch(format!(
                "index {idx} out of range for {} elements",
                self.len()
            )));
        }
        if self.bits < 64 && code >> self.bits != 0 {
            return Err(Error::TensorMismatch(format!(
                "code {code} does not fit in {} bits",
                self.bits
            )));
        }
        let bits = self.bits as usize;
        let base = idx * bits;
        for b in 0..bits {
            let bit = base + b;
            let mask = 1u8 << (bit & 7);
            if (code >> b) & 1 == 1 {
                self.payload[bit >> 3] |= mask;
            } else {
                self.payload[bit >> 3] &= !mask;
            }
        }
        Ok(())
    }

    /// Element as a signed integer under this tensor's encoding: bipolar codes
    /// map to +-1, two's complement and accumulator codes are sign-extended,
    /// level codes are returned unchanged.
    pub fn signed_value(&self, idx: usize) -> i64 {
        let code = self.get(idx);
        match self.encoding {
            Encoding::UnsignedLevel => code as i64,
            Encoding::Bipolar => {
                if code & 1 == 1 {
                    1
                } else {
                    -1
                }
            }
            Encoding::TwosComplement | Encoding::SignedAccumulator => {
                sign_extend(code, self.bits)
            }
        }
    }

    /// Flat index for a rank-3 tensor laid out (row, col, channel).
    pub fn index3(&self, y: u32, x: u32, c: u32) -> usize {
        debug_assert_eq!(self.dims.len(), 3);
        ((y as usize * self.dims[1] as usize) + x as usize) * self.dims[2] as usize + c as usize
    }

    /// Flat index for a rank-4 tensor laid out (out ch, in ch, row, col).
    pub fn index4(&self, o: u32, i: u32, kh: u32, kw: u32) -> usize {
        debug_assert_eq!(self.dims.len(), 4);
        (((o as usize * self.dims[1] as usize) + i as usize) * self.dims[2] as usize
            + kh as usize)
            * self.dims[3] as usize
            + kw as usize
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[
            VERSION,
            self.encoding.as_byte(),
            self.bits,
            self.dims.len() as u8,
        ])?;
        for &d in &self.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&self.payload)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut head = [0u8; 8];
        r.read_exact(&mut head)?;
        if &head[0..4] != MAGIC {
            return Err(Error::parse("tensor", "bad magic, not a QTNS file"));
        }
        if head[4] != VERSION {
            return Err(Error::parse(
                "tensor",
                format!("unsupported version {}", head[4]),
            ));
        }
        let encoding = Encoding::from_byte(head[5])?;
        let bits = head[6];
        let rank = head[7] as usize;
        if rank == 0 {
            return Err(Error::parse("tensor", "rank must be at least 1"));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut buf = [0u8; 4];
            r.read_exact(&mut buf)?;
            dims.push(u32::from_le_bytes(buf));
        }
        let mut t = Self::zeroed(&dims, bits, encoding)?;
        r.read_exact(&mut t.payload)?;
        let used_bits = t.len() * bits as usize;
        let tail = t.payload.len() * 8 - used_bits;
        if tail > 0 {
            let last = *t.payload.last().unwrap();
            if last >> (8 - tail) != 0 {
                return Err(Error::parse("tensor", "nonzero padding bits"));
            }
        }
        Ok(t)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        Self::read_from(&mut f)
    }
}

pub(crate) fn sign_extend(code: u64, bits: u8) -> i64 {
    if bits >= 64 {
        return code as i64;
    }
    let shift = 64 - bits as u32;
    ((code << shift) as i64) >> shift
}
