//! Binary framing shared by every serialized object:
//! `"QFHE" | version: u8 | kind: u8 | d: u16 | q: u64`, all little-endian,
//! followed by an object-specific body.

use super::{RingElement, RingParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QFHE";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ObjectKind {
    RingElement = 1,
    PublicKey = 2,
    SecretKey = 3,
    Ciphertext = 4,
    Gsw = 5,
    State = 6,
    Hint = 7,
}

impl ObjectKind {
    fn from_u8(b: u8) -> Result<Self> {
        Ok(match b {
            1 => Self::RingElement,
            2 => Self::PublicKey,
            3 => Self::SecretKey,
            4 => Self::Ciphertext,
            5 => Self::Gsw,
            6 => Self::State,
            7 => Self::Hint,
            _ => return Err(Error::Decode(format!("unknown object kind {b}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub kind: ObjectKind,
    pub d: u16,
    pub q: u64,
}

impl Header {
    pub fn new(kind: ObjectKind, d: usize, q: u64) -> Self {
        Self { kind, d: d as u16, q }
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.kind as u8);
        out.extend_from_slice(&self.d.to_le_bytes());
        out.extend_from_slice(&self.q.to_le_bytes());
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self> {
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::Decode("bad magic".into()));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::Decode(format!("unsupported version {version}")));
        }
        let kind = ObjectKind::from_u8(r.u8()?)?;
        let d = r.u16()?;
        let q = r.u64()?;
        Ok(Self { kind, d, q })
    }

    /// Peeks at the kind tag without consuming anything.
    pub fn peek_kind(bytes: &[u8]) -> Option<ObjectKind> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return None;
        }
        ObjectKind::from_u8(bytes[5]).ok()
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Decode(format!("truncated input at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Decode(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }

    /// d little-endian u64 coefficients, each checked against q.
    pub fn poly(&mut self, d: usize, q: u64) -> Result<RingElement> {
        let mut coeffs = Vec::with_capacity(d);
        for _ in 0..d {
            let c = self.u64()?;
            if c >= q {
                return Err(Error::Decode(format!("coefficient {c} not reduced mod {q}")));
            }
            coeffs.push(c);
        }
        Ok(RingElement { coeffs, q })
    }
}

pub fn write_poly(out: &mut Vec<u8>, a: &RingElement) {
    for c in &a.coeffs {
        out.extend_from_slice(&c.to_le_bytes());
    }
}

impl RingElement {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.coeffs.len());
        Header::new(ObjectKind::RingElement, self.coeffs.len(), self.q).write(&mut out);
        write_poly(&mut out, self);
        out
    }

    pub fn from_bytes(bytes: &[u8], p: &RingParams) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let h = Header::read(&mut r)?;
        if h.kind != ObjectKind::RingElement || h.d as usize != p.d || h.q != p.q {
            return Err(Error::ParamMismatch(format!("header {h:?} does not match params")));
        }
        let e = r.poly(p.d, p.q)?;
        r.finish()?;
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::sample_uniform;
    use crate::rng::SeededGenerator;

    #[test]
    fn roundtrip_and_layout() {
        let p = RingParams::new(64, 1_073_741_953, 3, "toy").unwrap();
        let a = sample_uniform(&p, &mut SeededGenerator::from_u64(3));
        let bytes = a.to_bytes();
        assert_eq!(bytes.len(), 16 + 64 * 8);
        assert_eq!(&bytes[..4], b"QFHE");
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), p.q);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), a.coeffs[0]);
        assert_eq!(RingElement::from_bytes(&bytes, &p).unwrap(), a);
        assert!(RingElement::from_bytes(&bytes[..100], &p).is_err());
    }
}
