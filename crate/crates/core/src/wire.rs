//! Length-prefixed little-endian framing shared by every canonical encoding.

use crate::group::{self, GroupPoint, Scalar, POINT_LEN, SCALAR_LEN};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("unexpected end of input: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("{0} trailing bytes after record")]
    TrailingBytes(usize),
    #[error("invalid point encoding")]
    InvalidPoint,
    #[error("non-canonical scalar encoding")]
    InvalidScalar,
    #[error("invalid utf-8 string")]
    InvalidString,
    #[error("length {0} exceeds limit")]
    LengthOverflow(u64),
    #[error("unknown tag {0:#04x}")]
    UnknownTag(u8),
    #[error("{0}")]
    Invalid(&'static str),
}

#[derive(Debug, Default, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    /// `u32` length prefix followed by the bytes.
    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.u32(len_u32(bytes.len()));
        self.raw(bytes)
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn point(&mut self, p: &GroupPoint) -> &mut Self {
        self.raw(&group::encode_point(p))
    }

    pub fn scalar(&mut self, s: &Scalar) -> &mut Self {
        self.raw(s.as_bytes())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) fn len_u32(len: usize) -> u32 {
    u32::try_from(len).expect("record component longer than u32::MAX")
}

#[derive(Debug, Clone)]
pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() < n {
            return Err(WireError::Truncated {
                needed: n - self.buf.len(),
            });
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, WireError> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], WireError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    pub fn string(&mut self) -> Result<String, WireError> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec()).map_err(|_| WireError::InvalidString)
    }

    pub fn point(&mut self) -> Result<GroupPoint, WireError> {
        group::decode_point(self.take(POINT_LEN)?).map_err(|_| WireError::InvalidPoint)
    }

    pub fn scalar(&mut self) -> Result<Scalar, WireError> {
        group::decode_scalar(self.take(SCALAR_LEN)?).map_err(|_| WireError::InvalidScalar)
    }

    /// Reads a count that prefixes `item_len`-byte items, refusing counts the
    /// remaining input cannot possibly hold.
    pub fn count(&mut self, item_len: usize) -> Result<usize, WireError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(item_len) > self.buf.len() {
            return Err(WireError::LengthOverflow(n as u64));
        }
        Ok(n)
    }

    pub fn finish(self) -> Result<(), WireError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(WireError::TrailingBytes(self.buf.len()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group;

    #[test]
    fn fields_round_trip() {
        let p = group::mul_base(&Scalar::from(9u64));
        let mut w = Writer::new();
        w.u8(7)
            .u32(70_000)
            .u64(u64::MAX)
            .bytes(b"abc")
            .str("naïve")
            .point(&p)
            .scalar(&Scalar::ONE);
        let buf = w.finish();
        let mut r = Reader::new(&buf);
        assert_eq!(r.u8(), Ok(7));
        assert_eq!(r.u32(), Ok(70_000));
        assert_eq!(r.u64(), Ok(u64::MAX));
        assert_eq!(r.bytes(), Ok(&b"abc"[..]));
        assert_eq!(r.string().unwrap(), "naïve");
        assert_eq!(r.point(), Ok(p));
        assert_eq!(r.scalar(), Ok(Scalar::ONE));
        assert_eq!(r.finish(), Ok(()));
    }

    #[test]
    fn truncation_and_trailing_bytes() {
        assert!(matches!(Reader::new(&[1, 2]).u32(), Err(WireError::Truncated { .. })));
        let mut r = Reader::new(&[5, 0, 0, 0, 1]);
        assert!(matches!(r.bytes(), Err(WireError::Truncated { .. })));
        let mut r = Reader::new(&[1, 2]);
        r.u8().unwrap();
        assert_eq!(r.finish(), Err(WireError::TrailingBytes(1)));
    }

    #[test]
    fn count_refuses_lengths_beyond_the_buffer() {
        let mut w = Writer::new();
        w.u32(u32::MAX);
        let buf = w.finish();
        assert!(Reader::new(&buf).count(64).is_err());
        let mut w = Writer::new();
        w.u32(2).raw(&[0; 128]);
        let buf = w.finish();
        assert_eq!(Reader::new(&buf).count(64), Ok(2));
    }
}
