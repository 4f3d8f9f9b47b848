//! Length-prefixed canonical byte encoding shared by proofs, transactions and blocks.
//!
//! Integers are big-endian. Variable-length byte strings carry a `u32`
//! length prefix. Optional values are a presence byte (0 or 1) followed by
//! the value.

use crate::error::CryptoError;
use crate::group::{self, Gt, Scalar, G1_BYTES, G2_BYTES, GT_BYTES, SCALAR_BYTES};
use ark_bls12_381::{G1Affine, G2Affine};

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_tag(tag: &[u8]) -> Self {
        let mut w = Self::new();
        w.bytes(tag);
        w
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    /// Fixed-length field, no prefix.
    pub fn raw(&mut self, v: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(v);
        self
    }

    /// Length-prefixed field.
    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.u32(v.len() as u32);
        self.buf.extend_from_slice(v);
        self
    }

    pub fn str(&mut self, v: &str) -> &mut Self {
        self.bytes(v.as_bytes())
    }

    pub fn scalar(&mut self, s: &Scalar) -> &mut Self {
        self.raw(&s.to_bytes())
    }

    pub fn g1(&mut self, p: &G1Affine) -> &mut Self {
        self.raw(&group::g1_to_bytes(p))
    }

    pub fn g2(&mut self, p: &G2Affine) -> &mut Self {
        self.raw(&group::g2_to_bytes(p))
    }

    pub fn gt(&mut self, p: &Gt) -> &mut Self {
        self.raw(&group::gt_to_bytes(p))
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CryptoError> {
        if self.buf.len() < n {
            return Err(CryptoError::Encoding("truncated"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, CryptoError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CryptoError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, CryptoError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64, CryptoError> {
        Ok(i64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], CryptoError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], CryptoError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn str(&mut self) -> Result<String, CryptoError> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| CryptoError::Encoding("utf-8"))
    }

    /// Presence byte for an optional field.
    pub fn flag(&mut self) -> Result<bool, CryptoError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(CryptoError::Encoding("presence flag")),
        }
    }

    pub fn scalar(&mut self) -> Result<Scalar, CryptoError> {
        Scalar::from_bytes(self.take(SCALAR_BYTES)?)
    }

    pub fn g1(&mut self) -> Result<G1Affine, CryptoError> {
        group::g1_from_bytes(self.take(G1_BYTES)?)
    }

    pub fn g2(&mut self) -> Result<G2Affine, CryptoError> {
        group::g2_from_bytes(self.take(G2_BYTES)?)
    }

    pub fn gt(&mut self) -> Result<Gt, CryptoError> {
        group::gt_from_bytes(self.take(GT_BYTES)?)
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn finish(self) -> Result<(), CryptoError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(CryptoError::Encoding("trailing bytes"))
        }
    }
}
