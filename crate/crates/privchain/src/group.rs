//! Scalars and group elements over the BLS12-381 pairing groups.
//!
//! All exponent arithmetic is modulo the prime group order `q` (~255 bits).
//! Encodings are fixed-length:
//!
//! | value            | bytes | layout                                   |
//! |------------------|-------|------------------------------------------|
//! | `Scalar`         | 32    | big-endian, must be `< q`                |
//! | G1 element       | 48    | compressed point (zcash flag bits)       |
//! | G2 element       | 96    | compressed point (zcash flag bits)       |
//! | Gt element       | 576   | `Fq12` coefficients, arkworks order      |
//! | `GroupElement`   | 1 + n | tag byte (1 = G1, 2 = G2, 3 = Gt) + body |
//!
//! Decoding validates canonicity, curve membership and subgroup membership.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use ark_bls12_381::{Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{AffineRepr, PrimeGroup};
use ark_ff::{AdditiveGroup, BigInteger, Field, PrimeField, UniformRand, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use rand::{CryptoRng, RngCore};

use crate::error::CryptoError;

/// Target group of the pairing, written additively.
pub type Gt = PairingOutput<Bls12_381>;

pub const SCALAR_BYTES: usize = 32;
pub const G1_BYTES: usize = 48;
pub const G2_BYTES: usize = 96;
pub const GT_BYTES: usize = 576;

/// An element of the scalar field `Z_q`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Scalar(pub(crate) Fr);

impl Scalar {
    pub const ZERO: Scalar = Scalar(Fr::ZERO);
    pub const ONE: Scalar = Scalar(Fr::ONE);

    pub fn from_u64(v: u64) -> Self {
        Scalar(Fr::from(v))
    }

    /// Maps a signed integer into `Z_q` (negative values wrap to `q - |v|`).
    pub fn from_i64(v: i64) -> Self {
        let mag = Fr::from(v.unsigned_abs());
        if v < 0 {
            Scalar(-mag)
        } else {
            Scalar(mag)
        }
    }

    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Scalar(Fr::rand(rng))
    }

    /// Reduces an arbitrary-length big-endian byte string modulo `q`.
    pub fn from_be_bytes_mod_order(bytes: &[u8]) -> Self {
        Scalar(Fr::from_be_bytes_mod_order(bytes))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn invert(&self) -> Option<Self> {
        self.0.inverse().map(Scalar)
    }

    pub fn to_bytes(&self) -> [u8; SCALAR_BYTES] {
        let be = self.0.into_bigint().to_bytes_be();
        let mut out = [0u8; SCALAR_BYTES];
        out[SCALAR_BYTES - be.len()..].copy_from_slice(&be);
        out
    }

    /// Strict decoding: exactly 32 bytes, value below the group order.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != SCALAR_BYTES {
            return Err(CryptoError::Encoding("scalar length"));
        }
        let s = Scalar(Fr::from_be_bytes_mod_order(bytes));
        if s.to_bytes()[..] != bytes[..] {
            return Err(CryptoError::Encoding("scalar not reduced"));
        }
        Ok(s)
    }

    pub fn inner(&self) -> Fr {
        self.0
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", hex::encode(self.to_bytes()))
    }
}

impl From<Fr> for Scalar {
    fn from(v: Fr) -> Self {
        Scalar(v)
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 + rhs.0)
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 - rhs.0)
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 * rhs.0)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

/// Which of the three pairing groups an element belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    G1,
    G2,
    Gt,
}

impl GroupKind {
    fn tag(self) -> u8 {
        match self {
            GroupKind::G1 => 1,
            GroupKind::G2 => 2,
            GroupKind::Gt => 3,
        }
    }

    pub fn encoded_len(self) -> usize {
        match self {
            GroupKind::G1 => G1_BYTES,
            GroupKind::G2 => G2_BYTES,
            GroupKind::Gt => GT_BYTES,
        }
    }
}

/// An element of one of the pairing groups, tagged by group.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum GroupElement {
    G1(G1Affine),
    G2(G2Affine),
    Gt(Gt),
}

impl GroupElement {
    pub fn kind(&self) -> GroupKind {
        match self {
            GroupElement::G1(_) => GroupKind::G1,
            GroupElement::G2(_) => GroupKind::G2,
            GroupElement::Gt(_) => GroupKind::Gt,
        }
    }

    pub fn identity(kind: GroupKind) -> Self {
        match kind {
            GroupKind::G1 => GroupElement::G1(G1Affine::zero()),
            GroupKind::G2 => GroupElement::G2(G2Affine::zero()),
            GroupKind::Gt => GroupElement::Gt(Gt::zero()),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            GroupElement::G1(p) => p.is_zero(),
            GroupElement::G2(p) => p.is_zero(),
            GroupElement::Gt(p) => p.is_zero(),
        }
    }

    /// Tagged encoding: one group byte followed by the fixed-length body.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![self.kind().tag()];
        out.extend(self.body_bytes());
        out
    }

    /// Untagged fixed-length body.
    pub fn body_bytes(&self) -> Vec<u8> {
        match self {
            GroupElement::G1(p) => g1_to_bytes(p).to_vec(),
            GroupElement::G2(p) => g2_to_bytes(p).to_vec(),
            GroupElement::Gt(p) => gt_to_bytes(p),
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let (&tag, body) = bytes
            .split_first()
            .ok_or(CryptoError::Encoding("empty group element"))?;
        match tag {
            1 => g1_from_bytes(body).map(GroupElement::G1),
            2 => g2_from_bytes(body).map(GroupElement::G2),
            3 => gt_from_bytes(body).map(GroupElement::Gt),
            _ => Err(CryptoError::Encoding("unknown group tag")),
        }
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body = self.body_bytes();
        write!(f, "{:?}({}..)", self.kind(), hex::encode(&body[..8]))
    }
}

pub fn g1_generator() -> G1Affine {
    G1Affine::generator()
}

pub fn g2_generator() -> G2Affine {
    G2Affine::generator()
}

/// `e(g1, g2)`, the generator of the target group.
pub fn gt_generator() -> Gt {
    Bls12_381::pairing(G1Projective::generator(), G2Projective::generator())
}

pub fn g1_mul(p: &G1Affine, s: &Scalar) -> G1Projective {
    *p * s.0
}

pub fn g2_mul(p: &G2Affine, s: &Scalar) -> G2Projective {
    *p * s.0
}

pub fn g1_to_bytes(p: &G1Affine) -> [u8; G1_BYTES] {
    let mut out = [0u8; G1_BYTES];
    p.serialize_compressed(&mut out[..]).expect("fixed-size G1 encoding");
    out
}

pub fn g1_from_bytes(bytes: &[u8]) -> Result<G1Affine, CryptoError> {
    if bytes.len() != G1_BYTES {
        return Err(CryptoError::Encoding("G1 length"));
    }
    G1Affine::deserialize_compressed(bytes).map_err(|_| CryptoError::Encoding("invalid G1 point"))
}

pub fn g2_to_bytes(p: &G2Affine) -> [u8; G2_BYTES] {
    let mut out = [0u8; G2_BYTES];
    p.serialize_compressed(&mut out[..]).expect("fixed-size G2 encoding");
    out
}

pub fn g2_from_bytes(bytes: &[u8]) -> Result<G2Affine, CryptoError> {
    if bytes.len() != G2_BYTES {
        return Err(CryptoError::Encoding("G2 length"));
    }
    G2Affine::deserialize_compressed(bytes).map_err(|_| CryptoError::Encoding("invalid G2 point"))
}

pub fn gt_to_bytes(p: &Gt) -> Vec<u8> {
    let mut out = Vec::with_capacity(GT_BYTES);
    p.serialize_compressed(&mut out).expect("fixed-size Gt encoding");
    out
}

pub fn gt_from_bytes(bytes: &[u8]) -> Result<Gt, CryptoError> {
    if bytes.len() != GT_BYTES {
        return Err(CryptoError::Encoding("Gt length"));
    }
    Gt::deserialize_compressed(bytes).map_err(|_| CryptoError::Encoding("invalid Gt element"))
}
