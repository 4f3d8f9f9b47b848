//! Pedersen commitments `g^m h^r` in G1.

use std::ops::{Add, Sub};

use ark_bls12_381::{g1, G1Affine, G1Projective};
use ark_ec::hashing::curve_maps::wb::WBMap;
use ark_ec::hashing::map_to_curve_hasher::MapToCurveBasedHasher;
use ark_ec::hashing::HashToCurve;
use ark_ec::{AffineRepr, CurveGroup};
use ark_ff::field_hashers::DefaultFieldHasher;
use sha2::Sha256;

use crate::error::CryptoError;
use crate::group::{self, GroupElement, Scalar, G1_BYTES};

const H_DST: &[u8] = b"PRIVCHAIN-V1-PEDERSEN-H_BLS12381G1_XMD:SHA-256_SSWU_RO_";

/// Public commitment parameters. `h` comes from hashing the domain seed to
/// the curve, so nobody knows `log_g h`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PedersenParams {
    pub g: G1Affine,
    pub h: G1Affine,
    seed: Vec<u8>,
}

impl PedersenParams {
    pub fn seed(&self) -> &[u8] {
        &self.seed
    }
}

/// Derives `(g, h)` for a domain seed. Deterministic in the seed.
pub fn pedersen_setup(domain_seed: &[u8]) -> Result<PedersenParams, CryptoError> {
    if domain_seed.is_empty() {
        return Err(CryptoError::EmptySeed);
    }
    let hasher = MapToCurveBasedHasher::<G1Projective, DefaultFieldHasher<Sha256, 128>, WBMap<g1::Config>>::new(H_DST)
        .map_err(|_| CryptoError::HashToCurve)?;
    let h = hasher.hash(domain_seed).map_err(|_| CryptoError::HashToCurve)?;
    let g = group::g1_generator();
    if h.is_zero() || h == g {
        return Err(CryptoError::HashToCurve);
    }
    Ok(PedersenParams {
        g,
        h,
        seed: domain_seed.to_vec(),
    })
}

/// A commitment; always a G1 element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Commitment(pub G1Affine);

impl Commitment {
    pub fn identity() -> Self {
        Commitment(G1Affine::zero())
    }

    pub fn element(&self) -> GroupElement {
        GroupElement::G1(self.0)
    }

    pub fn to_bytes(&self) -> [u8; G1_BYTES] {
        group::g1_to_bytes(&self.0)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        group::g1_from_bytes(bytes).map(Commitment)
    }
}

impl Add for Commitment {
    type Output = Commitment;
    fn add(self, rhs: Commitment) -> Commitment {
        Commitment((self.0 + rhs.0).into_affine())
    }
}

impl Sub for Commitment {
    type Output = Commitment;
    fn sub(self, rhs: Commitment) -> Commitment {
        Commitment((self.0.into_group() - rhs.0).into_affine())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Opening {
    pub message: Scalar,
    pub blinding: Scalar,
}

impl Opening {
    pub fn new(message: Scalar, blinding: Scalar) -> Self {
        Opening { message, blinding }
    }
}

pub fn commit(params: &PedersenParams, message: &Scalar, blinding: &Scalar) -> Commitment {
    let p = group::g1_mul(&params.g, message) + group::g1_mul(&params.h, blinding);
    Commitment(p.into_affine())
}

pub fn open_verify(params: &PedersenParams, com: &Commitment, opening: &Opening) -> bool {
    commit(params, &opening.message, &opening.blinding) == *com
}

/// `g^m` as a commitment with zero blinding; used to shift committed values.
pub(crate) fn commit_public(params: &PedersenParams, value: i64) -> Commitment {
    Commitment(group::g1_mul(&params.g, &Scalar::from_i64(value)).into_affine())
}
