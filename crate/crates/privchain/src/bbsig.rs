//! Boneh–Boyen style short signatures `g1^{1/(x+m)}`, verified with
//! `e(sig, Y · g2^m) = e(g1, g2)` where `Y = g2^x`.

use ark_bls12_381::{Bls12_381, G1Affine, G2Affine};
use ark_ec::pairing::Pairing;
use ark_ec::{AffineRepr, CurveGroup};
use ark_ff::Zero;

use crate::error::CryptoError;
use crate::group::{self, Scalar};

/// Signer public key `Y = g2^x`.
pub fn bb_public_key(secret_x: &Scalar) -> G2Affine {
    group::g2_mul(&group::g2_generator(), secret_x).into_affine()
}

pub fn bb_sign(secret_x: &Scalar, index: &Scalar) -> Result<G1Affine, CryptoError> {
    let inv = (*secret_x + *index).invert().ok_or(CryptoError::DegenerateIndex)?;
    Ok(group::g1_mul(&group::g1_generator(), &inv).into_affine())
}

pub fn bb_verify(y: &G2Affine, index: &Scalar, sig: &G1Affine) -> bool {
    if sig.is_zero() {
        return false;
    }
    let shifted = (*y + group::g2_mul(&group::g2_generator(), index)).into_affine();
    let neg_g1 = -group::g1_generator();
    Bls12_381::multi_pairing([*sig, neg_g1], [shifted, group::g2_generator()]).is_zero()
}
