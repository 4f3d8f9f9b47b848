//! Base-u decomposition and the per-digit sigma protocol.
//!
//! For a digit `d` with commitment `C = g^d h^r` and public signature
//! `A_d = g1^{1/(x+d)}`, the prover blinds `V = A_d^v` and proves knowledge
//! of `(d, r, v)` such that
//!
//! * `C = g^d h^r`, and
//! * `e(V, Y) = e(g1, g2)^v · e(V, g2)^{-d}`.
//!
//! Announcements `D = g^s h^m` and `a = e(V, g2)^{-s} e(g1, g2)^t`;
//! responses `z_d = s − c·d`, `z_r = m − c·r`, `z_v = t − c·v`.

use ark_bls12_381::{Bls12_381, G1Affine, G1Projective, G2Affine};
use ark_ec::pairing::Pairing;
use ark_ec::{AffineRepr, CurveGroup, VariableBaseMSM};
use rand::{CryptoRng, RngCore};

use super::ZkrpError;
use crate::codec::{Reader, Writer};
use crate::error::CryptoError;
use crate::group::{self, Gt, Scalar};
use crate::pedersen::{Commitment, PedersenParams};

/// Writes `delta` in base `base` using exactly `digits` digits, least
/// significant first.
pub fn decompose(delta: i64, base: u32, digits: u32) -> Result<Vec<u32>, ZkrpError> {
    if base < 2 {
        return Err(ZkrpError::InvalidParameter(format!("base {base} < 2")));
    }
    let limit = (base as u128).checked_pow(digits).unwrap_or(u128::MAX);
    if delta < 0 || delta as u128 >= limit {
        return Err(ZkrpError::OutOfRange {
            value: delta,
            lo: 0,
            hi: i64::try_from(limit - 1).unwrap_or(i64::MAX),
        });
    }
    let mut rest = delta as u64;
    let mut out = Vec::with_capacity(digits as usize);
    for _ in 0..digits {
        out.push((rest % base as u64) as u32);
        rest /= base as u64;
    }
    Ok(out)
}

/// `Σ d_j · base^j`.
pub fn recompose(digits: &[u32], base: u32) -> u128 {
    digits
        .iter()
        .rev()
        .fold(0u128, |acc, &d| acc * base as u128 + d as u128)
}

/// Smallest digit count `l ≥ 1` with `base^l ≥ span`.
pub fn digits_for(span: u64, base: u32) -> u32 {
    let mut l = 1u32;
    let mut cap = base as u128;
    while cap < span as u128 {
        cap *= base as u128;
        l += 1;
    }
    l
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitProof {
    /// `V = A_d^v`
    pub blinded_signature: G1Affine,
    /// `D = g^s h^m`
    pub commitment_announcement: G1Affine,
    /// `a = e(V, g2)^{-s} e(g1, g2)^t`
    pub pairing_announcement: Gt,
    pub z_digit: Scalar,
    pub z_blinding: Scalar,
    pub z_signature: Scalar,
}

impl DigitProof {
    pub(crate) fn encode(&self, w: &mut Writer) {
        w.g1(&self.blinded_signature)
            .g1(&self.commitment_announcement)
            .gt(&self.pairing_announcement)
            .scalar(&self.z_digit)
            .scalar(&self.z_blinding)
            .scalar(&self.z_signature);
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self, CryptoError> {
        Ok(DigitProof {
            blinded_signature: r.g1()?,
            commitment_announcement: r.g1()?,
            pairing_announcement: r.gt()?,
            z_digit: r.scalar()?,
            z_blinding: r.scalar()?,
            z_signature: r.scalar()?,
        })
    }
}

/// Prover-side secrets for one digit between announcement and response.
pub(crate) struct DigitWitness {
    digit: Scalar,
    blinding: Scalar,
    v: Scalar,
    s: Scalar,
    t: Scalar,
    m: Scalar,
    pub(crate) blinded_signature: G1Affine,
    pub(crate) commitment_announcement: G1Affine,
    pub(crate) pairing_announcement: Gt,
}

/// First move: blind the signature and form both announcements.
pub(crate) fn announce<R: RngCore + CryptoRng>(
    params: &PedersenParams,
    signature: &G1Affine,
    digit: Scalar,
    blinding: Scalar,
    rng: &mut R,
) -> DigitWitness {
    let v = nonzero(rng);
    let s = Scalar::random(rng);
    let t = Scalar::random(rng);
    let m = Scalar::random(rng);
    let blinded = (*signature * v.0).into_affine();
    let d_ann = G1Projective::msm(&[params.g, params.h], &[s.0, m.0])
        .expect("equal lengths")
        .into_affine();
    let pairing_base = (blinded * (-s).0 + group::g1_generator() * t.0).into_affine();
    let a_ann = Bls12_381::pairing(pairing_base, group::g2_generator());
    DigitWitness {
        digit,
        blinding,
        v,
        s,
        t,
        m,
        blinded_signature: blinded,
        commitment_announcement: d_ann,
        pairing_announcement: a_ann,
    }
}

fn nonzero<R: RngCore + CryptoRng>(rng: &mut R) -> Scalar {
    loop {
        let v = Scalar::random(rng);
        if !v.is_zero() {
            return v;
        }
    }
}

/// Second move: responses for the shared challenge.
pub(crate) fn respond(w: &DigitWitness, c: &Scalar) -> DigitProof {
    DigitProof {
        blinded_signature: w.blinded_signature,
        commitment_announcement: w.commitment_announcement,
        pairing_announcement: w.pairing_announcement,
        z_digit: w.s - *c * w.digit,
        z_blinding: w.m - *c * w.blinding,
        z_signature: w.t - *c * w.v,
    }
}

/// Checks both relations of one digit proof against its commitment.
pub(crate) fn check(params: &PedersenParams, y: &G2Affine, com: &Commitment, c: &Scalar, proof: &DigitProof) -> bool {
    if proof.blinded_signature.is_zero() {
        return false;
    }
    let expected_d = G1Projective::msm(
        &[com.0, params.g, params.h],
        &[c.0, proof.z_digit.0, proof.z_blinding.0],
    )
    .expect("equal lengths");
    if expected_d.into_affine() != proof.commitment_announcement {
        return false;
    }
    let g2 = group::g2_generator();
    let shifted = (*y * c.0 - g2 * proof.z_digit.0).into_affine();
    let g1_zv = (group::g1_generator() * proof.z_signature.0).into_affine();
    let expected_a = Bls12_381::multi_pairing([proof.blinded_signature, g1_zv], [shifted, g2]);
    expected_a == proof.pairing_announcement
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbsig;
    use crate::pedersen::{commit, pedersen_setup};
    use crate::transcript::Transcript;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    /// Independent oracle: enumerate every digit vector and evaluate the
    /// positional sum directly, mapping value → digits.
    fn brute_force_table(base: u32, l: u32) -> Vec<Vec<u32>> {
        let total = (base as usize).pow(l);
        let mut table = vec![Vec::new(); total];
        let mut digits = vec![0u32; l as usize];
        loop {
            let mut value = 0usize;
            let mut weight = 1usize;
            for &d in &digits {
                value += d as usize * weight;
                weight *= base as usize;
            }
            table[value] = digits.clone();
            // odometer increment
            let mut i = 0;
            loop {
                if i == digits.len() {
                    return table;
                }
                digits[i] += 1;
                if digits[i] < base {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn decompose_examples() {
        assert_eq!(decompose(42, 4, 3).unwrap(), vec![2, 2, 2]);
        assert_eq!(decompose(0, 10, 5).unwrap(), vec![0; 5]);
        assert!(matches!(decompose(64, 4, 3), Err(ZkrpError::OutOfRange { .. })));
        assert!(matches!(decompose(-1, 4, 3), Err(ZkrpError::OutOfRange { .. })));
        assert!(decompose(1, 1, 3).is_err());
    }

    #[test]
    fn decompose_matches_brute_force_oracle() {
        for base in [2u32, 4, 10] {
            for l in 1..=3u32 {
                let table = brute_force_table(base, l);
                for (delta, expected) in table.iter().enumerate() {
                    let got = decompose(delta as i64, base, l).unwrap();
                    assert_eq!(&got, expected, "base {base} l {l} delta {delta}");
                    assert_eq!(recompose(&got, base), delta as u128);
                }
            }
        }
    }

    #[test]
    fn digit_count() {
        assert_eq!(digits_for(1, 10), 1);
        assert_eq!(digits_for(10, 10), 1);
        assert_eq!(digits_for(11, 10), 2);
        assert_eq!(digits_for(100, 10), 2);
        assert_eq!(digits_for(101, 10), 3);
        assert_eq!(digits_for(u64::MAX, 2), 64);
    }

    #[test]
    fn single_digit_sigma_protocol() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let params = pedersen_setup(b"digits").unwrap();
        let x = Scalar::from_u64(123456789);
        let y = bbsig::bb_public_key(&x);
        for d in 0..10u64 {
            let sig = bbsig::bb_sign(&x, &Scalar::from_u64(d)).unwrap();
            let r = Scalar::random(&mut rng);
            let com = commit(&params, &Scalar::from_u64(d), &r);
            let w = announce(&params, &sig, Scalar::from_u64(d), r, &mut rng);
            let mut t = Transcript::new(b"t");
            t.absorb(b"V", &group::g1_to_bytes(&w.blinded_signature));
            let c = t.challenge();
            let p = respond(&w, &c);
            assert!(check(&params, &y, &com, &c, &p));
            // commitment to another digit fails the commitment relation
            let other = commit(&params, &Scalar::from_u64(d + 1), &r);
            assert!(!check(&params, &y, &other, &c, &p));
            let mut bad = p.clone();
            bad.z_signature = bad.z_signature + Scalar::ONE;
            assert!(!check(&params, &y, &com, &c, &bad));
            let mut bad = p.clone();
            bad.blinded_signature = G1Affine::zero();
            assert!(!check(&params, &y, &com, &c, &bad));
        }
    }

    #[test]
    fn signature_on_wrong_digit_fails() {
        // Prover commits to 11 but only holds a signature on 1.
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let params = pedersen_setup(b"digits").unwrap();
        let x = Scalar::from_u64(99);
        let y = bbsig::bb_public_key(&x);
        let sig = bbsig::bb_sign(&x, &Scalar::from_u64(1)).unwrap();
        let r = Scalar::random(&mut rng);
        let com = commit(&params, &Scalar::from_u64(11), &r);
        let w = announce(&params, &sig, Scalar::from_u64(11), r, &mut rng);
        let c = Scalar::random(&mut rng);
        assert!(!check(&params, &y, &com, &c, &respond(&w, &c)));
    }
}
