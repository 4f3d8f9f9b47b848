//! One-sided range proofs and two-sided interval composition.

use ark_bls12_381::G1Projective;
use ark_ec::{CurveGroup, VariableBaseMSM};
use rand::{CryptoRng, RngCore};

use super::digits::{self, decompose, digits_for, DigitProof};
use super::keys::{ProvingKey, VerificationKey};
use super::ZkrpError;
use crate::codec::{Reader, Writer};
use crate::error::CryptoError;
use crate::group::{self, Scalar};
use crate::pedersen::{commit, commit_public, Commitment};
use crate::transcript::Transcript;

const RANGE_LABEL: &[u8] = b"privchain.zkrp.range.v1";

/// Which end of an interval a one-sided proof anchors to. A `Lower` proof
/// shows `δ − offset ∈ [0, u^l)`; an `Upper` proof shows `offset − δ ∈ [0, u^l)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundSide {
    Lower,
    Upper,
}

impl BoundSide {
    fn code(self) -> u8 {
        match self {
            BoundSide::Lower => 0,
            BoundSide::Upper => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self, CryptoError> {
        match c {
            0 => Ok(BoundSide::Lower),
            1 => Ok(BoundSide::Upper),
            _ => Err(CryptoError::Encoding("bound side")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RangeProof {
    pub side: BoundSide,
    pub offset: i64,
    pub width_digits: u32,
    pub digit_commitments: Vec<Commitment>,
    pub digit_proofs: Vec<DigitProof>,
    pub challenge: Scalar,
}

/// Why a range proof was rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProofFailure {
    Malformed,
    InconsistentDigits,
    BadChallenge,
    BadDigitProof,
}

impl RangeProof {
    pub(crate) fn encode(&self, w: &mut Writer) {
        w.u8(self.side.code())
            .i64(self.offset)
            .u32(self.width_digits)
            .u32(self.digit_commitments.len() as u32);
        for c in &self.digit_commitments {
            w.g1(&c.0);
        }
        w.u32(self.digit_proofs.len() as u32);
        for p in &self.digit_proofs {
            p.encode(w);
        }
        w.scalar(&self.challenge);
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self, CryptoError> {
        let side = BoundSide::from_code(r.u8()?)?;
        let offset = r.i64()?;
        let width_digits = r.u32()?;
        let n = r.u32()?;
        if n > 64 {
            return Err(CryptoError::Encoding("digit count"));
        }
        let digit_commitments = (0..n).map(|_| r.g1().map(Commitment)).collect::<Result<_, _>>()?;
        let m = r.u32()?;
        if m > 64 {
            return Err(CryptoError::Encoding("digit count"));
        }
        let digit_proofs = (0..m).map(|_| DigitProof::decode(r)).collect::<Result<_, _>>()?;
        Ok(RangeProof {
            side,
            offset,
            width_digits,
            digit_commitments,
            digit_proofs,
            challenge: r.scalar()?,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        let p = Self::decode(&mut r)?;
        r.finish()?;
        Ok(p)
    }
}

fn transcript(
    vk: &VerificationKey,
    target: &Commitment,
    side: BoundSide,
    offset: i64,
    width: u32,
    digit_commitments: &[Commitment],
    announcements: impl Iterator<Item = (Vec<u8>, Vec<u8>, Vec<u8>)>,
) -> Transcript {
    let mut t = Transcript::new(RANGE_LABEL);
    t.absorb(b"g", &group::g1_to_bytes(&vk.params.g))
        .absorb(b"h", &group::g1_to_bytes(&vk.params.h))
        .absorb(b"Y", &group::g2_to_bytes(&vk.y))
        .absorb(b"base", &vk.base.to_be_bytes())
        .absorb(b"side", &[side.code()])
        .absorb(b"offset", &offset.to_be_bytes())
        .absorb(b"width", &width.to_be_bytes())
        .absorb(b"target", &target.to_bytes());
    for (c, (v, d, a)) in digit_commitments.iter().zip(announcements) {
        t.absorb(b"C", &c.to_bytes())
            .absorb(b"V", &v)
            .absorb(b"D", &d)
            .absorb(b"a", &a);
    }
    t
}

/// Proves that `target` commits to `value ∈ [0, u^width)` with `blinding`.
pub(crate) fn prove_digits<R: RngCore + CryptoRng>(
    pk: &ProvingKey,
    value: i64,
    blinding: Scalar,
    side: BoundSide,
    offset: i64,
    width: u32,
    target: &Commitment,
    rng: &mut R,
) -> Result<RangeProof, ZkrpError> {
    let vk = &pk.vk;
    let ds = decompose(value, vk.base, width)?;
    // r_j random for j ≥ 1, r_0 closes Σ u^j r_j = blinding
    let base = Scalar::from_u64(vk.base as u64);
    let mut blindings = vec![Scalar::ZERO; ds.len()];
    let mut acc = Scalar::ZERO;
    let mut weight = base;
    for r in blindings.iter_mut().skip(1) {
        *r = Scalar::random(rng);
        acc = acc + weight * *r;
        weight = weight * base;
    }
    blindings[0] = blinding - acc;

    let params = &vk.params;
    let digit_commitments: Vec<Commitment> = ds
        .iter()
        .zip(&blindings)
        .map(|(&d, r)| commit(params, &Scalar::from_u64(d as u64), r))
        .collect();
    let witnesses: Vec<_> = ds
        .iter()
        .zip(&blindings)
        .map(|(&d, r)| {
            digits::announce(
                params,
                &pk.digit_signatures[d as usize],
                Scalar::from_u64(d as u64),
                *r,
                rng,
            )
        })
        .collect();
    let t = transcript(
        vk,
        target,
        side,
        offset,
        width,
        &digit_commitments,
        witnesses.iter().map(|w| {
            (
                group::g1_to_bytes(&w.blinded_signature).to_vec(),
                group::g1_to_bytes(&w.commitment_announcement).to_vec(),
                group::gt_to_bytes(&w.pairing_announcement),
            )
        }),
    );
    let challenge = t.challenge();
    let digit_proofs = witnesses.iter().map(|w| digits::respond(w, &challenge)).collect();
    Ok(RangeProof {
        side,
        offset,
        width_digits: width,
        digit_commitments,
        digit_proofs,
        challenge,
    })
}

/// Structure, digit consistency, challenge, then the per-digit relations.
pub(crate) fn check_digits(vk: &VerificationKey, target: &Commitment, proof: &RangeProof) -> Result<(), ProofFailure> {
    let n = proof.width_digits as usize;
    if n == 0
        || proof.width_digits > vk.max_digits
        || proof.digit_commitments.len() != n
        || proof.digit_proofs.len() != n
    {
        return Err(ProofFailure::Malformed);
    }
    let base = Scalar::from_u64(vk.base as u64);
    let mut weights = Vec::with_capacity(n);
    let mut w = Scalar::ONE;
    for _ in 0..n {
        weights.push(w.0);
        w = w * base;
    }
    let points: Vec<_> = proof.digit_commitments.iter().map(|c| c.0).collect();
    let recombined = G1Projective::msm(&points, &weights)
        .expect("equal lengths")
        .into_affine();
    if recombined != target.0 {
        return Err(ProofFailure::InconsistentDigits);
    }
    let t = transcript(
        vk,
        target,
        proof.side,
        proof.offset,
        proof.width_digits,
        &proof.digit_commitments,
        proof.digit_proofs.iter().map(|p| {
            (
                group::g1_to_bytes(&p.blinded_signature).to_vec(),
                group::g1_to_bytes(&p.commitment_announcement).to_vec(),
                group::gt_to_bytes(&p.pairing_announcement),
            )
        }),
    );
    if t.challenge() != proof.challenge {
        return Err(ProofFailure::BadChallenge);
    }
    for (c, p) in proof.digit_commitments.iter().zip(&proof.digit_proofs) {
        if !digits::check(&vk.params, &vk.y, c, &proof.challenge, p) {
            return Err(ProofFailure::BadDigitProof);
        }
    }
    Ok(())
}

fn interval_width(vk: &VerificationKey, lo: i64, hi: i64) -> Result<u32, ZkrpError> {
    if lo > hi {
        return Err(ZkrpError::InvalidParameter(format!("empty interval [{lo}, {hi}]")));
    }
    let span = (hi as i128 - lo as i128 + 1) as u128;
    if span > vk.capacity() || span > u64::MAX as u128 {
        return Err(ZkrpError::InvalidParameter(format!(
            "interval width {span} exceeds u^l = {}",
            vk.capacity()
        )));
    }
    Ok(digits_for(span as u64, vk.base))
}

fn check_membership(delta: i64, lo: i64, hi: i64) -> Result<(), ZkrpError> {
    if delta < lo || delta > hi {
        return Err(ZkrpError::OutOfRange { value: delta, lo, hi });
    }
    Ok(())
}

/// Commits to `delta − lo` and proves it lies in `[0, u^l')`, `l'` the digit
/// count of `hi − lo + 1`. Refuses when `delta ∉ [lo, hi]`.
pub fn prove_range<R: RngCore + CryptoRng>(
    pk: &ProvingKey,
    delta: i64,
    blinding: &Scalar,
    lo: i64,
    hi: i64,
    rng: &mut R,
) -> Result<(Commitment, RangeProof), ZkrpError> {
    let width = interval_width(&pk.vk, lo, hi)?;
    check_membership(delta, lo, hi)?;
    let value = delta - lo;
    let com = commit(pk.params(), &Scalar::from_i64(value), blinding);
    let proof = prove_digits(pk, value, *blinding, BoundSide::Lower, lo, width, &com, rng)?;
    Ok((com, proof))
}

/// Accepts a lower-side proof for `com` (a commitment to `delta − lo`).
pub fn verify_range(vk: &VerificationKey, com: &Commitment, lo: i64, hi: i64, proof: &RangeProof) -> bool {
    let Ok(width) = interval_width(vk, lo, hi) else {
        return false;
    };
    proof.side == BoundSide::Lower
        && proof.offset == lo
        && proof.width_digits == width
        && check_digits(vk, com, proof).is_ok()
}

/// Both one-sided proofs for a commitment to `delta` itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalProof {
    pub lower: RangeProof,
    pub upper: RangeProof,
}

pub(crate) fn lower_target(vk: &VerificationKey, com: &Commitment, lo: i64) -> Commitment {
    *com - commit_public(&vk.params, lo)
}

pub(crate) fn upper_target(vk: &VerificationKey, com: &Commitment, hi: i64) -> Commitment {
    commit_public(&vk.params, hi) - *com
}

/// Proves `lo ≤ delta ≤ hi` for `com = g^delta h^blinding`.
pub fn prove_interval<R: RngCore + CryptoRng>(
    pk: &ProvingKey,
    delta: i64,
    blinding: &Scalar,
    lo: i64,
    hi: i64,
    rng: &mut R,
) -> Result<IntervalProof, ZkrpError> {
    let width = interval_width(&pk.vk, lo, hi)?;
    check_membership(delta, lo, hi)?;
    let com = commit(pk.params(), &Scalar::from_i64(delta), blinding);
    let lower = prove_digits(
        pk,
        delta - lo,
        *blinding,
        BoundSide::Lower,
        lo,
        width,
        &lower_target(&pk.vk, &com, lo),
        rng,
    )?;
    let upper = prove_digits(
        pk,
        hi - delta,
        -*blinding,
        BoundSide::Upper,
        hi,
        width,
        &upper_target(&pk.vk, &com, hi),
        rng,
    )?;
    Ok(IntervalProof { lower, upper })
}

pub(crate) fn check_interval(
    vk: &VerificationKey,
    com: &Commitment,
    lo: i64,
    hi: i64,
    lower: &RangeProof,
    upper: &RangeProof,
) -> Result<(), ProofFailure> {
    let width = interval_width(vk, lo, hi).map_err(|_| ProofFailure::Malformed)?;
    if lower.side != BoundSide::Lower
        || upper.side != BoundSide::Upper
        || lower.offset != lo
        || upper.offset != hi
        || lower.width_digits != width
        || upper.width_digits != width
    {
        return Err(ProofFailure::Malformed);
    }
    check_digits(vk, &lower_target(vk, com, lo), lower)?;
    check_digits(vk, &upper_target(vk, com, hi), upper)
}

pub fn verify_interval(vk: &VerificationKey, com: &Commitment, lo: i64, hi: i64, proof: &IntervalProof) -> bool {
    check_interval(vk, com, lo, hi, &proof.lower, &proof.upper).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zkrp::zkrp_setup;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn keys() -> (ProvingKey, VerificationKey) {
        zkrp_setup(10, 5, b"range-tests").unwrap()
    }

    #[test]
    fn honest_proofs_accepted_including_bounds() {
        let (pk, vk) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for delta in [0, 7, 99] {
            let r = Scalar::random(&mut rng);
            let (com, proof) = prove_range(&pk, delta, &r, 0, 99, &mut rng).unwrap();
            assert_eq!(proof.width_digits, 2);
            assert!(verify_range(&vk, &com, 0, 99, &proof));
        }
    }

    #[test]
    fn out_of_range_refused() {
        let (pk, _) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let r = Scalar::random(&mut rng);
        assert_eq!(
            prove_range(&pk, 100, &r, 0, 99, &mut rng).unwrap_err(),
            ZkrpError::OutOfRange {
                value: 100,
                lo: 0,
                hi: 99
            }
        );
        assert!(prove_range(&pk, 5, &r, 0, 100_000, &mut rng).is_err());
    }

    #[test]
    fn rejects_wrong_commitment_and_bounds() {
        let (pk, vk) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let r = Scalar::random(&mut rng);
        let (com, proof) = prove_range(&pk, 42, &r, 10, 60, &mut rng).unwrap();
        let other = commit(&vk.params, &Scalar::from_u64(32), &Scalar::random(&mut rng));
        assert!(!verify_range(&vk, &other, 10, 60, &proof));
        assert!(!verify_range(&vk, &com, 11, 60, &proof));
        assert!(!verify_range(&vk, &com, 10, 600, &proof));
        assert_eq!(check_digits(&vk, &other, &proof), Err(ProofFailure::InconsistentDigits));
    }

    #[test]
    fn every_field_mutation_rejected() {
        let (pk, vk) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let r = Scalar::random(&mut rng);
        let (com, proof) = prove_range(&pk, 1234, &r, 1000, 1999, &mut rng).unwrap();
        assert!(verify_range(&vk, &com, 1000, 1999, &proof));
        let one = Scalar::ONE;
        let g = group::g1_generator();
        let mut cases: Vec<RangeProof> = Vec::new();
        for j in 0..proof.digit_proofs.len() {
            let mut p = proof.clone();
            p.digit_proofs[j].z_digit = p.digit_proofs[j].z_digit + one;
            cases.push(p);
            let mut p = proof.clone();
            p.digit_proofs[j].z_blinding = p.digit_proofs[j].z_blinding + one;
            cases.push(p);
            let mut p = proof.clone();
            p.digit_proofs[j].z_signature = p.digit_proofs[j].z_signature + one;
            cases.push(p);
            let mut p = proof.clone();
            p.digit_proofs[j].blinded_signature = (p.digit_proofs[j].blinded_signature + g).into_affine();
            cases.push(p);
            let mut p = proof.clone();
            p.digit_proofs[j].commitment_announcement = (p.digit_proofs[j].commitment_announcement + g).into_affine();
            cases.push(p);
            let mut p = proof.clone();
            p.digit_proofs[j].pairing_announcement += vk.gt;
            cases.push(p);
            let mut p = proof.clone();
            p.digit_commitments[j] = Commitment((p.digit_commitments[j].0 + g).into_affine());
            cases.push(p);
        }
        let mut p = proof.clone();
        p.challenge = p.challenge + one;
        cases.push(p);
        let mut p = proof.clone();
        p.digit_commitments.pop();
        cases.push(p);
        for (i, p) in cases.iter().enumerate() {
            assert!(!verify_range(&vk, &com, 1000, 1999, p), "mutation {i} accepted");
        }
    }

    #[test]
    fn interval_proofs() {
        let (pk, vk) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (lo, hi) = (500, 519);
        for delta in lo - 5..=hi + 5 {
            let r = Scalar::random(&mut rng);
            let res = prove_interval(&pk, delta, &r, lo, hi, &mut rng);
            if (lo..=hi).contains(&delta) {
                let com = commit(&vk.params, &Scalar::from_i64(delta), &r);
                assert!(verify_interval(&vk, &com, lo, hi, &res.unwrap()));
            } else {
                assert!(matches!(res, Err(ZkrpError::OutOfRange { .. })));
            }
        }
    }

    #[test]
    fn bytes_roundtrip() {
        let (pk, vk) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let r = Scalar::random(&mut rng);
        let (com, proof) = prove_range(&pk, 3, &r, 0, 9, &mut rng).unwrap();
        let back = RangeProof::from_bytes(&proof.to_bytes()).unwrap();
        assert_eq!(back, proof);
        assert!(verify_range(&vk, &com, 0, 9, &back));
        let bytes = proof.to_bytes();
        assert!(RangeProof::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
