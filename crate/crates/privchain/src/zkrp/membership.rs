//! Set-membership mode: the administrator signs an explicit set of values
//! (for example the grid indices of registered farms) and a prover shows a
//! committed value is one of them with a single digit-style proof.

use std::collections::BTreeMap;

use ark_bls12_381::{G1Affine, G2Affine};
use rand::{CryptoRng, RngCore};

use super::digits::{self, DigitProof};
use super::keys::derive_admin_secret;
use super::ZkrpError;
use crate::bbsig;
use crate::group::{self, Scalar};
use crate::pedersen::{commit, Commitment, PedersenParams};
use crate::transcript::Transcript;

const MEMBER_LABEL: &[u8] = b"privchain.zkrp.member.v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembershipVerificationKey {
    pub params: PedersenParams,
    pub y: G2Affine,
    pub set: Vec<i64>,
}

#[derive(Clone, Debug)]
pub struct MembershipKey {
    pub vk: MembershipVerificationKey,
    signatures: BTreeMap<i64, G1Affine>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembershipProof {
    pub proof: DigitProof,
    pub challenge: Scalar,
}

pub fn membership_setup(
    params: PedersenParams,
    set: &[i64],
    admin_secret_seed: &[u8],
) -> Result<(MembershipKey, MembershipVerificationKey), ZkrpError> {
    let mut members: Vec<i64> = set.to_vec();
    members.sort_unstable();
    members.dedup();
    if members.is_empty() {
        return Err(ZkrpError::InvalidParameter("empty membership set".into()));
    }
    let x = derive_admin_secret(
        b"privchain.zkrp.member.v1",
        admin_secret_seed,
        members.iter().map(|&m| Scalar::from_i64(m)),
    );
    let y = bbsig::bb_public_key(&x);
    let signatures = members
        .iter()
        .map(|&m| bbsig::bb_sign(&x, &Scalar::from_i64(m)).map(|s| (m, s)))
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    let vk = MembershipVerificationKey {
        params,
        y,
        set: members,
    };
    Ok((
        MembershipKey {
            vk: vk.clone(),
            signatures,
        },
        vk,
    ))
}

fn transcript(vk: &MembershipVerificationKey, com: &Commitment, p: &DigitProof) -> Transcript {
    let mut t = Transcript::new(MEMBER_LABEL);
    t.absorb(b"g", &group::g1_to_bytes(&vk.params.g))
        .absorb(b"h", &group::g1_to_bytes(&vk.params.h))
        .absorb(b"Y", &group::g2_to_bytes(&vk.y))
        .absorb(b"C", &com.to_bytes())
        .absorb(b"V", &group::g1_to_bytes(&p.blinded_signature))
        .absorb(b"D", &group::g1_to_bytes(&p.commitment_announcement))
        .absorb(b"a", &group::gt_to_bytes(&p.pairing_announcement));
    t
}

/// Commits to `value` and proves it belongs to the signed set. Refuses for
/// non-members, since no signature exists for them.
pub fn prove_membership<R: RngCore + CryptoRng>(
    key: &MembershipKey,
    value: i64,
    blinding: &Scalar,
    rng: &mut R,
) -> Result<(Commitment, MembershipProof), ZkrpError> {
    let sig = key.signatures.get(&value).ok_or(ZkrpError::NotAMember)?;
    let params = &key.vk.params;
    let m = Scalar::from_i64(value);
    let com = commit(params, &m, blinding);
    let w = digits::announce(params, sig, m, *blinding, rng);
    let provisional = DigitProof {
        blinded_signature: w.blinded_signature,
        commitment_announcement: w.commitment_announcement,
        pairing_announcement: w.pairing_announcement,
        z_digit: Scalar::ZERO,
        z_blinding: Scalar::ZERO,
        z_signature: Scalar::ZERO,
    };
    let challenge = transcript(&key.vk, &com, &provisional).challenge();
    Ok((
        com,
        MembershipProof {
            proof: digits::respond(&w, &challenge),
            challenge,
        },
    ))
}

pub fn verify_membership(vk: &MembershipVerificationKey, com: &Commitment, proof: &MembershipProof) -> bool {
    transcript(vk, com, &proof.proof).challenge() == proof.challenge
        && digits::check(&vk.params, &vk.y, com, &proof.challenge, &proof.proof)
}
