//! Trusted setup and the key distribution file.
//!
//! Key file (text, one field per line):
//!
//! ```text
//! privchain-zkrp-key v1
//! kind proving            # or `verification`
//! pedersen-seed <hex>
//! base 10
//! digits 7
//! y <hex, 96-byte compressed G2>
//! sig 0 <hex, 48-byte compressed G1>   # proving keys only, one per digit
//! ```

use std::fmt::Write as _;

use ark_bls12_381::{G1Affine, G2Affine};
use sha2::{Digest, Sha512};

use super::ZkrpError;
use crate::bbsig;
use crate::group::{self, Gt, Scalar};
use crate::pedersen::{pedersen_setup, PedersenParams};

pub const DEFAULT_PEDERSEN_SEED: &[u8] = b"privchain-v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationKey {
    pub params: PedersenParams,
    pub y: G2Affine,
    pub base: u32,
    pub max_digits: u32,
    pub(crate) gt: Gt,
}

impl VerificationKey {
    pub fn new(params: PedersenParams, y: G2Affine, base: u32, max_digits: u32) -> Result<Self, ZkrpError> {
        check_dims(base, max_digits)?;
        Ok(VerificationKey {
            params,
            y,
            base,
            max_digits,
            gt: group::gt_generator(),
        })
    }

    /// Largest interval width `u^l` the keys can prove.
    pub fn capacity(&self) -> u128 {
        (self.base as u128).checked_pow(self.max_digits).unwrap_or(u128::MAX)
    }

    pub fn to_text(&self) -> String {
        header(self, "verification")
    }

    pub fn from_text(text: &str) -> Result<Self, ZkrpError> {
        let parsed = parse(text)?;
        if parsed.kind != "verification" {
            return Err(ZkrpError::KeyFile(format!(
                "expected verification key, found {}",
                parsed.kind
            )));
        }
        Ok(parsed.vk)
    }
}

/// Proving key: the verification key plus one signature per digit value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProvingKey {
    pub vk: VerificationKey,
    pub digit_signatures: Vec<G1Affine>,
}

impl ProvingKey {
    pub fn params(&self) -> &PedersenParams {
        &self.vk.params
    }

    pub fn to_text(&self) -> String {
        let mut out = header(&self.vk, "proving");
        for (i, s) in self.digit_signatures.iter().enumerate() {
            let _ = writeln!(out, "sig {i} {}", hex::encode(group::g1_to_bytes(s)));
        }
        out
    }

    /// Parses and checks every digit signature against `Y`.
    pub fn from_text(text: &str) -> Result<Self, ZkrpError> {
        let parsed = parse(text)?;
        if parsed.kind != "proving" {
            return Err(ZkrpError::KeyFile(format!(
                "expected proving key, found {}",
                parsed.kind
            )));
        }
        if parsed.sigs.len() != parsed.vk.base as usize {
            return Err(ZkrpError::KeyFile(format!(
                "{} digit signatures for base {}",
                parsed.sigs.len(),
                parsed.vk.base
            )));
        }
        for (i, s) in parsed.sigs.iter().enumerate() {
            if !bbsig::bb_verify(&parsed.vk.y, &Scalar::from_u64(i as u64), s) {
                return Err(ZkrpError::KeyFile(format!("digit signature {i} does not verify")));
            }
        }
        Ok(ProvingKey {
            vk: parsed.vk,
            digit_signatures: parsed.sigs,
        })
    }
}

fn check_dims(base: u32, max_digits: u32) -> Result<(), ZkrpError> {
    if !(2..=256).contains(&base) {
        return Err(ZkrpError::InvalidParameter(format!("base {base} not in [2, 256]")));
    }
    if !(1..=64).contains(&max_digits) {
        return Err(ZkrpError::InvalidParameter(format!(
            "digits {max_digits} not in [1, 64]"
        )));
    }
    Ok(())
}

/// Derives the administrator secret from `seed`, signs every digit and drops
/// the secret.
pub fn zkrp_setup(
    base: u32,
    max_digits: u32,
    admin_secret_seed: &[u8],
) -> Result<(ProvingKey, VerificationKey), ZkrpError> {
    let params = pedersen_setup(DEFAULT_PEDERSEN_SEED)?;
    zkrp_setup_with_params(params, base, max_digits, admin_secret_seed)
}

pub fn zkrp_setup_with_params(
    params: PedersenParams,
    base: u32,
    max_digits: u32,
    admin_secret_seed: &[u8],
) -> Result<(ProvingKey, VerificationKey), ZkrpError> {
    check_dims(base, max_digits)?;
    let x = derive_admin_secret(
        b"privchain.zkrp.digits.v1",
        admin_secret_seed,
        (0..base as u64).map(Scalar::from_u64),
    );
    let y = bbsig::bb_public_key(&x);
    let digit_signatures = (0..base as u64)
        .map(|i| bbsig::bb_sign(&x, &Scalar::from_u64(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let vk = VerificationKey::new(params, y, base, max_digits)?;
    Ok((
        ProvingKey {
            vk: vk.clone(),
            digit_signatures,
        },
        vk,
    ))
}

/// Hashes `seed` to a secret `x` with `x + m ≠ 0` for every message `m` to sign.
pub(crate) fn derive_admin_secret(
    domain: &[u8],
    seed: &[u8],
    messages: impl Iterator<Item = Scalar> + Clone,
) -> Scalar {
    for counter in 0u32.. {
        let mut h = Sha512::new();
        h.update(domain);
        h.update((seed.len() as u32).to_be_bytes());
        h.update(seed);
        h.update(counter.to_be_bytes());
        let x = Scalar::from_be_bytes_mod_order(&h.finalize());
        if !x.is_zero() && messages.clone().all(|m| !(x + m).is_zero()) {
            return x;
        }
    }
    unreachable!("counter space exhausted")
}

fn header(vk: &VerificationKey, kind: &str) -> String {
    format!(
        "privchain-zkrp-key v1\nkind {kind}\npedersen-seed {}\nbase {}\ndigits {}\ny {}\n",
        hex::encode(vk.params.seed()),
        vk.base,
        vk.max_digits,
        hex::encode(group::g2_to_bytes(&vk.y)),
    )
}

struct ParsedKey {
    kind: String,
    vk: VerificationKey,
    sigs: Vec<G1Affine>,
}

fn parse(text: &str) -> Result<ParsedKey, ZkrpError> {
    let bad = |m: String| ZkrpError::KeyFile(m);
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next() != Some("privchain-zkrp-key v1") {
        return Err(bad("missing header".into()));
    }
    let (mut kind, mut seed, mut base, mut digits, mut y) = (None, None, None, None, None);
    let mut sigs = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[..] {
            ["kind", k] => kind = Some(k.to_string()),
            ["pedersen-seed", s] => seed = Some(hex::decode(s).map_err(|_| bad("seed hex".into()))?),
            ["base", b] => base = Some(b.parse::<u32>().map_err(|_| bad("base".into()))?),
            ["digits", d] => digits = Some(d.parse::<u32>().map_err(|_| bad("digits".into()))?),
            ["y", h] => {
                let bytes = hex::decode(h).map_err(|_| bad("y hex".into()))?;
                y = Some(group::g2_from_bytes(&bytes)?);
            }
            ["sig", i, h] => {
                let idx: usize = i.parse().map_err(|_| bad("sig index".into()))?;
                if idx != sigs.len() {
                    return Err(bad(format!("signature {idx} out of order")));
                }
                let bytes = hex::decode(h).map_err(|_| bad("sig hex".into()))?;
                sigs.push(group::g1_from_bytes(&bytes)?);
            }
            _ => return Err(bad(format!("unrecognised line `{line}`"))),
        }
    }
    let missing = |f: &str| bad(format!("missing `{f}`"));
    let params = pedersen_setup(&seed.ok_or_else(|| missing("pedersen-seed"))?)?;
    let vk = VerificationKey::new(
        params,
        y.ok_or_else(|| missing("y"))?,
        base.ok_or_else(|| missing("base"))?,
        digits.ok_or_else(|| missing("digits"))?,
    )?;
    Ok(ParsedKey {
        kind: kind.ok_or_else(|| missing("kind"))?,
        vk,
        sigs,
    })
}
