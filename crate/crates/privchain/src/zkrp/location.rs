//! Location proofs: a device-signed commitment to a farm's grid cell plus
//! interval proofs on both axes against a named region's rectangle, signed by
//! the seller.
//!
//! Canonical byte layout (all integers big-endian):
//!
//! ```text
//! "PCLP" | version u8 = 1
//! zone u8 | hemisphere u8 ('N' / 'S')
//! commitment_x [48] | commitment_y [48]
//! device_id (u32 len + utf-8) | device_pub [32] | timestamp u64
//! device_signature [64]
//! lower_x | upper_x | lower_y | upper_y        (range proofs, see below)
//! seller_pub [32] | seller_signature [64]
//!
//! range proof: side u8 | offset i64 | width u32
//!              | n u32 | n × C_j [48]
//!              | n u32 | n × (V [48] | D [48] | a [576] | z_d [32] | z_r [32] | z_v [32])
//!              | challenge [32]
//! ```
//!
//! The seller signature covers every preceding byte. The proof's content
//! address (ledger link) is SHA-256 of the full encoding.

use std::fmt;

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::keys::{ProvingKey, VerificationKey};
use super::range::{check_interval, prove_interval, ProofFailure, RangeProof};
use super::ZkrpError;
use crate::codec::{Reader, Writer};
use crate::error::CryptoError;
use crate::geo::{GridIndex, Hemisphere, Region, RegionBounds, RegionRegistry};
use crate::group::Scalar;
use crate::identity::{PublicKey, Role, Roster, Signature, SigningKey};
use crate::pedersen::{commit, open_verify, Commitment, Opening, PedersenParams};

const MAGIC: &[u8; 4] = b"PCLP";
const VERSION: u8 = 1;

/// What the GPS device attests to: commitments to both grid indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviceReading {
    pub zone: u8,
    pub hemisphere: Hemisphere,
    pub commitment_x: Commitment,
    pub commitment_y: Commitment,
    pub device_id: String,
    pub device_pub: PublicKey,
    pub timestamp: u64,
}

impl DeviceReading {
    fn encode(&self, w: &mut Writer) {
        w.u8(self.zone)
            .u8(self.hemisphere.code())
            .g1(&self.commitment_x.0)
            .g1(&self.commitment_y.0)
            .str(&self.device_id)
            .raw(&self.device_pub.0)
            .u64(self.timestamp);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CryptoError> {
        Ok(DeviceReading {
            zone: r.u8()?,
            hemisphere: Hemisphere::from_code(r.u8()?).ok_or(CryptoError::Encoding("hemisphere"))?,
            commitment_x: Commitment(r.g1()?),
            commitment_y: Commitment(r.g1()?),
            device_id: r.str()?,
            device_pub: PublicKey(r.array()?),
            timestamp: r.u64()?,
        })
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(b"privchain.device-reading.v1");
        self.encode(&mut w);
        w.finish()
    }
}

/// The device's output as handed to the seller: the signed reading plus the
/// openings the seller needs to prove from it.
#[derive(Clone, Debug)]
pub struct SignedCoordinates {
    pub reading: DeviceReading,
    pub signature: Signature,
    pub index: GridIndex,
    pub opening_x: Opening,
    pub opening_y: Opening,
}

/// A trusted GPS sensor holding a signing key.
#[derive(Clone, Debug)]
pub struct GpsDevice {
    pub id: String,
    key: SigningKey,
}

impl GpsDevice {
    pub fn new(id: &str, key: SigningKey) -> Self {
        GpsDevice {
            id: id.to_string(),
            key,
        }
    }

    pub fn public(&self) -> PublicKey {
        self.key.public()
    }

    pub fn read<R: RngCore + CryptoRng>(
        &self,
        params: &PedersenParams,
        index: GridIndex,
        timestamp: u64,
        rng: &mut R,
    ) -> SignedCoordinates {
        let opening_x = Opening::new(Scalar::from_i64(index.e10), Scalar::random(rng));
        let opening_y = Opening::new(Scalar::from_i64(index.n10), Scalar::random(rng));
        let reading = DeviceReading {
            zone: index.zone,
            hemisphere: index.hemisphere,
            commitment_x: commit(params, &opening_x.message, &opening_x.blinding),
            commitment_y: commit(params, &opening_y.message, &opening_y.blinding),
            device_id: self.id.clone(),
            device_pub: self.key.public(),
            timestamp,
        };
        let signature = self.key.sign(&reading.signing_bytes());
        SignedCoordinates {
            reading,
            signature,
            index,
            opening_x,
            opening_y,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocationProof {
    pub reading: DeviceReading,
    pub device_signature: Signature,
    pub lower_x: RangeProof,
    pub upper_x: RangeProof,
    pub lower_y: RangeProof,
    pub upper_y: RangeProof,
    pub seller_pub: PublicKey,
    pub seller_signature: Signature,
}

impl LocationProof {
    fn encode_unsigned(&self, w: &mut Writer) {
        w.raw(MAGIC).u8(VERSION);
        self.reading.encode(w);
        w.raw(&self.device_signature.0);
        for p in [&self.lower_x, &self.upper_x, &self.lower_y, &self.upper_y] {
            p.encode(w);
        }
        w.raw(&self.seller_pub.0);
    }

    /// Bytes covered by the seller signature.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(b"privchain.location-proof.v1");
        self.encode_unsigned(&mut w);
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode_unsigned(&mut w);
        w.raw(&self.seller_signature.0);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC || r.u8()? != VERSION {
            return Err(CryptoError::Encoding("location proof header"));
        }
        let reading = DeviceReading::decode(&mut r)?;
        let device_signature = Signature(r.array()?);
        let lower_x = RangeProof::decode(&mut r)?;
        let upper_x = RangeProof::decode(&mut r)?;
        let lower_y = RangeProof::decode(&mut r)?;
        let upper_y = RangeProof::decode(&mut r)?;
        let seller_pub = PublicKey(r.array()?);
        let seller_signature = Signature(r.array()?);
        r.finish()?;
        Ok(LocationProof {
            reading,
            device_signature,
            lower_x,
            upper_x,
            lower_y,
            upper_y,
            seller_pub,
            seller_signature,
        })
    }

    /// Content address used as the ledger's proof link.
    pub fn link(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }

    /// The rectangle the proof claims, read from its public offsets.
    pub fn declared_bounds(&self) -> RegionBounds {
        RegionBounds {
            zone: self.reading.zone,
            hemisphere: self.reading.hemisphere,
            e10_lo: self.lower_x.offset,
            e10_hi: self.upper_x.offset,
            n10_lo: self.lower_y.offset,
            n10_hi: self.upper_y.offset,
        }
    }

    /// Re-signs after the caller edited fields; models a dishonest seller.
    pub fn resign(&mut self, seller: &SigningKey) {
        self.seller_pub = seller.public();
        self.seller_signature = seller.sign(&self.signing_bytes());
    }
}

/// Builds the location proof for `region`. The farm cell must lie inside it.
pub fn prove_location<R: RngCore + CryptoRng>(
    pk: &ProvingKey,
    signed: &SignedCoordinates,
    region: &Region,
    seller: &SigningKey,
    rng: &mut R,
) -> Result<LocationProof, ZkrpError> {
    let reading = &signed.reading;
    if !reading.device_pub.verify(&reading.signing_bytes(), &signed.signature) {
        return Err(ZkrpError::BadDeviceSignature);
    }
    let params = pk.params();
    let idx = signed.index;
    if idx.zone != reading.zone
        || idx.hemisphere != reading.hemisphere
        || signed.opening_x.message != Scalar::from_i64(idx.e10)
        || signed.opening_y.message != Scalar::from_i64(idx.n10)
        || !open_verify(params, &reading.commitment_x, &signed.opening_x)
        || !open_verify(params, &reading.commitment_y, &signed.opening_y)
    {
        return Err(ZkrpError::BadOpening);
    }
    if !region.contains(&idx) {
        return Err(ZkrpError::OutOfRegion(region.name.clone()));
    }
    let x = prove_interval(
        pk,
        idx.e10,
        &signed.opening_x.blinding,
        region.e10_lo,
        region.e10_hi,
        rng,
    )?;
    let y = prove_interval(
        pk,
        idx.n10,
        &signed.opening_y.blinding,
        region.n10_lo,
        region.n10_hi,
        rng,
    )?;
    let mut proof = LocationProof {
        reading: reading.clone(),
        device_signature: signed.signature,
        lower_x: x.lower,
        upper_x: x.upper,
        lower_y: y.lower,
        upper_y: y.upper,
        seller_pub: seller.public(),
        seller_signature: Signature([0; 64]),
    };
    proof.resign(seller);
    Ok(proof)
}

/// Why a location proof was not accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NotVerified {
    BadSellerSignature,
    UnregisteredSeller,
    BadDeviceSignature,
    UntrustedDevice,
    UnknownRegion,
    Malformed,
    InconsistentDigits,
    BadChallenge,
    BadDigitProof,
    /// Proof signed by someone other than the trade's seller.
    SellerMismatch,
    /// Proof bytes do not hash to the transaction's proof link.
    LinkMismatch,
}

impl NotVerified {
    pub fn as_str(&self) -> &'static str {
        match self {
            NotVerified::BadSellerSignature => "bad-seller-signature",
            NotVerified::UnregisteredSeller => "unregistered-seller",
            NotVerified::BadDeviceSignature => "bad-device-signature",
            NotVerified::UntrustedDevice => "untrusted-device",
            NotVerified::UnknownRegion => "unknown-region",
            NotVerified::Malformed => "malformed",
            NotVerified::InconsistentDigits => "inconsistent-digits",
            NotVerified::BadChallenge => "bad-challenge",
            NotVerified::BadDigitProof => "bad-digit-proof",
            NotVerified::SellerMismatch => "seller-mismatch",
            NotVerified::LinkMismatch => "link-mismatch",
        }
    }
}

impl fmt::Display for NotVerified {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<ProofFailure> for NotVerified {
    fn from(f: ProofFailure) -> Self {
        match f {
            ProofFailure::Malformed => NotVerified::Malformed,
            ProofFailure::InconsistentDigits => NotVerified::InconsistentDigits,
            ProofFailure::BadChallenge => NotVerified::BadChallenge,
            ProofFailure::BadDigitProof => NotVerified::BadDigitProof,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LocationVerdict {
    Verified(String),
    NotVerified(NotVerified),
}

impl LocationVerdict {
    pub fn region(&self) -> Option<&str> {
        match self {
            LocationVerdict::Verified(r) => Some(r),
            LocationVerdict::NotVerified(_) => None,
        }
    }

    pub fn is_verified(&self) -> bool {
        matches!(self, LocationVerdict::Verified(_))
    }
}

/// Checks signatures, registry membership of the claimed rectangle and all
/// four range proofs. Returns the matching region's name.
pub fn verify_location(
    vk: &VerificationKey,
    registry: &RegionRegistry,
    roster: &Roster,
    proof: &LocationProof,
) -> LocationVerdict {
    match check_location(vk, registry, roster, proof) {
        Ok(name) => LocationVerdict::Verified(name),
        Err(reason) => LocationVerdict::NotVerified(reason),
    }
}

fn check_location(
    vk: &VerificationKey,
    registry: &RegionRegistry,
    roster: &Roster,
    proof: &LocationProof,
) -> Result<String, NotVerified> {
    if !proof.seller_pub.verify(&proof.signing_bytes(), &proof.seller_signature) {
        return Err(NotVerified::BadSellerSignature);
    }
    if !roster.has_role(&proof.seller_pub, Role::Producer) {
        return Err(NotVerified::UnregisteredSeller);
    }
    let reading = &proof.reading;
    if !reading
        .device_pub
        .verify(&reading.signing_bytes(), &proof.device_signature)
    {
        return Err(NotVerified::BadDeviceSignature);
    }
    if !roster.has_role(&reading.device_pub, Role::Device) {
        return Err(NotVerified::UntrustedDevice);
    }
    let bounds = proof.declared_bounds();
    let region = registry.find_by_bounds(&bounds).ok_or(NotVerified::UnknownRegion)?;
    check_interval(
        vk,
        &reading.commitment_x,
        region.e10_lo,
        region.e10_hi,
        &proof.lower_x,
        &proof.upper_x,
    )?;
    check_interval(
        vk,
        &reading.commitment_y,
        region.n10_lo,
        region.n10_hi,
        &proof.lower_y,
        &proof.upper_y,
    )?;
    Ok(region.name.clone())
}
