//! Signature-based zero-knowledge range and set-membership proofs.
//!
//! A trusted administrator signs every allowed digit `0..u` with a
//! Boneh–Boyen key `Y = g2^x`. To show a committed value lies in
//! `[0, u^l)` the prover writes it in base `u`, commits to each digit and,
//! per digit, proves knowledge of a blinded signature on the committed digit.
//! Digit commitments recombine (`Π C_j^{u^j}`) to the committed value. All
//! digits share one Fiat–Shamir challenge.
//!
//! Arbitrary intervals `[lo, hi]` use two one-sided proofs: `δ − lo` and
//! `hi − δ`, both in `[0, u^l')` with `l'` the digit count of `hi − lo + 1`.

mod digits;
mod keys;
mod location;
mod membership;
mod range;

use thiserror::Error;

pub use digits::{decompose, digits_for, recompose, DigitProof};
pub use keys::{zkrp_setup, zkrp_setup_with_params, ProvingKey, VerificationKey, DEFAULT_PEDERSEN_SEED};
pub use location::{
    prove_location, verify_location, DeviceReading, GpsDevice, LocationProof, LocationVerdict, NotVerified,
    SignedCoordinates,
};
pub use membership::{
    membership_setup, prove_membership, verify_membership, MembershipKey, MembershipProof, MembershipVerificationKey,
};
pub use range::{
    prove_interval, prove_range, verify_interval, verify_range, BoundSide, IntervalProof, ProofFailure, RangeProof,
};

use crate::error::CryptoError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZkrpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfRange { value: i64, lo: i64, hi: i64 },
    #[error("coordinate outside region `{0}`")]
    OutOfRegion(String),
    #[error("device signature does not verify")]
    BadDeviceSignature,
    #[error("opening does not match the device commitment")]
    BadOpening,
    #[error("value is not a member of the signed set")]
    NotAMember,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("key file: {0}")]
    KeyFile(String),
}
