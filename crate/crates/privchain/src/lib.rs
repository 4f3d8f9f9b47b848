//! Privacy-preserving provenance for supply chains.
//!
//! Producers prove that a device-signed farm location lies inside a named
//! region without revealing it, buyers pay committed incentives through an
//! off-chain bank, and final products list only the verified region names
//! while the constituent commodities stay encrypted on the ledger.

pub mod bank;
pub mod bbsig;
pub mod bench;
pub mod codec;
pub mod error;
pub mod geo;
pub mod group;
pub mod identity;
pub mod ledger;
pub mod pedersen;
pub mod scenario;
pub mod tradeflow;
pub mod transcript;
pub mod zkrp;

pub use error::CryptoError;
pub use group::{GroupElement, Scalar};
pub use pedersen::{commit, open_verify, pedersen_setup, Commitment, Opening, PedersenParams};
