//! Encryption of a final product's constituent commodity ids.
//!
//! Blob layout:
//!
//! ```text
//! key_id (u32 len + utf-8) | nonce [12] | ciphertext (u32 len + bytes, tag included)
//! ```
//!
//! Plaintext is `count u32 | count × (u32 len + utf-8 id)`. The AEAD is
//! ChaCha20-Poly1305 with associated data
//! `"privchain.tradeflow.v1" | u32 len | final_product_id`, which pins a blob
//! to the product it was written for.
//!
//! Keyring file: one `key_id base64(32-byte key)` pair per line.

use std::collections::BTreeMap;
use std::fmt;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{Reader, Writer};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TradeFlowError {
    #[error("authentication failed")]
    AuthFailure,
    #[error("blob was written under key `{found}`, have `{expected}`")]
    KeyMismatch { expected: String, found: String },
    #[error("no constituent ids")]
    Empty,
    #[error("keyring line {line}: {msg}")]
    Keyring { line: usize, msg: String },
}

#[derive(Clone, PartialEq, Eq)]
pub struct TradeFlowKey {
    pub key_id: String,
    key: [u8; 32],
}

impl TradeFlowKey {
    pub fn new(key_id: &str, key: [u8; 32]) -> Self {
        TradeFlowKey {
            key_id: key_id.to_string(),
            key,
        }
    }

    pub fn generate<R: RngCore + CryptoRng>(key_id: &str, rng: &mut R) -> Self {
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        Self::new(key_id, key)
    }

    /// Deterministic key for simulations.
    pub fn derive(key_id: &str, seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"privchain.tradeflow-key.v1");
        h.update(seed.to_be_bytes());
        h.update(key_id.as_bytes());
        Self::new(key_id, h.finalize().into())
    }

    fn cipher(&self) -> ChaCha20Poly1305 {
        ChaCha20Poly1305::new(Key::from_slice(&self.key))
    }
}

impl fmt::Debug for TradeFlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TradeFlowKey({})", self.key_id)
    }
}

/// Static set of keys, one per side chain by default.
#[derive(Clone, Debug, Default)]
pub struct Keyring {
    keys: BTreeMap<String, TradeFlowKey>,
}

impl Keyring {
    pub fn new(keys: impl IntoIterator<Item = TradeFlowKey>) -> Self {
        Keyring {
            keys: keys.into_iter().map(|k| (k.key_id.clone(), k)).collect(),
        }
    }

    pub fn get(&self, key_id: &str) -> Option<&TradeFlowKey> {
        self.keys.get(key_id)
    }

    pub fn first(&self) -> Option<&TradeFlowKey> {
        self.keys.values().next()
    }

    pub fn parse(text: &str) -> Result<Self, TradeFlowError> {
        let mut keys = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| TradeFlowError::Keyring {
                line: i + 1,
                msg: msg.to_string(),
            };
            let mut it = line.split_whitespace();
            let (Some(id), Some(b64), None) = (it.next(), it.next(), it.next()) else {
                return Err(err("expected `key_id base64-key`"));
            };
            let bytes = B64.decode(b64).map_err(|_| err("bad base64"))?;
            let key: [u8; 32] = bytes.try_into().map_err(|_| err("key must be 32 bytes"))?;
            if keys.insert(id.to_string(), TradeFlowKey::new(id, key)).is_some() {
                return Err(err("duplicate key id"));
            }
        }
        Ok(Keyring { keys })
    }

    pub fn to_text(&self) -> String {
        self.keys
            .values()
            .map(|k| format!("{} {}\n", k.key_id, B64.encode(k.key)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstituentBlob {
    pub key_id: String,
    pub nonce: [u8; 12],
    pub ciphertext: Vec<u8>,
}

impl ConstituentBlob {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(&self.key_id).raw(&self.nonce).bytes(&self.ciphertext);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TradeFlowError> {
        let mut r = Reader::new(bytes);
        let parse = |r: &mut Reader<'_>| -> Result<Self, crate::error::CryptoError> {
            Ok(ConstituentBlob {
                key_id: r.str()?,
                nonce: r.array()?,
                ciphertext: r.bytes()?.to_vec(),
            })
        };
        let blob = parse(&mut r).map_err(|_| TradeFlowError::AuthFailure)?;
        r.finish().map_err(|_| TradeFlowError::AuthFailure)?;
        Ok(blob)
    }
}

fn associated_data(final_product_id: &str) -> Vec<u8> {
    let mut w = Writer::with_tag(b"privchain.tradeflow.v1");
    w.str(final_product_id);
    w.finish()
}

pub fn encrypt_constituents<R: RngCore + CryptoRng>(
    key: &TradeFlowKey,
    final_product_id: &str,
    ids: &[String],
    rng: &mut R,
) -> Result<ConstituentBlob, TradeFlowError> {
    if ids.is_empty() {
        return Err(TradeFlowError::Empty);
    }
    let mut w = Writer::new();
    w.u32(ids.len() as u32);
    for id in ids {
        w.str(id);
    }
    let mut nonce = [0u8; 12];
    rng.fill_bytes(&mut nonce);
    let ciphertext = key
        .cipher()
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: &w.finish(),
                aad: &associated_data(final_product_id),
            },
        )
        .expect("chacha20poly1305 encryption");
    Ok(ConstituentBlob {
        key_id: key.key_id.clone(),
        nonce,
        ciphertext,
    })
}

pub fn decrypt_constituents(
    key: &TradeFlowKey,
    blob: &ConstituentBlob,
    final_product_id: &str,
) -> Result<Vec<String>, TradeFlowError> {
    if blob.key_id != key.key_id {
        return Err(TradeFlowError::KeyMismatch {
            expected: key.key_id.clone(),
            found: blob.key_id.clone(),
        });
    }
    let plain = key
        .cipher()
        .decrypt(
            Nonce::from_slice(&blob.nonce),
            Payload {
                msg: &blob.ciphertext,
                aad: &associated_data(final_product_id),
            },
        )
        .map_err(|_| TradeFlowError::AuthFailure)?;
    let mut r = Reader::new(&plain);
    let n = r.u32().map_err(|_| TradeFlowError::AuthFailure)?;
    let ids = (0..n)
        .map(|_| r.str())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| TradeFlowError::AuthFailure)?;
    r.finish().map_err(|_| TradeFlowError::AuthFailure)?;
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn ids() -> Vec<String> {
        vec!["grape-7".into(), "grape-2".into(), "grape-9".into()]
    }

    #[test]
    fn roundtrip_preserves_order() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let k = TradeFlowKey::generate("chain-a", &mut rng);
        let blob = encrypt_constituents(&k, "wine-1", &ids(), &mut rng).unwrap();
        assert_eq!(decrypt_constituents(&k, &blob, "wine-1").unwrap(), ids());
        let parsed = ConstituentBlob::from_bytes(&blob.to_bytes()).unwrap();
        assert_eq!(parsed, blob);
    }

    #[test]
    fn wrong_key_product_or_truncation_fail() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let k = TradeFlowKey::generate("chain-a", &mut rng);
        let other = TradeFlowKey::generate("chain-a", &mut rng);
        let blob = encrypt_constituents(&k, "wine-1", &ids(), &mut rng).unwrap();
        assert_eq!(
            decrypt_constituents(&other, &blob, "wine-1"),
            Err(TradeFlowError::AuthFailure)
        );
        assert_eq!(
            decrypt_constituents(&k, &blob, "wine-2"),
            Err(TradeFlowError::AuthFailure)
        );
        let mut cut = blob.clone();
        cut.ciphertext.truncate(cut.ciphertext.len() - 1);
        assert_eq!(
            decrypt_constituents(&k, &cut, "wine-1"),
            Err(TradeFlowError::AuthFailure)
        );
        let bytes = blob.to_bytes();
        assert!(ConstituentBlob::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let renamed = TradeFlowKey::new("chain-b", [0; 32]);
        assert!(matches!(
            decrypt_constituents(&renamed, &blob, "wine-1"),
            Err(TradeFlowError::KeyMismatch { .. })
        ));
        assert_eq!(encrypt_constituents(&k, "w", &[], &mut rng), Err(TradeFlowError::Empty));
    }

    #[test]
    fn fresh_nonces() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let k = TradeFlowKey::generate("chain-a", &mut rng);
        let a = encrypt_constituents(&k, "wine-1", &ids(), &mut rng).unwrap();
        let b = encrypt_constituents(&k, "wine-1", &ids(), &mut rng).unwrap();
        assert_ne!(a.nonce, b.nonce);
        assert_ne!(a.ciphertext, b.ciphertext);
    }

    #[test]
    fn keyring_text() {
        let ring = Keyring::new([TradeFlowKey::derive("chain-a", 1), TradeFlowKey::derive("chain-b", 1)]);
        let parsed = Keyring::parse(&ring.to_text()).unwrap();
        assert_eq!(parsed.get("chain-b"), ring.get("chain-b"));
        assert!(Keyring::parse("k c2hvcnQ=").is_err());
        assert!(Keyring::parse("k").is_err());
    }
}
