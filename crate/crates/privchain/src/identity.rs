//! Participant identities: ed25519 keys and the load-time roster of
//! `(role, name, public key)` that stands in for the network's certificate
//! authority.
//!
//! Roster file, one participant per line, `#` starts a comment:
//!
//! ```text
//! producer  alice   <64 hex chars of ed25519 public key>
//! device    gps-17  <hex>
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, Verifier};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const PUBLIC_KEY_BYTES: usize = 32;
pub const SIGNATURE_BYTES: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_BYTES]);

impl PublicKey {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        Some(PublicKey(bytes.try_into().ok()?))
    }

    pub fn verify(&self, msg: &[u8], sig: &Signature) -> bool {
        let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&self.0) else {
            return false;
        };
        vk.verify(msg, &ed25519_dalek::Signature::from_bytes(&sig.0)).is_ok()
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({}..)", &self.to_hex()[..12])
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; SIGNATURE_BYTES]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", &hex::encode(self.0)[..12])
    }
}

#[derive(Clone)]
pub struct SigningKey(ed25519_dalek::SigningKey);

impl SigningKey {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        SigningKey(ed25519_dalek::SigningKey::generate(rng))
    }

    /// Key derived from a seed and a participant name; used by the simulator
    /// so runs are reproducible.
    pub fn derive(seed: u64, name: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"privchain.participant.v1");
        h.update(seed.to_be_bytes());
        h.update(name.as_bytes());
        SigningKey(ed25519_dalek::SigningKey::from_bytes(&h.finalize().into()))
    }

    pub fn from_bytes(secret: &[u8; 32]) -> Self {
        SigningKey(ed25519_dalek::SigningKey::from_bytes(secret))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(self.0.verifying_key().to_bytes())
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        Signature(self.0.sign(msg).to_bytes())
    }
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SigningKey({:?})", self.public())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    /// Primary producer selling raw commodities (grape grower).
    Producer,
    /// Buyer that turns commodities into final products (winery).
    Manufacturer,
    /// Trusted GPS device at a farm.
    Device,
    Bank,
    Retailer,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Producer => "producer",
            Role::Manufacturer => "manufacturer",
            Role::Device => "device",
            Role::Bank => "bank",
            Role::Retailer => "retailer",
        }
    }
}

impl FromStr for Role {
    type Err = RosterError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "producer" => Role::Producer,
            "manufacturer" => Role::Manufacturer,
            "device" => Role::Device,
            "bank" => Role::Bank,
            "retailer" => Role::Retailer,
            other => return Err(RosterError::UnknownRole(other.to_string())),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Participant {
    pub name: String,
    pub role: Role,
    pub key: PublicKey,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RosterError {
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate participant `{0}`")]
    Duplicate(String),
}

#[derive(Clone, Debug, Default)]
pub struct Roster {
    by_name: BTreeMap<String, Participant>,
    by_key: BTreeMap<PublicKey, String>,
}

impl Roster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, role: Role, key: PublicKey) -> Result<(), RosterError> {
        if self.by_name.contains_key(name) || self.by_key.contains_key(&key) {
            return Err(RosterError::Duplicate(name.to_string()));
        }
        self.by_key.insert(key, name.to_string());
        self.by_name.insert(
            name.to_string(),
            Participant {
                name: name.to_string(),
                role,
                key,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Participant> {
        self.by_name.get(name)
    }

    pub fn lookup_key(&self, key: &PublicKey) -> Option<&Participant> {
        self.by_key.get(key).and_then(|n| self.by_name.get(n))
    }

    pub fn has_role(&self, key: &PublicKey, role: Role) -> bool {
        self.lookup_key(key).is_some_and(|p| p.role == role)
    }

    pub fn participants(&self) -> impl Iterator<Item = &Participant> {
        self.by_name.values()
    }

    pub fn parse(text: &str) -> Result<Self, RosterError> {
        let mut roster = Roster::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| RosterError::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [role, name, key] = fields[..] else {
                return Err(err("expected `role name public-key`"));
            };
            let role = role.parse::<Role>().map_err(|e| err(&e.to_string()))?;
            let key = PublicKey::from_hex(key).ok_or_else(|| err("bad public key"))?;
            roster.register(name, role, key).map_err(|e| err(&e.to_string()))?;
        }
        Ok(roster)
    }

    pub fn to_text(&self) -> String {
        self.by_name
            .values()
            .map(|p| format!("{} {} {}\n", p.role.as_str(), p.name, p.key.to_hex()))
            .collect()
    }
}
