//! Off-chain incentive settlement.
//!
//! Payment envelope (hybrid encryption to the bank's X25519 key):
//!
//! ```text
//! version u8 = 1 | ephemeral_pub [32] | ChaCha20-Poly1305 ciphertext+tag
//! ```
//!
//! The AEAD key and nonce come from HKDF-SHA256 with the X25519 shared secret
//! as input key material, `ephemeral_pub | bank_pub` as salt and
//! `"privchain.bank-envelope.v1"` as info (44 bytes: key then nonce).
//! The associated data is the version byte and the ephemeral key.
//!
//! Plaintext: `amount u64 | blinding [32] | seller_id (u16 len + utf-8)`.
//!
//! Bank state file: JSON (see [`BankState::to_json`]).

use std::collections::{BTreeMap, BTreeSet};

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use x25519_dalek::{PublicKey as XPublic, StaticSecret};

use crate::group::Scalar;
use crate::identity::{PublicKey, SigningKey};
use crate::ledger::{Digest32, Ledger, LedgerError, PaymentStatus, ReqPay, TxPaymentStatus};
use crate::pedersen::{commit, Commitment, PedersenParams};

const ENVELOPE_VERSION: u8 = 1;
const HKDF_INFO: &[u8] = b"privchain.bank-envelope.v1";

/// Largest incentive amount (exclusive).
pub const MAX_AMOUNT: u64 = 1 << 62;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BankError {
    #[error("buyer signature does not verify")]
    BadSignature,
    #[error("amount {0} not below 2^62")]
    AmountTooLarge(u64),
    #[error("payment request unknown to the ledger")]
    UnknownReqPay,
    #[error("payment request already settled")]
    AlreadySettled,
    #[error("ledger refused the status: {0}")]
    Ledger(LedgerError),
    #[error("bank state: {0}")]
    State(String),
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("envelope decryption failed")]
pub struct DecryptFailure;

/// Incentive terms agreed off-chain. The seller picks the blinding and
/// shares it with the buyer so both can produce matching values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegotiationRecord {
    pub amount: u64,
    pub blinding: Scalar,
    pub seller_id: String,
}

pub fn make_incentive_commitment(params: &PedersenParams, n: &NegotiationRecord) -> Result<Commitment, BankError> {
    if n.amount >= MAX_AMOUNT {
        return Err(BankError::AmountTooLarge(n.amount));
    }
    Ok(commit(params, &Scalar::from_u64(n.amount), &n.blinding))
}

fn envelope_cipher(shared: &[u8; 32], eph_pub: &[u8; 32], bank_pub: &[u8; 32]) -> (ChaCha20Poly1305, [u8; 12]) {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(eph_pub);
    salt[32..].copy_from_slice(bank_pub);
    let mut okm = [0u8; 44];
    Hkdf::<Sha256>::new(Some(&salt), shared)
        .expand(HKDF_INFO, &mut okm)
        .expect("44 bytes is a valid HKDF length");
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&okm[..32]));
    (cipher, okm[32..].try_into().expect("12 bytes"))
}

fn envelope_ad(eph_pub: &[u8; 32]) -> [u8; 33] {
    let mut ad = [0u8; 33];
    ad[0] = ENVELOPE_VERSION;
    ad[1..].copy_from_slice(eph_pub);
    ad
}

fn encode_payload(n: &NegotiationRecord) -> Vec<u8> {
    let id = n.seller_id.as_bytes();
    let mut out = Vec::with_capacity(8 + 32 + 2 + id.len());
    out.extend_from_slice(&n.amount.to_be_bytes());
    out.extend_from_slice(&n.blinding.to_bytes());
    out.extend_from_slice(&(id.len() as u16).to_be_bytes());
    out.extend_from_slice(id);
    out
}

fn decode_payload(p: &[u8]) -> Option<NegotiationRecord> {
    if p.len() < 42 {
        return None;
    }
    let amount = u64::from_be_bytes(p[..8].try_into().ok()?);
    let blinding = Scalar::from_bytes(&p[8..40]).ok()?;
    let len = u16::from_be_bytes(p[40..42].try_into().ok()?) as usize;
    if p.len() != 42 + len {
        return None;
    }
    let seller_id = String::from_utf8(p[42..].to_vec()).ok()?;
    Some(NegotiationRecord {
        amount,
        blinding,
        seller_id,
    })
}

/// Encrypts `(amount, blinding, seller_id)` to the bank.
pub fn build_payment_blob<R: RngCore + CryptoRng>(n: &NegotiationRecord, bank_pub: &[u8; 32], rng: &mut R) -> Vec<u8> {
    let eph = StaticSecret::random_from_rng(&mut *rng);
    let eph_pub = XPublic::from(&eph).to_bytes();
    let shared = eph.diffie_hellman(&XPublic::from(*bank_pub));
    let (cipher, nonce) = envelope_cipher(shared.as_bytes(), &eph_pub, bank_pub);
    let ct = cipher
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: &encode_payload(n),
                aad: &envelope_ad(&eph_pub),
            },
        )
        .expect("chacha20poly1305 encryption");
    let mut out = Vec::with_capacity(33 + ct.len());
    out.push(ENVELOPE_VERSION);
    out.extend_from_slice(&eph_pub);
    out.extend_from_slice(&ct);
    out
}

/// The bank's key material: X25519 for envelopes, Ed25519 for signing
/// status transactions. Both derive from one 32-byte secret.
#[derive(Clone)]
pub struct BankKeys {
    secret: [u8; 32],
    x_secret: StaticSecret,
    signing: SigningKey,
}

impl BankKeys {
    pub fn from_secret(secret: [u8; 32]) -> Self {
        let sub = |label: &[u8]| -> [u8; 32] {
            let mut h = Sha256::new();
            h.update(label);
            h.update(secret);
            h.finalize().into()
        };
        BankKeys {
            secret,
            x_secret: StaticSecret::from(sub(b"privchain.bank.x25519")),
            signing: SigningKey::from_bytes(&sub(b"privchain.bank.ed25519")),
        }
    }

    /// Deterministic keys for simulations.
    pub fn derive(seed: u64, name: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"privchain.bank-secret.v1");
        h.update(seed.to_be_bytes());
        h.update(name.as_bytes());
        Self::from_secret(h.finalize().into())
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut s = [0u8; 32];
        rng.fill_bytes(&mut s);
        Self::from_secret(s)
    }

    /// Envelope public key.
    pub fn encryption_public(&self) -> [u8; 32] {
        XPublic::from(&self.x_secret).to_bytes()
    }

    /// Ledger identity.
    pub fn signing_public(&self) -> PublicKey {
        self.signing.public()
    }

    pub fn signing_key(&self) -> &SigningKey {
        &self.signing
    }

    pub fn open(&self, blob: &[u8]) -> Result<NegotiationRecord, DecryptFailure> {
        if blob.len() < 33 + 16 || blob[0] != ENVELOPE_VERSION {
            return Err(DecryptFailure);
        }
        let eph_pub: [u8; 32] = blob[1..33].try_into().map_err(|_| DecryptFailure)?;
        let shared = self.x_secret.diffie_hellman(&XPublic::from(eph_pub));
        if !shared.was_contributory() {
            return Err(DecryptFailure);
        }
        let (cipher, nonce) = envelope_cipher(shared.as_bytes(), &eph_pub, &self.encryption_public());
        let plain = cipher
            .decrypt(
                Nonce::from_slice(&nonce),
                Payload {
                    msg: &blob[33..],
                    aad: &envelope_ad(&eph_pub),
                },
            )
            .map_err(|_| DecryptFailure)?;
        decode_payload(&plain).ok_or(DecryptFailure)
    }
}

impl std::fmt::Debug for BankKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BankKeys({})", self.signing_public().to_hex())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisputeReason {
    /// Recomputed commitment differs from the one in the request.
    CommitmentMismatch,
    /// The request's commitment differs from the trade on the ledger.
    LedgerMismatch,
    DecryptFailure,
    AmountOutOfBounds,
}

impl DisputeReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DisputeReason::CommitmentMismatch => "commitment-mismatch",
            DisputeReason::LedgerMismatch => "ledger-mismatch",
            DisputeReason::DecryptFailure => "decrypt-failure",
            DisputeReason::AmountOutOfBounds => "amount-out-of-bounds",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Settlement {
    Paid {
        amount: u64,
        seller_id: String,
    },
    Disputed {
        commodity_id: String,
        reason: DisputeReason,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentEntry {
    pub req_pay_id: String,
    pub seller_id: String,
    pub amount: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputeEntry {
    pub req_pay_id: String,
    pub commodity_id: String,
    pub reason: DisputeReason,
}

/// The ledger as seen by the bank: request lookup and status write-back.
pub trait SettlementLedger {
    /// `(com_inc, commodity_id, buyer_pub, current status)` for a request.
    fn payment_request(&self, id: &Digest32) -> Option<(Commitment, String, PublicKey, Option<PaymentStatus>)>;
    fn record_status(&mut self, tx: TxPaymentStatus) -> Result<(), LedgerError>;
}

impl SettlementLedger for Ledger {
    fn payment_request(&self, id: &Digest32) -> Option<(Commitment, String, PublicKey, Option<PaymentStatus>)> {
        self.snapshot()
            .payment_requests
            .get(id)
            .map(|r| (r.com_inc, r.commodity_id.clone(), r.buyer_pub, r.status))
    }

    fn record_status(&mut self, tx: TxPaymentStatus) -> Result<(), LedgerError> {
        self.append_payment_status(tx).map(|_| ())
    }
}

#[derive(Clone, Debug)]
pub struct BankState {
    pub keys: BankKeys,
    pub balances: BTreeMap<String, u64>,
    pub payments: Vec<PaymentEntry>,
    pub disputes: Vec<DisputeEntry>,
    /// Digests of every processed request line.
    processed: BTreeSet<Digest32>,
    /// Requests that ended in payment.
    paid: BTreeSet<Digest32>,
}

#[derive(Serialize, Deserialize)]
struct BankFile {
    secret: String,
    balances: BTreeMap<String, u64>,
    payments: Vec<PaymentEntry>,
    disputes: Vec<DisputeEntry>,
    processed: Vec<String>,
    paid: Vec<String>,
}

fn req_digest(req: &ReqPay) -> Digest32 {
    Sha256::digest(req.to_line().as_bytes()).into()
}

impl BankState {
    pub fn new(keys: BankKeys) -> Self {
        BankState {
            keys,
            balances: BTreeMap::new(),
            payments: Vec::new(),
            disputes: Vec::new(),
            processed: BTreeSet::new(),
            paid: BTreeSet::new(),
        }
    }

    pub fn balance(&self, seller_id: &str) -> u64 {
        self.balances.get(seller_id).copied().unwrap_or(0)
    }

    pub fn total_credited(&self) -> u128 {
        self.balances.values().map(|&v| v as u128).sum()
    }

    /// Disputes logged per commodity.
    pub fn dispute_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for d in &self.disputes {
            *out.entry(d.commodity_id.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Settles one request. The status transaction is written to the ledger
    /// before any balance or log changes, so a refused write leaves the bank
    /// untouched. A byte-identical replay is refused; a corrected request
    /// for a disputed id is processed again.
    pub fn process<L: SettlementLedger>(
        &mut self,
        params: &PedersenParams,
        req: &ReqPay,
        ledger: &mut L,
    ) -> Result<Settlement, BankError> {
        let digest = req_digest(req);
        if self.processed.contains(&digest) || self.paid.contains(&req.req_pay_id) {
            return Err(BankError::AlreadySettled);
        }
        if !req.signature_valid() {
            return Err(BankError::BadSignature);
        }
        let (ledger_com, commodity_id, buyer_pub, status) = ledger
            .payment_request(&req.req_pay_id)
            .ok_or(BankError::UnknownReqPay)?;
        if buyer_pub != req.buyer_pub {
            return Err(BankError::BadSignature);
        }
        if status == Some(PaymentStatus::Paid) {
            return Err(BankError::AlreadySettled);
        }
        let outcome = if ledger_com != req.com_inc {
            Err(DisputeReason::LedgerMismatch)
        } else {
            match self.keys.open(&req.ciphertext) {
                Err(DecryptFailure) => Err(DisputeReason::DecryptFailure),
                Ok(n) if n.amount >= MAX_AMOUNT => Err(DisputeReason::AmountOutOfBounds),
                Ok(n) => {
                    if commit(params, &Scalar::from_u64(n.amount), &n.blinding) == req.com_inc {
                        Ok(n)
                    } else {
                        Err(DisputeReason::CommitmentMismatch)
                    }
                }
            }
        };
        let id_hex = hex::encode(req.req_pay_id);
        match outcome {
            Ok(n) => {
                let new_balance = self
                    .balance(&n.seller_id)
                    .checked_add(n.amount)
                    .ok_or_else(|| BankError::State("balance overflow".into()))?;
                ledger
                    .record_status(TxPaymentStatus::signed(
                        req.req_pay_id,
                        PaymentStatus::Paid,
                        &self.keys.signing,
                    ))
                    .map_err(BankError::Ledger)?;
                self.balances.insert(n.seller_id.clone(), new_balance);
                self.payments.push(PaymentEntry {
                    req_pay_id: id_hex,
                    seller_id: n.seller_id.clone(),
                    amount: n.amount,
                });
                self.processed.insert(digest);
                self.paid.insert(req.req_pay_id);
                Ok(Settlement::Paid {
                    amount: n.amount,
                    seller_id: n.seller_id,
                })
            }
            Err(reason) => {
                ledger
                    .record_status(TxPaymentStatus::signed(
                        req.req_pay_id,
                        PaymentStatus::Disputed,
                        &self.keys.signing,
                    ))
                    .map_err(BankError::Ledger)?;
                self.disputes.push(DisputeEntry {
                    req_pay_id: id_hex,
                    commodity_id: commodity_id.clone(),
                    reason,
                });
                self.processed.insert(digest);
                Ok(Settlement::Disputed { commodity_id, reason })
            }
        }
    }

    pub fn to_json(&self) -> String {
        let file = BankFile {
            secret: hex::encode(self.keys.secret),
            balances: self.balances.clone(),
            payments: self.payments.clone(),
            disputes: self.disputes.clone(),
            processed: self.processed.iter().map(hex::encode).collect(),
            paid: self.paid.iter().map(hex::encode).collect(),
        };
        serde_json::to_string_pretty(&file).expect("bank state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BankError> {
        let bad = |m: &str| BankError::State(m.to_string());
        let file: BankFile = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
        let digest = |s: &String| -> Result<Digest32, BankError> {
            hex::decode(s)
                .ok()
                .and_then(|v| v.try_into().ok())
                .ok_or_else(|| bad("bad digest"))
        };
        let secret = digest(&file.secret)?;
        Ok(BankState {
            keys: BankKeys::from_secret(secret),
            balances: file.balances,
            payments: file.payments,
            disputes: file.disputes,
            processed: file.processed.iter().map(digest).collect::<Result<_, _>>()?,
            paid: file.paid.iter().map(digest).collect::<Result<_, _>>()?,
        })
    }
}

/// Settles one request against `ledger`.
pub fn bank_process<L: SettlementLedger>(
    state: &mut BankState,
    params: &PedersenParams,
    req: &ReqPay,
    ledger: &mut L,
) -> Result<Settlement, BankError> {
    state.process(params, req, ledger)
}
