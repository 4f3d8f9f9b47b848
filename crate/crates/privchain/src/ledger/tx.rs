//! Transaction vocabulary and its canonical encoding.
//!
//! Every transaction encodes as `kind u8 | fields…` using the shared codec
//! (length-prefixed strings and byte strings, presence byte for optional
//! fields). A transaction id is SHA-256 of that encoding.
//!
//! | kind | transaction      |
//! |------|------------------|
//! | 1    | create           |
//! | 2    | trade            |
//! | 3    | produce          |
//! | 4    | payment status   |
//! | 5    | sold             |

use sha2::{Digest, Sha256};

use crate::codec::{Reader, Writer};
use crate::error::CryptoError;
use crate::identity::{PublicKey, Signature, SigningKey};
use crate::pedersen::Commitment;
use crate::tradeflow::ConstituentBlob;

pub type Digest32 = [u8; 32];

/// Region attribute written when a trade arrives without a proof.
pub const REGION_PROOF_NOT_PROVIDED: &str = "proof not provided";
/// Region attribute written when the supplied proof fails verification.
pub const REGION_NOT_VERIFIED: &str = "not verified";

const NO_SIG: Signature = Signature([0; 64]);

fn opt_digest(w: &mut Writer, d: &Option<Digest32>) {
    match d {
        Some(d) => w.u8(1).raw(d),
        None => w.u8(0),
    };
}

fn read_opt_digest(r: &mut Reader<'_>) -> Result<Option<Digest32>, CryptoError> {
    Ok(if r.flag()? { Some(r.array()?) } else { None })
}

/// Registers a new commodity batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxCreate {
    pub commodity_id: String,
    pub data_hash: Digest32,
    pub proof_link: Option<Digest32>,
    pub seller_pub: PublicKey,
    pub seller_signature: Signature,
}

impl TxCreate {
    pub fn signed(commodity_id: &str, data_hash: Digest32, proof_link: Option<Digest32>, seller: &SigningKey) -> Self {
        let mut tx = TxCreate {
            commodity_id: commodity_id.to_string(),
            data_hash,
            proof_link,
            seller_pub: seller.public(),
            seller_signature: NO_SIG,
        };
        tx.seller_signature = seller.sign(&tx.signing_bytes());
        tx
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(b"privchain.tx.create.v1");
        w.str(&self.commodity_id).raw(&self.data_hash);
        opt_digest(&mut w, &self.proof_link);
        w.raw(&self.seller_pub.0);
        w.finish()
    }

    pub fn signature_valid(&self) -> bool {
        self.seller_pub.verify(&self.signing_bytes(), &self.seller_signature)
    }
}

/// Transfers a commodity from seller to buyer, optionally carrying a proof
/// link, an incentive commitment and the bank-encrypted payment blob.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxTrade {
    pub commodity_id: String,
    pub data_hash: Digest32,
    pub proof_link: Option<Digest32>,
    pub incentive_commitment: Option<Commitment>,
    pub payment_blob: Option<Vec<u8>>,
    /// Empty on submission; filled in by the contract.
    pub region: String,
    pub seller_pub: PublicKey,
    pub seller_signature: Signature,
    pub buyer_pub: PublicKey,
    pub buyer_signature: Signature,
    /// Buyer signature over `(req_pay_id, com_inc, payment_blob)`; present
    /// iff `payment_blob` is.
    pub payment_signature: Option<Signature>,
}

impl TxTrade {
    pub fn new(
        commodity_id: &str,
        data_hash: Digest32,
        proof_link: Option<Digest32>,
        incentive_commitment: Option<Commitment>,
        payment_blob: Option<Vec<u8>>,
        seller_pub: PublicKey,
        buyer_pub: PublicKey,
    ) -> Self {
        TxTrade {
            commodity_id: commodity_id.to_string(),
            data_hash,
            proof_link,
            incentive_commitment,
            payment_blob,
            region: String::new(),
            seller_pub,
            seller_signature: NO_SIG,
            buyer_pub,
            buyer_signature: NO_SIG,
            payment_signature: None,
        }
    }

    /// Everything both parties agree on; excludes the region and signatures.
    pub fn body_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(b"privchain.tx.trade.v1");
        w.str(&self.commodity_id).raw(&self.data_hash);
        opt_digest(&mut w, &self.proof_link);
        match &self.incentive_commitment {
            Some(c) => w.u8(1).g1(&c.0),
            None => w.u8(0),
        };
        match &self.payment_blob {
            Some(b) => w.u8(1).bytes(b),
            None => w.u8(0),
        };
        w.raw(&self.seller_pub.0).raw(&self.buyer_pub.0);
        w.finish()
    }

    /// Identifier of the payment request this trade may emit.
    pub fn req_pay_id(&self) -> Digest32 {
        let mut h = Sha256::new();
        h.update(b"privchain.reqpay-id.v1");
        h.update(self.body_bytes());
        h.finalize().into()
    }

    pub fn sign_seller(&mut self, seller: &SigningKey) {
        self.seller_signature = seller.sign(&self.body_bytes());
    }

    pub fn sign_buyer(&mut self, buyer: &SigningKey) {
        self.buyer_signature = buyer.sign(&self.body_bytes());
        self.payment_signature = match (&self.incentive_commitment, &self.payment_blob) {
            (com, Some(blob)) => Some(buyer.sign(&payment_signing_bytes(&self.req_pay_id(), com.as_ref(), blob))),
            (_, None) => None,
        };
    }

    pub fn signatures_valid(&self) -> bool {
        let body = self.body_bytes();
        if !self.seller_pub.verify(&body, &self.seller_signature)
            || !self.buyer_pub.verify(&body, &self.buyer_signature)
        {
            return false;
        }
        match (&self.payment_blob, &self.payment_signature) {
            (None, None) => true,
            (Some(blob), Some(sig)) => self.buyer_pub.verify(
                &payment_signing_bytes(&self.req_pay_id(), self.incentive_commitment.as_ref(), blob),
                sig,
            ),
            _ => false,
        }
    }
}

/// Bytes the buyer signs for the bank.
pub fn payment_signing_bytes(req_pay_id: &Digest32, com_inc: Option<&Commitment>, ciphertext: &[u8]) -> Vec<u8> {
    let mut w = Writer::with_tag(b"privchain.reqpay.v1");
    w.raw(req_pay_id);
    match com_inc {
        Some(c) => w.u8(1).g1(&c.0),
        None => w.u8(0),
    };
    w.bytes(ciphertext);
    w.finish()
}

/// Registers a final product made from traded commodities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxProduce {
    pub final_product_id: String,
    pub constituents: ConstituentBlob,
    pub regions: Vec<String>,
    pub buyer_pub: PublicKey,
    pub buyer_signature: Signature,
}

impl TxProduce {
    pub fn signed(
        final_product_id: &str,
        constituents: ConstituentBlob,
        regions: Vec<String>,
        buyer: &SigningKey,
    ) -> Self {
        let mut tx = TxProduce {
            final_product_id: final_product_id.to_string(),
            constituents,
            regions,
            buyer_pub: buyer.public(),
            buyer_signature: NO_SIG,
        };
        tx.buyer_signature = buyer.sign(&tx.signing_bytes());
        tx
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(b"privchain.tx.produce.v1");
        w.str(&self.final_product_id)
            .bytes(&self.constituents.to_bytes())
            .u32(self.regions.len() as u32);
        for r in &self.regions {
            w.str(r);
        }
        w.raw(&self.buyer_pub.0);
        w.finish()
    }

    pub fn signature_valid(&self) -> bool {
        self.buyer_pub.verify(&self.signing_bytes(), &self.buyer_signature)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PaymentStatus {
    Paid,
    Disputed,
}

impl PaymentStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PaymentStatus::Paid => "paid",
            PaymentStatus::Disputed => "disputed",
        }
    }

    fn code(self) -> u8 {
        match self {
            PaymentStatus::Paid => 1,
            PaymentStatus::Disputed => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self, CryptoError> {
        match c {
            1 => Ok(PaymentStatus::Paid),
            2 => Ok(PaymentStatus::Disputed),
            _ => Err(CryptoError::Encoding("payment status")),
        }
    }
}

/// Settlement outcome written back by the bank; carries only the request id
/// and the status.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxPaymentStatus {
    pub req_pay_id: Digest32,
    pub status: PaymentStatus,
    pub bank_pub: PublicKey,
    pub bank_signature: Signature,
}

impl TxPaymentStatus {
    pub fn signed(req_pay_id: Digest32, status: PaymentStatus, bank: &SigningKey) -> Self {
        let mut tx = TxPaymentStatus {
            req_pay_id,
            status,
            bank_pub: bank.public(),
            bank_signature: NO_SIG,
        };
        tx.bank_signature = bank.sign(&tx.signing_bytes());
        tx
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(b"privchain.tx.payment-status.v1");
        w.raw(&self.req_pay_id).u8(self.status.code()).raw(&self.bank_pub.0);
        w.finish()
    }

    pub fn signature_valid(&self) -> bool {
        self.bank_pub.verify(&self.signing_bytes(), &self.bank_signature)
    }
}

/// Marks a final product as sold to a consumer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxSold {
    pub final_product_id: String,
    pub seller_pub: PublicKey,
    pub signature: Signature,
}

impl TxSold {
    pub fn signed(final_product_id: &str, seller: &SigningKey) -> Self {
        let mut tx = TxSold {
            final_product_id: final_product_id.to_string(),
            seller_pub: seller.public(),
            signature: NO_SIG,
        };
        tx.signature = seller.sign(&tx.signing_bytes());
        tx
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(b"privchain.tx.sold.v1");
        w.str(&self.final_product_id).raw(&self.seller_pub.0);
        w.finish()
    }

    pub fn signature_valid(&self) -> bool {
        self.seller_pub.verify(&self.signing_bytes(), &self.signature)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transaction {
    Create(TxCreate),
    Trade(TxTrade),
    Produce(TxProduce),
    PaymentStatus(TxPaymentStatus),
    Sold(TxSold),
}

impl Transaction {
    pub fn kind(&self) -> &'static str {
        match self {
            Transaction::Create(_) => "create",
            Transaction::Trade(_) => "trade",
            Transaction::Produce(_) => "produce",
            Transaction::PaymentStatus(_) => "payment-status",
            Transaction::Sold(_) => "sold",
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Transaction::Create(t) => {
                w.u8(1).str(&t.commodity_id).raw(&t.data_hash);
                opt_digest(&mut w, &t.proof_link);
                w.raw(&t.seller_pub.0).raw(&t.seller_signature.0);
            }
            Transaction::Trade(t) => {
                w.u8(2).str(&t.commodity_id).raw(&t.data_hash);
                opt_digest(&mut w, &t.proof_link);
                match &t.incentive_commitment {
                    Some(c) => w.u8(1).g1(&c.0),
                    None => w.u8(0),
                };
                match &t.payment_blob {
                    Some(b) => w.u8(1).bytes(b),
                    None => w.u8(0),
                };
                w.str(&t.region)
                    .raw(&t.seller_pub.0)
                    .raw(&t.seller_signature.0)
                    .raw(&t.buyer_pub.0)
                    .raw(&t.buyer_signature.0);
                match &t.payment_signature {
                    Some(s) => w.u8(1).raw(&s.0),
                    None => w.u8(0),
                };
            }
            Transaction::Produce(t) => {
                w.u8(3)
                    .str(&t.final_product_id)
                    .bytes(&t.constituents.to_bytes())
                    .u32(t.regions.len() as u32);
                for r in &t.regions {
                    w.str(r);
                }
                w.raw(&t.buyer_pub.0).raw(&t.buyer_signature.0);
            }
            Transaction::PaymentStatus(t) => {
                w.u8(4)
                    .raw(&t.req_pay_id)
                    .u8(t.status.code())
                    .raw(&t.bank_pub.0)
                    .raw(&t.bank_signature.0);
            }
            Transaction::Sold(t) => {
                w.u8(5)
                    .str(&t.final_product_id)
                    .raw(&t.seller_pub.0)
                    .raw(&t.signature.0);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        let tx = match r.u8()? {
            1 => Transaction::Create(TxCreate {
                commodity_id: r.str()?,
                data_hash: r.array()?,
                proof_link: read_opt_digest(&mut r)?,
                seller_pub: PublicKey(r.array()?),
                seller_signature: Signature(r.array()?),
            }),
            2 => Transaction::Trade(TxTrade {
                commodity_id: r.str()?,
                data_hash: r.array()?,
                proof_link: read_opt_digest(&mut r)?,
                incentive_commitment: if r.flag()? { Some(Commitment(r.g1()?)) } else { None },
                payment_blob: if r.flag()? { Some(r.bytes()?.to_vec()) } else { None },
                region: r.str()?,
                seller_pub: PublicKey(r.array()?),
                seller_signature: Signature(r.array()?),
                buyer_pub: PublicKey(r.array()?),
                buyer_signature: Signature(r.array()?),
                payment_signature: if r.flag()? { Some(Signature(r.array()?)) } else { None },
            }),
            3 => {
                let final_product_id = r.str()?;
                let constituents =
                    ConstituentBlob::from_bytes(r.bytes()?).map_err(|_| CryptoError::Encoding("constituent blob"))?;
                let n = r.u32()?;
                if n as usize > bytes.len() {
                    return Err(CryptoError::Encoding("region count"));
                }
                let regions = (0..n).map(|_| r.str()).collect::<Result<_, _>>()?;
                Transaction::Produce(TxProduce {
                    final_product_id,
                    constituents,
                    regions,
                    buyer_pub: PublicKey(r.array()?),
                    buyer_signature: Signature(r.array()?),
                })
            }
            4 => Transaction::PaymentStatus(TxPaymentStatus {
                req_pay_id: r.array()?,
                status: PaymentStatus::from_code(r.u8()?)?,
                bank_pub: PublicKey(r.array()?),
                bank_signature: Signature(r.array()?),
            }),
            5 => Transaction::Sold(TxSold {
                final_product_id: r.str()?,
                seller_pub: PublicKey(r.array()?),
                signature: Signature(r.array()?),
            }),
            _ => return Err(CryptoError::Encoding("transaction kind")),
        };
        r.finish()?;
        Ok(tx)
    }

    pub fn id(&self) -> Digest32 {
        Sha256::digest(self.to_bytes()).into()
    }
}
