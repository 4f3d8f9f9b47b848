//! World state and the transition rules of the contract.

use std::collections::{BTreeMap, BTreeSet};

use crate::identity::{PublicKey, Role};
use crate::pedersen::Commitment;
use crate::tradeflow::{decrypt_constituents, ConstituentBlob};
use crate::zkrp::{verify_location, LocationProof, LocationVerdict, NotVerified};

use super::event::ReqPay;
use super::tx::*;
use super::{LedgerConfig, LedgerContext, LedgerError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommodityStatus {
    Created,
    Traded,
    Consumed,
}

impl CommodityStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommodityStatus::Created => "created",
            CommodityStatus::Traded => "traded",
            CommodityStatus::Consumed => "consumed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommodityRecord {
    pub commodity_id: String,
    pub owner: PublicKey,
    pub status: CommodityStatus,
    /// Empty until traded.
    pub region: String,
    pub proof_link: Option<Digest32>,
    pub create_tx: Digest32,
    pub trade_tx: Option<Digest32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductStatus {
    Registered,
    Sold,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalProductRecord {
    pub final_product_id: String,
    pub owner: PublicKey,
    pub regions: Vec<String>,
    pub constituents: ConstituentBlob,
    pub status: ProductStatus,
    pub produce_tx: Digest32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaymentRequestRecord {
    pub req_pay_id: Digest32,
    pub commodity_id: String,
    pub com_inc: Commitment,
    pub buyer_pub: PublicKey,
    pub trade_tx: Digest32,
    /// Latest status, with every status transaction kept for tracing.
    pub status: Option<PaymentStatus>,
    pub status_txs: Vec<Digest32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorldState {
    pub commodities: BTreeMap<String, CommodityRecord>,
    pub products: BTreeMap<String, FinalProductRecord>,
    pub payment_requests: BTreeMap<Digest32, PaymentRequestRecord>,
}

/// How a trade's region attribute is obtained.
pub(crate) enum RegionSource<'a> {
    /// Fresh submission: run the contract's verification on this proof.
    Verify(Option<&'a LocationProof>),
    /// Replay: trust the attribute recorded in the transaction.
    Recorded,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Effects {
    pub region: Option<String>,
    pub not_verified: Option<NotVerified>,
    pub req_pay: Option<ReqPay>,
}

/// The contract's proof check: returns the region attribute to record.
pub fn visc_verify(ctx: &LedgerContext, trade: &TxTrade, proof: Option<&LocationProof>) -> Result<String, NotVerified> {
    let (Some(link), Some(proof)) = (trade.proof_link, proof) else {
        return Ok(REGION_PROOF_NOT_PROVIDED.to_string());
    };
    if proof.link() != link {
        return Err(NotVerified::LinkMismatch);
    }
    if proof.seller_pub != trade.seller_pub {
        return Err(NotVerified::SellerMismatch);
    }
    match verify_location(&ctx.vk, &ctx.registry, &ctx.roster, proof) {
        LocationVerdict::Verified(name) => Ok(name),
        LocationVerdict::NotVerified(reason) => Err(reason),
    }
}

fn is_region_name(region: &str) -> bool {
    !region.is_empty() && region != REGION_NOT_VERIFIED && region != REGION_PROOF_NOT_PROVIDED
}

impl WorldState {
    /// Validates `tx` against the current state and applies it. On error the
    /// state is unchanged.
    pub(crate) fn apply(
        &mut self,
        ctx: &LedgerContext,
        config: &LedgerConfig,
        tx: &mut Transaction,
        source: RegionSource<'_>,
    ) -> Result<Effects, LedgerError> {
        match tx {
            Transaction::Create(t) => self.apply_create(ctx, t),
            Transaction::Trade(t) => self.apply_trade(ctx, t, source),
            Transaction::Produce(t) => self.apply_produce(ctx, config, t),
            Transaction::PaymentStatus(t) => self.apply_payment_status(ctx, t),
            Transaction::Sold(t) => self.apply_sold(t),
        }
    }

    fn apply_create(&mut self, ctx: &LedgerContext, t: &TxCreate) -> Result<Effects, LedgerError> {
        if !ctx.roster.has_role(&t.seller_pub, Role::Producer) {
            return Err(LedgerError::UnknownParticipant);
        }
        if !t.signature_valid() {
            return Err(LedgerError::BadSignature);
        }
        if self.commodities.contains_key(&t.commodity_id) {
            return Err(LedgerError::DuplicateCommodity(t.commodity_id.clone()));
        }
        let tx_id = Transaction::Create(t.clone()).id();
        self.commodities.insert(
            t.commodity_id.clone(),
            CommodityRecord {
                commodity_id: t.commodity_id.clone(),
                owner: t.seller_pub,
                status: CommodityStatus::Created,
                region: String::new(),
                proof_link: t.proof_link,
                create_tx: tx_id,
                trade_tx: None,
            },
        );
        Ok(Effects::default())
    }

    fn apply_trade(
        &mut self,
        ctx: &LedgerContext,
        t: &mut TxTrade,
        source: RegionSource<'_>,
    ) -> Result<Effects, LedgerError> {
        let rec = self
            .commodities
            .get(&t.commodity_id)
            .ok_or_else(|| LedgerError::UnknownCommodity(t.commodity_id.clone()))?;
        if ctx.roster.lookup_key(&t.seller_pub).is_none() || ctx.roster.lookup_key(&t.buyer_pub).is_none() {
            return Err(LedgerError::UnknownParticipant);
        }
        if !t.signatures_valid() {
            return Err(LedgerError::BadSignature);
        }
        if rec.status != CommodityStatus::Created {
            return Err(LedgerError::AlreadyTraded(t.commodity_id.clone()));
        }
        if rec.owner != t.seller_pub {
            return Err(LedgerError::NotOwner(t.commodity_id.clone()));
        }
        let mut effects = Effects::default();
        match source {
            RegionSource::Verify(proof) => {
                if !t.region.is_empty() {
                    return Err(LedgerError::RegionPreset);
                }
                t.region = match visc_verify(ctx, t, proof) {
                    Ok(name) => name,
                    Err(reason) => {
                        effects.not_verified = Some(reason);
                        REGION_NOT_VERIFIED.to_string()
                    }
                };
            }
            RegionSource::Recorded => {
                if t.region.is_empty() {
                    return Err(LedgerError::RegionMissing);
                }
            }
        }
        let tx_id = Transaction::Trade(t.clone()).id();
        if let (true, Some(com), Some(blob), Some(sig)) = (
            is_region_name(&t.region),
            t.incentive_commitment,
            &t.payment_blob,
            t.payment_signature,
        ) {
            let req = ReqPay {
                req_pay_id: t.req_pay_id(),
                com_inc: com,
                ciphertext: blob.clone(),
                buyer_pub: t.buyer_pub,
                buyer_signature: sig,
            };
            self.payment_requests.insert(
                req.req_pay_id,
                PaymentRequestRecord {
                    req_pay_id: req.req_pay_id,
                    commodity_id: t.commodity_id.clone(),
                    com_inc: com,
                    buyer_pub: t.buyer_pub,
                    trade_tx: tx_id,
                    status: None,
                    status_txs: Vec::new(),
                },
            );
            effects.req_pay = Some(req);
        }
        let rec = self.commodities.get_mut(&t.commodity_id).expect("checked above");
        rec.owner = t.buyer_pub;
        rec.status = CommodityStatus::Traded;
        rec.region = t.region.clone();
        rec.trade_tx = Some(tx_id);
        effects.region = Some(t.region.clone());
        Ok(effects)
    }

    fn apply_produce(
        &mut self,
        ctx: &LedgerContext,
        config: &LedgerConfig,
        t: &TxProduce,
    ) -> Result<Effects, LedgerError> {
        if !ctx.roster.has_role(&t.buyer_pub, Role::Manufacturer) {
            return Err(LedgerError::UnknownParticipant);
        }
        if !t.signature_valid() {
            return Err(LedgerError::BadSignature);
        }
        if self.products.contains_key(&t.final_product_id) {
            return Err(LedgerError::DuplicateProduct(t.final_product_id.clone()));
        }
        let mut consumed = Vec::new();
        if config.ledger_holds_key {
            let key = ctx
                .keyring
                .get(&t.constituents.key_id)
                .ok_or(LedgerError::ConstituentsUnreadable)?;
            let ids = decrypt_constituents(key, &t.constituents, &t.final_product_id)
                .map_err(|_| LedgerError::ConstituentsUnreadable)?;
            let mut seen = BTreeSet::new();
            let mut regions = Vec::with_capacity(ids.len());
            for id in &ids {
                if !seen.insert(id) {
                    return Err(LedgerError::DuplicateConstituent(id.clone()));
                }
                let rec = self
                    .commodities
                    .get(id)
                    .ok_or_else(|| LedgerError::UnknownConstituent(id.clone()))?;
                match rec.status {
                    CommodityStatus::Created => return Err(LedgerError::ConstituentNotTraded(id.clone())),
                    CommodityStatus::Consumed => return Err(LedgerError::ConstituentConsumed(id.clone())),
                    CommodityStatus::Traded => {}
                }
                if rec.owner != t.buyer_pub {
                    return Err(LedgerError::NotOwner(id.clone()));
                }
                regions.push(rec.region.clone());
            }
            if regions != t.regions {
                return Err(LedgerError::RegionMismatch);
            }
            consumed = ids;
        }
        for id in consumed {
            self.commodities.get_mut(&id).expect("checked above").status = CommodityStatus::Consumed;
        }
        let tx_id = Transaction::Produce(t.clone()).id();
        self.products.insert(
            t.final_product_id.clone(),
            FinalProductRecord {
                final_product_id: t.final_product_id.clone(),
                owner: t.buyer_pub,
                regions: t.regions.clone(),
                constituents: t.constituents.clone(),
                status: ProductStatus::Registered,
                produce_tx: tx_id,
            },
        );
        Ok(Effects::default())
    }

    fn apply_payment_status(&mut self, ctx: &LedgerContext, t: &TxPaymentStatus) -> Result<Effects, LedgerError> {
        if !ctx.roster.has_role(&t.bank_pub, Role::Bank) {
            return Err(LedgerError::UnknownParticipant);
        }
        if !t.signature_valid() {
            return Err(LedgerError::BadSignature);
        }
        let rec = self
            .payment_requests
            .get_mut(&t.req_pay_id)
            .ok_or(LedgerError::UnknownReqPay)?;
        if rec.status == Some(PaymentStatus::Paid) {
            return Err(LedgerError::AlreadyFinalized);
        }
        rec.status = Some(t.status);
        rec.status_txs.push(Transaction::PaymentStatus(t.clone()).id());
        Ok(Effects::default())
    }

    fn apply_sold(&mut self, t: &TxSold) -> Result<Effects, LedgerError> {
        if !t.signature_valid() {
            return Err(LedgerError::BadSignature);
        }
        let rec = self
            .products
            .get_mut(&t.final_product_id)
            .ok_or_else(|| LedgerError::UnknownProduct(t.final_product_id.clone()))?;
        if rec.owner != t.seller_pub {
            return Err(LedgerError::NotOwner(t.final_product_id.clone()));
        }
        if rec.status == ProductStatus::Sold {
            return Err(LedgerError::AlreadySold(t.final_product_id.clone()));
        }
        rec.status = ProductStatus::Sold;
        Ok(Effects::default())
    }
}
