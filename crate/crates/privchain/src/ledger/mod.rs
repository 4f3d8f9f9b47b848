//! Single-sequencer permissioned ledger with the verification-and-incentive
//! contract.
//!
//! All mutations go through `&mut Ledger`, so submissions are totally
//! ordered. Readers take [`Ledger::snapshot`], an immutable `Arc` of the
//! world state that later writes never touch.
//!
//! Accepted transactions update the world state immediately and are sealed
//! into a block once `batch_size` of them are pending. A file-backed ledger
//! appends each sealed block as one line (see [`block`]). Reopening the file
//! re-checks every hash and link and replays the transactions; trades are
//! replayed with their recorded region attribute and proofs are not
//! re-verified.

pub mod block;
pub mod event;
pub mod state;
pub mod tx;

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::geo::RegionRegistry;
use crate::identity::Roster;
use crate::tradeflow::{decrypt_constituents, Keyring, TradeFlowError, TradeFlowKey};
use crate::zkrp::{LocationProof, NotVerified, VerificationKey};

pub use block::Block;
pub use event::{ReqPay, ReqPayParseError};
pub use state::{
    visc_verify, CommodityRecord, CommodityStatus, Effects, FinalProductRecord, PaymentRequestRecord, ProductStatus,
    WorldState,
};
pub use tx::*;

use state::RegionSource;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("commodity `{0}` already exists")]
    DuplicateCommodity(String),
    #[error("signer is not a registered participant with the required role")]
    UnknownParticipant,
    #[error("signature does not verify")]
    BadSignature,
    #[error("unknown commodity `{0}`")]
    UnknownCommodity(String),
    #[error("commodity `{0}` has already been traded")]
    AlreadyTraded(String),
    #[error("signer does not own `{0}`")]
    NotOwner(String),
    #[error("region attribute must be empty on submission")]
    RegionPreset,
    #[error("recorded trade has no region attribute")]
    RegionMissing,
    #[error("constituent blob cannot be opened with the ledger's keys")]
    ConstituentsUnreadable,
    #[error("unknown constituent `{0}`")]
    UnknownConstituent(String),
    #[error("constituent `{0}` has not been traded")]
    ConstituentNotTraded(String),
    #[error("constituent `{0}` is already part of another product")]
    ConstituentConsumed(String),
    #[error("constituent `{0}` listed twice")]
    DuplicateConstituent(String),
    #[error("regions do not match the constituents' recorded regions")]
    RegionMismatch,
    #[error("product `{0}` already exists")]
    DuplicateProduct(String),
    #[error("unknown product `{0}`")]
    UnknownProduct(String),
    #[error("product `{0}` already sold")]
    AlreadySold(String),
    #[error("unknown payment request")]
    UnknownReqPay,
    #[error("payment request already settled")]
    AlreadyFinalized,
    #[error("ledger file line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
    #[error("ledger replay rejected transaction in block {height}: {reason}")]
    ReplayRejected { height: u64, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for LedgerError {
    fn from(e: std::io::Error) -> Self {
        LedgerError::Io(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerConfig {
    /// Transactions per block.
    pub batch_size: usize,
    /// Whether the ledger opens constituent blobs to check produce
    /// transactions. Without it, constituents are neither checked nor
    /// marked consumed.
    pub ledger_holds_key: bool,
    /// fsync the ledger file after every sealed block.
    pub durable: bool,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig {
            batch_size: 1,
            ledger_holds_key: true,
            durable: false,
        }
    }
}

/// Everything the contract consults besides the world state.
#[derive(Clone, Debug)]
pub struct LedgerContext {
    pub vk: VerificationKey,
    pub registry: RegionRegistry,
    pub roster: Roster,
    pub keyring: Keyring,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Receipt {
    pub tx_id: Digest32,
    /// Height of the block the transaction is (or will be) sealed in.
    pub height: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TradeReceipt {
    pub receipt: Receipt,
    pub region: String,
    pub not_verified: Option<NotVerified>,
    pub req_pay: Option<ReqPay>,
}

/// What a consumer sees for a product: its region names and nothing else.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryResponse {
    pub regions: Vec<String>,
}

impl QueryResponse {
    /// One region per line.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.regions
            .iter()
            .flat_map(|r| format!("{r}\n").into_bytes())
            .collect()
    }
}

/// One constituent of an audited product.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProvenanceBranch {
    pub commodity_id: String,
    pub create_tx: Digest32,
    pub trade_tx: Option<Digest32>,
    pub region: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProvenanceTree {
    pub final_product_id: String,
    pub produce_tx: Digest32,
    pub branches: Vec<ProvenanceBranch>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error(transparent)]
    Crypto(#[from] TradeFlowError),
    #[error("unknown product `{0}`")]
    UnknownProduct(String),
    #[error("constituent `{0}` missing from world state")]
    MissingConstituent(String),
}

pub struct Ledger {
    config: LedgerConfig,
    ctx: LedgerContext,
    blocks: Vec<Block>,
    pending: Vec<Transaction>,
    state: Arc<WorldState>,
    events: VecDeque<ReqPay>,
    file: Option<File>,
    event_file: Option<File>,
}

impl Ledger {
    pub fn in_memory(ctx: LedgerContext, config: LedgerConfig) -> Self {
        Ledger {
            config,
            ctx,
            blocks: vec![Block::genesis()],
            pending: Vec::new(),
            state: Arc::new(WorldState::default()),
            events: VecDeque::new(),
            file: None,
            event_file: None,
        }
    }

    /// Opens a file-backed ledger, creating it with a genesis block if the
    /// file does not exist, or re-verifying and replaying it if it does.
    pub fn open(path: &Path, ctx: LedgerContext, config: LedgerConfig) -> Result<Self, LedgerError> {
        let mut ledger = Ledger::in_memory(ctx, config);
        if path.exists() {
            let file = File::open(path)?;
            ledger.blocks.clear();
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let block = Block::from_line(&line, i + 1)?;
                ledger.replay_block(block, i + 1)?;
            }
            if ledger.blocks.is_empty() {
                return Err(LedgerError::Corrupt {
                    line: 0,
                    msg: "missing genesis block".into(),
                });
            }
            ledger.file = Some(OpenOptions::new().append(true).open(path)?);
        } else {
            let mut file = OpenOptions::new().create_new(true).append(true).open(path)?;
            writeln!(file, "{}", ledger.blocks[0].to_line())?;
            if ledger.config.durable {
                file.sync_data()?;
            }
            ledger.file = Some(file);
        }
        Ok(ledger)
    }

    fn replay_block(&mut self, block: Block, line: usize) -> Result<(), LedgerError> {
        let corrupt = |msg: &str| LedgerError::Corrupt {
            line,
            msg: msg.to_string(),
        };
        match self.blocks.last() {
            None => {
                if block != Block::genesis() {
                    return Err(corrupt("first block is not genesis"));
                }
            }
            Some(prev) => {
                if block.height != prev.height + 1 {
                    return Err(corrupt("height gap"));
                }
                if block.prev_hash != prev.block_hash {
                    return Err(corrupt("prev_hash does not link to predecessor"));
                }
            }
        }
        let state = Arc::make_mut(&mut self.state);
        for tx in &block.txs {
            let mut tx = tx.clone();
            state
                .apply(&self.ctx, &self.config, &mut tx, RegionSource::Recorded)
                .map_err(|e| LedgerError::ReplayRejected {
                    height: block.height,
                    reason: e.to_string(),
                })?;
        }
        self.blocks.push(block);
        Ok(())
    }

    /// Mirrors every emitted payment request to a line-delimited file.
    pub fn set_event_log(&mut self, path: &Path) -> Result<(), LedgerError> {
        self.event_file = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(())
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    pub fn context(&self) -> &LedgerContext {
        &self.ctx
    }

    pub fn snapshot(&self) -> Arc<WorldState> {
        Arc::clone(&self.state)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn pending(&self) -> &[Transaction] {
        &self.pending
    }

    /// Takes the queued payment requests.
    pub fn drain_events(&mut self) -> Vec<ReqPay> {
        self.events.drain(..).collect()
    }

    fn submit(&mut self, mut tx: Transaction, source: RegionSource<'_>) -> Result<(Receipt, Effects), LedgerError> {
        let effects = Arc::make_mut(&mut self.state).apply(&self.ctx, &self.config, &mut tx, source)?;
        let receipt = Receipt {
            tx_id: tx.id(),
            height: self.blocks.len() as u64,
        };
        if let Some(req) = &effects.req_pay {
            if let Some(f) = &mut self.event_file {
                writeln!(f, "{}", req.to_line())?;
                f.flush()?;
            }
            self.events.push_back(req.clone());
        }
        self.pending.push(tx);
        if self.pending.len() >= self.config.batch_size.max(1) {
            self.seal()?;
        }
        Ok((receipt, effects))
    }

    /// Seals pending transactions into a block, if any.
    pub fn seal(&mut self) -> Result<(), LedgerError> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let prev = self.blocks.last().expect("genesis present");
        let block = Block::seal(prev.height + 1, prev.block_hash, std::mem::take(&mut self.pending));
        if let Some(f) = &mut self.file {
            writeln!(f, "{}", block.to_line())?;
            f.flush()?;
            if self.config.durable {
                f.sync_data()?;
            }
        }
        self.blocks.push(block);
        Ok(())
    }

    pub fn submit_create(&mut self, tx: TxCreate) -> Result<Receipt, LedgerError> {
        self.submit(Transaction::Create(tx), RegionSource::Recorded)
            .map(|(r, _)| r)
    }

    /// Runs the contract: verifies the proof (if both link and proof are
    /// present), records the region, transfers ownership and emits a payment
    /// request when the region is verified and the payment fields are set.
    pub fn submit_trade(&mut self, tx: TxTrade, proof: Option<&LocationProof>) -> Result<TradeReceipt, LedgerError> {
        let (receipt, effects) = self.submit(Transaction::Trade(tx), RegionSource::Verify(proof))?;
        Ok(TradeReceipt {
            receipt,
            region: effects.region.unwrap_or_default(),
            not_verified: effects.not_verified,
            req_pay: effects.req_pay,
        })
    }

    pub fn submit_produce(&mut self, tx: TxProduce) -> Result<Receipt, LedgerError> {
        self.submit(Transaction::Produce(tx), RegionSource::Recorded)
            .map(|(r, _)| r)
    }

    pub fn append_payment_status(&mut self, tx: TxPaymentStatus) -> Result<Receipt, LedgerError> {
        self.submit(Transaction::PaymentStatus(tx), RegionSource::Recorded)
            .map(|(r, _)| r)
    }

    pub fn mark_sold(&mut self, tx: TxSold) -> Result<Receipt, LedgerError> {
        self.submit(Transaction::Sold(tx), RegionSource::Recorded)
            .map(|(r, _)| r)
    }

    pub fn consumer_query(&self, final_product_id: &str) -> Result<QueryResponse, LedgerError> {
        consumer_query(&self.state, final_product_id)
    }

    pub fn audit_trace(&self, key: &TradeFlowKey, final_product_id: &str) -> Result<ProvenanceTree, AuditError> {
        audit_trace(key, &self.state, final_product_id)
    }
}

impl Drop for Ledger {
    fn drop(&mut self) {
        let _ = self.seal();
    }
}

pub fn consumer_query(state: &WorldState, final_product_id: &str) -> Result<QueryResponse, LedgerError> {
    state
        .products
        .get(final_product_id)
        .map(|p| QueryResponse {
            regions: p.regions.clone(),
        })
        .ok_or_else(|| LedgerError::UnknownProduct(final_product_id.to_string()))
}

/// Opens a product's constituents with an authorized key and walks each one
/// back to its create and trade transactions.
pub fn audit_trace(
    key: &TradeFlowKey,
    state: &WorldState,
    final_product_id: &str,
) -> Result<ProvenanceTree, AuditError> {
    let product = state
        .products
        .get(final_product_id)
        .ok_or_else(|| AuditError::UnknownProduct(final_product_id.to_string()))?;
    let ids = decrypt_constituents(key, &product.constituents, final_product_id)?;
    let branches = ids
        .into_iter()
        .map(|id| {
            let rec = state
                .commodities
                .get(&id)
                .ok_or_else(|| AuditError::MissingConstituent(id.clone()))?;
            Ok(ProvenanceBranch {
                commodity_id: id,
                create_tx: rec.create_tx,
                trade_tx: rec.trade_tx,
                region: rec.region.clone(),
            })
        })
        .collect::<Result<Vec<_>, AuditError>>()?;
    Ok(ProvenanceTree {
        final_product_id: final_product_id.to_string(),
        produce_tx: product.produce_tx,
        branches,
    })
}

/// Checks hashes and links of a ledger file without replaying it. Returns
/// the number of blocks.
pub fn verify_chain_file(path: &Path) -> Result<usize, LedgerError> {
    let file = File::open(path)?;
    let mut prev: Option<Block> = None;
    let mut n = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let block = Block::from_line(&line, i + 1)?;
        let ok = match &prev {
            None => block == Block::genesis(),
            Some(p) => block.height == p.height + 1 && block.prev_hash == p.block_hash,
        };
        if !ok {
            return Err(LedgerError::Corrupt {
                line: i + 1,
                msg: "broken chain link".into(),
            });
        }
        prev = Some(block);
        n += 1;
    }
    Ok(n)
}
