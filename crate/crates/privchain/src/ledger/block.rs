//! Hash-chained blocks and the line-oriented ledger file.
//!
//! Each line of the ledger file is one JSON object:
//!
//! ```text
//! {"height":H,"prev_hash":"<hex32>","block_hash":"<hex32>","txs":["<hex tx bytes>",...]}
//! ```
//!
//! The block hash is SHA-256 over
//! `"privchain.block.v1" | height u64 | prev_hash [32] | count u32 | count × (u32 len + tx bytes)`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tx::{Digest32, Transaction};
use super::LedgerError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest32,
    pub txs: Vec<Transaction>,
    pub block_hash: Digest32,
}

pub fn block_hash(height: u64, prev_hash: &Digest32, txs: &[Vec<u8>]) -> Digest32 {
    let mut h = Sha256::new();
    h.update(b"privchain.block.v1");
    h.update(height.to_be_bytes());
    h.update(prev_hash);
    h.update((txs.len() as u32).to_be_bytes());
    for tx in txs {
        h.update((tx.len() as u32).to_be_bytes());
        h.update(tx);
    }
    h.finalize().into()
}

impl Block {
    pub fn genesis() -> Self {
        Self::seal(0, [0; 32], Vec::new())
    }

    pub fn seal(height: u64, prev_hash: Digest32, txs: Vec<Transaction>) -> Self {
        let encoded: Vec<Vec<u8>> = txs.iter().map(Transaction::to_bytes).collect();
        Block {
            height,
            prev_hash,
            block_hash: block_hash(height, &prev_hash, &encoded),
            txs,
        }
    }

    pub fn hash_valid(&self) -> bool {
        let encoded: Vec<Vec<u8>> = self.txs.iter().map(Transaction::to_bytes).collect();
        block_hash(self.height, &self.prev_hash, &encoded) == self.block_hash
    }

    pub fn to_line(&self) -> String {
        let rec = BlockRecord {
            height: self.height,
            prev_hash: hex::encode(self.prev_hash),
            block_hash: hex::encode(self.block_hash),
            txs: self.txs.iter().map(|t| hex::encode(t.to_bytes())).collect(),
        };
        serde_json::to_string(&rec).expect("block record serializes")
    }

    /// Parses one line and checks its hash. Chain linkage is checked by the
    /// caller.
    pub fn from_line(line: &str, line_no: usize) -> Result<Self, LedgerError> {
        let bad = |msg: &str| LedgerError::Corrupt {
            line: line_no,
            msg: msg.to_string(),
        };
        let rec: BlockRecord = serde_json::from_str(line).map_err(|e| bad(&e.to_string()))?;
        let digest = |s: &str| -> Result<Digest32, LedgerError> {
            hex::decode(s)
                .ok()
                .and_then(|v| v.try_into().ok())
                .ok_or_else(|| bad("bad digest"))
        };
        let mut raw = Vec::with_capacity(rec.txs.len());
        let mut txs = Vec::with_capacity(rec.txs.len());
        for t in &rec.txs {
            let bytes = hex::decode(t).map_err(|_| bad("bad transaction hex"))?;
            txs.push(Transaction::from_bytes(&bytes).map_err(|_| bad("bad transaction encoding"))?);
            raw.push(bytes);
        }
        let prev_hash = digest(&rec.prev_hash)?;
        let stored = digest(&rec.block_hash)?;
        if block_hash(rec.height, &prev_hash, &raw) != stored {
            return Err(bad("block hash mismatch"));
        }
        Ok(Block {
            height: rec.height,
            prev_hash,
            txs,
            block_hash: stored,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct BlockRecord {
    height: u64,
    prev_hash: String,
    block_hash: String,
    txs: Vec<String>,
}
