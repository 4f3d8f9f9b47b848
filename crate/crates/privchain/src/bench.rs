//! Benchmark harness for the protocol phases.
//!
//! Every phase except setup is timed over `trials` runs. Setup is a one-time
//! administrator cost and runs exactly once per report. Trades and produces
//! go through a file-backed ledger that fsyncs each block, so both the
//! measured and the baseline path pay the same commit cost.
//!
//! - trade-with-proof: fetch the proof from the off-chain store by its link,
//!   decode it, and submit the trade (the contract verifies it).
//! - trade-baseline: the same trade with no proof link.
//! - produce-with-encryption: read constituent regions, encrypt the ids,
//!   submit; the ledger opens the blob and checks the constituents.
//! - produce-baseline: read regions, submit with the ids in a plaintext
//!   blob; the ledger does not open it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::codec::Writer;
use crate::geo::{GridIndex, Region};
use crate::identity::{Role, SigningKey};
use crate::ledger::{Ledger, LedgerConfig, LedgerContext, TxCreate, TxProduce, TxTrade};
use crate::scenario::{participant_key, ActionError, ScenarioConfig};
use crate::tradeflow::{encrypt_constituents, ConstituentBlob};
use crate::zkrp::{prove_location, verify_location, zkrp_setup, GpsDevice, LocationProof};

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseStats {
    pub name: &'static str,
    pub trials: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

impl PhaseStats {
    fn from_samples(name: &'static str, samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        PhaseStats {
            name,
            trials: samples.len(),
            mean_ms: mean,
            stddev_ms: var.sqrt(),
        }
    }

    /// Coefficient of variation (stddev / mean).
    pub fn cv(&self) -> f64 {
        if self.mean_ms > 0.0 {
            self.stddev_ms / self.mean_ms
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub trials: usize,
    pub constituents: usize,
    pub setup_runs: usize,
    pub phases: Vec<PhaseStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl BenchReport {
    pub fn phase(&self, name: &str) -> &PhaseStats {
        self.phases
            .iter()
            .find(|p| p.name == name)
            .unwrap_or_else(|| panic!("phase {name} missing"))
    }

    pub fn trade_ratio(&self) -> f64 {
        self.phase("trade-with-proof").mean_ms / self.phase("trade-baseline").mean_ms
    }

    pub fn produce_ratio(&self) -> f64 {
        self.phase("produce-with-encryption").mean_ms / self.phase("produce-baseline").mean_ms
    }

    /// Orderings and bounds checked on means.
    pub fn checks(&self) -> Vec<BenchCheck> {
        let trade = self.trade_ratio();
        let produce = self.produce_ratio();
        let prove = self.phase("prove").mean_ms;
        let setup = self.phase("setup").mean_ms;
        vec![
            BenchCheck {
                name: "trade-with-proof exceeds trade-baseline",
                pass: trade > 1.0,
                detail: format!("ratio {trade:.2}"),
            },
            BenchCheck {
                name: "trade ratio within [1.5, 50]",
                pass: (1.5..=50.0).contains(&trade),
                detail: format!("ratio {trade:.2}"),
            },
            BenchCheck {
                name: "produce-with-encryption below 3x baseline",
                pass: produce < 3.0,
                detail: format!("ratio {produce:.2}"),
            },
            BenchCheck {
                name: "prove mean below 5 s",
                pass: prove < 5000.0,
                detail: format!("{prove:.1} ms"),
            },
            BenchCheck {
                name: "setup below 10 s",
                pass: setup < 10_000.0,
                detail: format!("{setup:.1} ms"),
            },
            BenchCheck {
                name: "setup ran once",
                pass: self.setup_runs == 1,
                detail: format!("{} runs", self.setup_runs),
            },
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "bench trials={} constituents={} setup_runs={}",
            self.trials, self.constituents, self.setup_runs
        );
        for p in &self.phases {
            let _ = writeln!(
                out,
                "phase {} trials={} mean_ms={:.3} stddev_ms={:.3} cv={:.3}",
                p.name,
                p.trials,
                p.mean_ms,
                p.stddev_ms,
                p.cv()
            );
        }
        let _ = writeln!(out, "ratio trade_with_proof/trade_baseline={:.2}", self.trade_ratio());
        let _ = writeln!(
            out,
            "ratio produce_with_encryption/produce_baseline={:.2}",
            self.produce_ratio()
        );
        for c in self.checks() {
            let _ = writeln!(
                out,
                "check {} {} ({})",
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        out
    }
}

fn first_with_role(config: &ScenarioConfig, role: Role) -> Result<SigningKey, ActionError> {
    config
        .roster
        .participants()
        .find(|p| p.role == role)
        .map(|p| participant_key(config.seed, &p.name, role))
        .ok_or_else(|| ActionError::Config(format!("roster has no {}", role.as_str())))
}

fn centre(region: &Region) -> GridIndex {
    GridIndex {
        zone: region.zone,
        hemisphere: region.hemisphere,
        e10: (region.e10_lo + region.e10_hi) / 2,
        n10: (region.n10_lo + region.n10_hi) / 2,
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1000.0
}

struct ScratchDir(PathBuf);

impl Drop for ScratchDir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn plaintext_blob(ids: &[String]) -> ConstituentBlob {
    let mut w = Writer::new();
    w.u32(ids.len() as u32);
    for id in ids {
        w.str(id);
    }
    ConstituentBlob {
        key_id: "plaintext".into(),
        nonce: [0; 12],
        ciphertext: w.finish(),
    }
}

/// Measures every phase. Ledger files go under `scratch` (removed after).
pub fn bench(config: &ScenarioConfig, trials: usize, scratch: &Path) -> Result<BenchReport, ActionError> {
    let trials = trials.max(10);
    let constituents = 3;
    let io = |e: std::io::Error| ActionError::Config(format!("{}: {e}", scratch.display()));
    fs::create_dir_all(scratch).map_err(io)?;
    let dir = ScratchDir(scratch.join(format!("bench-{}", std::process::id())));
    fs::create_dir_all(&dir.0).map_err(io)?;

    let region = config
        .registry
        .regions()
        .first()
        .ok_or_else(|| ActionError::Config("registry is empty".into()))?
        .clone();
    let seller = first_with_role(config, Role::Producer)?;
    let buyer = first_with_role(config, Role::Manufacturer)?;
    let device = GpsDevice::new("bench-device", first_with_role(config, Role::Device)?);
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);

    let t = Instant::now();
    let (pk, vk) = zkrp_setup(
        config.base,
        config.digits,
        format!("privchain-bench-{}", config.seed).as_bytes(),
    )
    .map_err(|e| ActionError::Config(e.to_string()))?;
    let setup = vec![ms(t)];

    let ctx = LedgerContext {
        vk: vk.clone(),
        registry: config.registry.clone(),
        roster: config.roster.clone(),
        keyring: config.keyring.clone(),
    };
    let key = config.keyring.first().expect("keyring checked at load").clone();
    let durable = |holds_key| LedgerConfig {
        batch_size: 1,
        ledger_holds_key: holds_key,
        durable: true,
    };
    let rej = |e: crate::ledger::LedgerError| ActionError::Rejected(e.to_string());
    let mut ledger = Ledger::open(&dir.0.join("with.jsonl"), ctx.clone(), durable(true)).map_err(rej)?;
    let mut base_ledger = Ledger::open(&dir.0.join("base.jsonl"), ctx.clone(), durable(false)).map_err(rej)?;

    let idx = centre(&region);
    let mut prove = Vec::new();
    let mut verify = Vec::new();
    let mut proof_files = Vec::new();
    for i in 0..trials {
        let reading = device.read(pk.params(), idx, i as u64, &mut rng);
        let t = Instant::now();
        let proof = prove_location(&pk, &reading, &region, &seller, &mut rng)
            .map_err(|e| ActionError::Rejected(e.to_string()))?;
        prove.push(ms(t));
        let t = Instant::now();
        let verdict = verify_location(&vk, &config.registry, &config.roster, &proof);
        verify.push(ms(t));
        if !verdict.is_verified() {
            return Err(ActionError::Rejected(format!("bench proof not verified: {verdict:?}")));
        }
        let path = dir.0.join(format!("proof-{i}.pclp"));
        fs::write(&path, proof.to_bytes()).map_err(io)?;
        proof_files.push((path, proof.link()));
    }

    let data_hash = [7u8; 32];
    let mut trade_with = Vec::new();
    let mut trade_base = Vec::new();
    for (i, (path, link)) in proof_files.iter().enumerate() {
        for (l, link) in [(&mut ledger, Some(*link)), (&mut base_ledger, None)] {
            for k in 0..constituents {
                let id = format!("c{i}-{k}");
                l.submit_create(TxCreate::signed(&id, data_hash, link, &seller))
                    .map_err(rej)?;
            }
        }
        for k in 0..constituents {
            let id = format!("c{i}-{k}");
            let t = Instant::now();
            let bytes = fs::read(path).map_err(io)?;
            let proof = LocationProof::from_bytes(&bytes).map_err(|e| ActionError::Rejected(e.to_string()))?;
            let mut tx = TxTrade::new(&id, data_hash, Some(*link), None, None, seller.public(), buyer.public());
            tx.sign_seller(&seller);
            tx.sign_buyer(&buyer);
            let r = ledger.submit_trade(tx, Some(&proof)).map_err(rej)?;
            let elapsed = ms(t);
            if r.region != region.name {
                return Err(ActionError::Rejected(format!("bench trade recorded `{}`", r.region)));
            }
            trade_with.push(elapsed);

            let t = Instant::now();
            let mut tx = TxTrade::new(&id, data_hash, None, None, None, seller.public(), buyer.public());
            tx.sign_seller(&seller);
            tx.sign_buyer(&buyer);
            base_ledger.submit_trade(tx, None).map_err(rej)?;
            trade_base.push(ms(t));
        }
    }

    let mut produce_with = Vec::new();
    let mut produce_base = Vec::new();
    for i in 0..trials {
        let ids: Vec<String> = (0..constituents).map(|k| format!("c{i}-{k}")).collect();
        let product = format!("p{i}");

        let t = Instant::now();
        let snap = ledger.snapshot();
        let regions: Vec<String> = ids.iter().map(|id| snap.commodities[id].region.clone()).collect();
        let blob =
            encrypt_constituents(&key, &product, &ids, &mut rng).map_err(|e| ActionError::Rejected(e.to_string()))?;
        ledger
            .submit_produce(TxProduce::signed(&product, blob, regions, &buyer))
            .map_err(rej)?;
        produce_with.push(ms(t));

        let t = Instant::now();
        let snap = base_ledger.snapshot();
        let regions: Vec<String> = ids.iter().map(|id| snap.commodities[id].region.clone()).collect();
        base_ledger
            .submit_produce(TxProduce::signed(&product, plaintext_blob(&ids), regions, &buyer))
            .map_err(rej)?;
        produce_base.push(ms(t));
    }

    Ok(BenchReport {
        trials,
        constituents,
        setup_runs: setup.len(),
        phases: vec![
            PhaseStats::from_samples("setup", &setup),
            PhaseStats::from_samples("prove", &prove),
            PhaseStats::from_samples("verify", &verify),
            PhaseStats::from_samples("trade-with-proof", &trade_with),
            PhaseStats::from_samples("trade-baseline", &trade_base),
            PhaseStats::from_samples("produce-with-encryption", &produce_with),
            PhaseStats::from_samples("produce-baseline", &produce_base),
        ],
    })
}
