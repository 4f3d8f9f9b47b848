//! Scenario driver: configuration loading, a simulator holding every
//! participant's keys, and the script runner.
//!
//! Config file (TOML, paths relative to the config file):
//!
//! ```toml
//! regions = "regions.txt"
//! roster = "roster.txt"
//! keyring = "keyring.txt"
//! base = 10
//! digits = 7
//! batch = 1
//! seed = 42
//! ledger_holds_key = true
//! ```
//!
//! Script: one action per line, `#` starts a comment, a trailing
//! `expect-fail` marks an action that must be rejected.
//!
//! ```text
//! create <commodity> <seller> <device> <lat> <lon> [region=<name>]
//! trade <commodity> <buyer> [incentive=<n>] [buyer-incentive=<n>] [no-proof]
//! produce <product> <buyer> <commodity>...
//! query <product>
//! settle
//! repay <commodity> <amount>
//! audit <product>
//! sell <product> <holder>
//! ```
//!
//! Participant keys are derived from the seed and the participant name, so
//! the roster file must list the matching public keys (see
//! [`roster_for`]).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bank::{build_payment_blob, make_incentive_commitment, BankKeys, BankState, NegotiationRecord, Settlement};
use crate::geo::{geo_to_grid, GeoCoord, GridIndex, Region, RegionBounds, RegionRegistry};
use crate::group::Scalar;
use crate::identity::{PublicKey, Role, Roster, SigningKey};
use crate::ledger::{
    payment_signing_bytes, Digest32, Ledger, LedgerConfig, LedgerContext, ReqPay, TxCreate, TxProduce, TxSold, TxTrade,
};
use crate::tradeflow::{encrypt_constituents, Keyring};
use crate::zkrp::{prove_location, zkrp_setup, GpsDevice, LocationProof, ProvingKey};

/// Exit status of a scenario or CLI action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Rejected = 2,
    Config = 3,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ActionError {
    /// The protocol refused the action.
    Rejected(String),
    /// Bad configuration or input files.
    Config(String),
}

impl ActionError {
    pub fn exit(&self) -> Exit {
        match self {
            ActionError::Rejected(_) => Exit::Rejected,
            ActionError::Config(_) => Exit::Config,
        }
    }
}

impl fmt::Display for ActionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionError::Rejected(m) => write!(f, "rejected: {m}"),
            ActionError::Config(m) => write!(f, "configuration error: {m}"),
        }
    }
}

impl std::error::Error for ActionError {}

fn rejected(e: impl fmt::Display) -> ActionError {
    ActionError::Rejected(e.to_string())
}

fn config_err(file: &Path, line: Option<usize>, msg: impl fmt::Display) -> ActionError {
    match line {
        Some(l) => ActionError::Config(format!("{}:{l}: {msg}", file.display())),
        None => ActionError::Config(format!("{}: {msg}", file.display())),
    }
}

fn default_base() -> u32 {
    10
}
fn default_digits() -> u32 {
    7
}
fn default_batch() -> usize {
    1
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    regions: String,
    roster: String,
    keyring: String,
    #[serde(default = "default_base")]
    base: u32,
    #[serde(default = "default_digits")]
    digits: u32,
    #[serde(default = "default_batch")]
    batch: usize,
    seed: u64,
    #[serde(default = "default_true")]
    ledger_holds_key: bool,
}

/// Parsed scenario configuration with the referenced files loaded.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub regions_path: PathBuf,
    pub roster_path: PathBuf,
    pub keyring_path: PathBuf,
    pub base: u32,
    pub digits: u32,
    pub batch: usize,
    pub seed: u64,
    pub ledger_holds_key: bool,
    pub registry: RegionRegistry,
    pub roster: Roster,
    pub keyring: Keyring,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ActionError> {
        let text = fs::read_to_string(path).map_err(|e| config_err(path, None, e))?;
        let file: ConfigFile = toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| line_of(&text, s.start));
            config_err(path, line, e.message())
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &str| dir.join(p);
        let regions_path = resolve(&file.regions);
        let roster_path = resolve(&file.roster);
        let keyring_path = resolve(&file.keyring);
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| config_err(p, None, e));
        let registry = RegionRegistry::parse(&read(&regions_path)?).map_err(|e| match e {
            crate::geo::GeoError::Parse { line, msg } => config_err(&regions_path, Some(line), msg),
            other => config_err(&regions_path, None, other),
        })?;
        let roster = Roster::parse(&read(&roster_path)?).map_err(|e| match e {
            crate::identity::RosterError::Parse { line, msg } => config_err(&roster_path, Some(line), msg),
            other => config_err(&roster_path, None, other),
        })?;
        let keyring = Keyring::parse(&read(&keyring_path)?).map_err(|e| match e {
            crate::tradeflow::TradeFlowError::Keyring { line, msg } => config_err(&keyring_path, Some(line), msg),
            other => config_err(&keyring_path, None, other),
        })?;
        if keyring.first().is_none() {
            return Err(config_err(&keyring_path, None, "keyring is empty"));
        }
        if file.batch == 0 {
            return Err(config_err(path, None, "batch must be at least 1"));
        }
        Ok(ScenarioConfig {
            regions_path,
            roster_path,
            keyring_path,
            base: file.base,
            digits: file.digits,
            batch: file.batch,
            seed: file.seed,
            ledger_holds_key: file.ledger_holds_key,
            registry,
            roster,
            keyring,
        })
    }

    pub fn ledger_config(&self) -> LedgerConfig {
        LedgerConfig {
            batch_size: self.batch,
            ledger_holds_key: self.ledger_holds_key,
            durable: false,
        }
    }

    fn admin_seed(&self) -> Vec<u8> {
        format!("privchain-admin-{}", self.seed).into_bytes()
    }

    pub fn setup_keys(&self) -> Result<ProvingKey, ActionError> {
        zkrp_setup(self.base, self.digits, &self.admin_seed())
            .map(|(pk, _)| pk)
            .map_err(|e| ActionError::Config(e.to_string()))
    }
}

/// Signing key the simulator uses for a participant.
pub fn participant_key(seed: u64, name: &str, role: Role) -> SigningKey {
    match role {
        Role::Bank => BankKeys::derive(seed, name).signing_key().clone(),
        _ => SigningKey::derive(seed, name),
    }
}

/// Roster text for `(role, name)` pairs with keys derived from `seed`.
pub fn roster_for(seed: u64, members: &[(Role, &str)]) -> Result<String, ActionError> {
    let mut roster = Roster::new();
    for (role, name) in members {
        roster
            .register(name, *role, participant_key(seed, name, *role).public())
            .map_err(|e| ActionError::Config(e.to_string()))?;
    }
    Ok(roster.to_text())
}

/// Seller's side of every negotiation, kept for corrected payment requests.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct NegotiationBook {
    /// commodity -> (amount, blinding hex, seller id)
    entries: BTreeMap<String, (u64, String, String)>,
}

/// Persistent layout of a simulator home directory.
pub struct HomeLayout {
    pub root: PathBuf,
}

impl HomeLayout {
    pub fn new(root: &Path) -> Self {
        HomeLayout {
            root: root.to_path_buf(),
        }
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }
    pub fn proving_key(&self) -> PathBuf {
        self.root.join("zkrp.pk")
    }
    pub fn verification_key(&self) -> PathBuf {
        self.root.join("zkrp.vk")
    }
    pub fn ledger(&self) -> PathBuf {
        self.root.join("ledger.jsonl")
    }
    pub fn events(&self) -> PathBuf {
        self.root.join("events.log")
    }
    pub fn bank(&self) -> PathBuf {
        self.root.join("bank.json")
    }
    pub fn negotiations(&self) -> PathBuf {
        self.root.join("negotiations.json")
    }
    pub fn proofs(&self) -> PathBuf {
        self.root.join("proofs")
    }
}

/// Every participant of a scenario plus the ledger and the bank.
pub struct Simulator {
    pub config: ScenarioConfig,
    pub pk: ProvingKey,
    pub ledger: Ledger,
    pub bank: Option<BankState>,
    keys: BTreeMap<String, SigningKey>,
    proofs: BTreeMap<Digest32, LocationProof>,
    negotiations: NegotiationBook,
    rng: ChaCha20Rng,
    clock: u64,
    home: Option<HomeLayout>,
}

fn io_err(p: &Path, e: std::io::Error) -> ActionError {
    config_err(p, None, e)
}

impl Simulator {
    fn build(
        config: ScenarioConfig,
        pk: ProvingKey,
        ledger: Ledger,
        home: Option<HomeLayout>,
    ) -> Result<Self, ActionError> {
        let mut keys = BTreeMap::new();
        let mut bank = None;
        for p in config.roster.participants() {
            let key = participant_key(config.seed, &p.name, p.role);
            if key.public() != p.key {
                return Err(config_err(
                    &config.roster_path,
                    None,
                    format!("key of `{}` does not match the scenario seed", p.name),
                ));
            }
            if p.role == Role::Bank && bank.is_none() {
                bank = Some(BankState::new(BankKeys::derive(config.seed, &p.name)));
            }
            keys.insert(p.name.clone(), key);
        }
        let mut h = Sha256::new();
        h.update(b"privchain.simulator-rng.v1");
        h.update(config.seed.to_be_bytes());
        h.update((ledger.blocks().len() as u64).to_be_bytes());
        let rng = ChaCha20Rng::from_seed(h.finalize().into());
        let clock = ledger.blocks().len() as u64 * 1000;
        Ok(Simulator {
            config,
            pk,
            ledger,
            bank,
            keys,
            proofs: BTreeMap::new(),
            negotiations: NegotiationBook::default(),
            rng,
            clock,
            home,
        })
    }

    /// Fresh in-memory simulator.
    pub fn new(config: ScenarioConfig) -> Result<Self, ActionError> {
        let pk = config.setup_keys()?;
        let ctx = LedgerContext {
            vk: pk.vk.clone(),
            registry: config.registry.clone(),
            roster: config.roster.clone(),
            keyring: config.keyring.clone(),
        };
        let ledger = Ledger::in_memory(ctx, config.ledger_config());
        Self::build(config, pk, ledger, None)
    }

    /// Creates a home directory: copies the input files, writes the keys and
    /// the genesis block.
    pub fn setup_home(config_path: &Path, home: &Path) -> Result<(), ActionError> {
        let config = ScenarioConfig::load(config_path)?;
        let layout = HomeLayout::new(home);
        if layout.ledger().exists() {
            return Err(config_err(home, None, "already set up"));
        }
        fs::create_dir_all(layout.proofs()).map_err(|e| io_err(home, e))?;
        for (src, name) in [
            (&config.regions_path, "regions.txt"),
            (&config.roster_path, "roster.txt"),
            (&config.keyring_path, "keyring.txt"),
        ] {
            fs::copy(src, home.join(name)).map_err(|e| io_err(src, e))?;
        }
        let file = ConfigFile {
            regions: "regions.txt".into(),
            roster: "roster.txt".into(),
            keyring: "keyring.txt".into(),
            base: config.base,
            digits: config.digits,
            batch: config.batch,
            seed: config.seed,
            ledger_holds_key: config.ledger_holds_key,
        };
        let toml_text = toml::to_string(&file).map_err(|e| ActionError::Config(e.to_string()))?;
        fs::write(layout.config(), toml_text).map_err(|e| io_err(&layout.config(), e))?;
        let pk = config.setup_keys()?;
        fs::write(layout.proving_key(), pk.to_text()).map_err(|e| io_err(&layout.proving_key(), e))?;
        fs::write(layout.verification_key(), pk.vk.to_text()).map_err(|e| io_err(&layout.verification_key(), e))?;
        let sim = Self::open_home(home)?;
        sim.persist()
    }

    /// Reopens a home directory, replaying the ledger.
    pub fn open_home(home: &Path) -> Result<Self, ActionError> {
        let layout = HomeLayout::new(home);
        let config = ScenarioConfig::load(&layout.config())?;
        let pk_text = fs::read_to_string(layout.proving_key()).map_err(|e| io_err(&layout.proving_key(), e))?;
        let pk = ProvingKey::from_text(&pk_text).map_err(|e| config_err(&layout.proving_key(), None, e))?;
        let ctx = LedgerContext {
            vk: pk.vk.clone(),
            registry: config.registry.clone(),
            roster: config.roster.clone(),
            keyring: config.keyring.clone(),
        };
        let mut ledger = Ledger::open(&layout.ledger(), ctx, config.ledger_config())
            .map_err(|e| config_err(&layout.ledger(), None, e))?;
        ledger
            .set_event_log(&layout.events())
            .map_err(|e| config_err(&layout.events(), None, e))?;
        let mut sim = Self::build(config, pk, ledger, None)?;
        if layout.bank().exists() {
            let text = fs::read_to_string(layout.bank()).map_err(|e| io_err(&layout.bank(), e))?;
            sim.bank = Some(BankState::from_json(&text).map_err(|e| config_err(&layout.bank(), None, e))?);
        }
        if layout.negotiations().exists() {
            let text = fs::read_to_string(layout.negotiations()).map_err(|e| io_err(&layout.negotiations(), e))?;
            sim.negotiations = serde_json::from_str(&text).map_err(|e| config_err(&layout.negotiations(), None, e))?;
        }
        if let Ok(dir) = fs::read_dir(layout.proofs()) {
            for entry in dir.flatten() {
                let bytes = fs::read(entry.path()).map_err(|e| io_err(&entry.path(), e))?;
                let proof = LocationProof::from_bytes(&bytes).map_err(|e| config_err(&entry.path(), None, e))?;
                sim.proofs.insert(proof.link(), proof);
            }
        }
        sim.home = Some(layout);
        Ok(sim)
    }

    /// Seals pending transactions and writes bank and negotiation state.
    pub fn persist(&self) -> Result<(), ActionError> {
        let Some(layout) = &self.home else {
            return Ok(());
        };
        if let Some(bank) = &self.bank {
            fs::write(layout.bank(), bank.to_json()).map_err(|e| io_err(&layout.bank(), e))?;
        }
        let text = serde_json::to_string_pretty(&self.negotiations).expect("negotiations serialize");
        fs::write(layout.negotiations(), text).map_err(|e| io_err(&layout.negotiations(), e))
    }

    pub fn seal(&mut self) -> Result<(), ActionError> {
        self.ledger.seal().map_err(rejected)
    }

    fn key(&self, name: &str, role: Role) -> Result<&SigningKey, ActionError> {
        match self.config.roster.get(name) {
            Some(p) if p.role == role => Ok(&self.keys[name]),
            Some(p) => Err(rejected(format!(
                "`{name}` is a {}, not a {}",
                p.role.as_str(),
                role.as_str()
            ))),
            None => Err(rejected(format!("unknown participant `{name}`"))),
        }
    }

    fn any_key(&self, name: &str) -> Result<&SigningKey, ActionError> {
        self.keys
            .get(name)
            .ok_or_else(|| rejected(format!("unknown participant `{name}`")))
    }

    fn name_of(&self, key: &PublicKey) -> Option<String> {
        self.config.roster.lookup_key(key).map(|p| p.name.clone())
    }

    fn store_proof(&mut self, proof: LocationProof) -> Result<Digest32, ActionError> {
        let link = proof.link();
        if let Some(layout) = &self.home {
            let path = layout.proofs().join(format!("{}.pclp", hex::encode(link)));
            fs::write(&path, proof.to_bytes()).map_err(|e| io_err(&path, e))?;
        }
        self.proofs.insert(link, proof);
        Ok(link)
    }

    /// Proof for `idx`: against `claimed` if given, else the region
    /// containing the farm. A claimed region that does not contain the farm
    /// yields a proof over the smallest rectangle covering both, which the
    /// registry will not recognize.
    fn build_proof(
        &mut self,
        seller: &SigningKey,
        device: &GpsDevice,
        idx: GridIndex,
        claimed: Option<&str>,
    ) -> Result<Option<LocationProof>, ActionError> {
        let region = match claimed {
            Some(name) => {
                let r = self
                    .config
                    .registry
                    .get(name)
                    .ok_or_else(|| rejected(format!("unknown region `{name}`")))?
                    .clone();
                if r.contains(&idx) {
                    r
                } else if r.zone == idx.zone && r.hemisphere == idx.hemisphere {
                    Region::from_bounds(
                        name,
                        RegionBounds {
                            zone: r.zone,
                            hemisphere: r.hemisphere,
                            e10_lo: r.e10_lo.min(idx.e10),
                            e10_hi: r.e10_hi.max(idx.e10),
                            n10_lo: r.n10_lo.min(idx.n10),
                            n10_hi: r.n10_hi.max(idx.n10),
                        },
                    )
                } else {
                    Region::from_bounds(
                        name,
                        RegionBounds {
                            zone: idx.zone,
                            hemisphere: idx.hemisphere,
                            e10_lo: idx.e10,
                            e10_hi: idx.e10,
                            n10_lo: idx.n10,
                            n10_hi: idx.n10,
                        },
                    )
                }
            }
            None => match self.config.registry.locate(&idx) {
                Some(r) => r.clone(),
                None => return Ok(None),
            },
        };
        self.clock += 1;
        let reading = device.read(self.pk.params(), idx, self.clock, &mut self.rng);
        prove_location(&self.pk, &reading, &region, seller, &mut self.rng)
            .map(Some)
            .map_err(rejected)
    }

    pub fn create(
        &mut self,
        commodity: &str,
        seller: &str,
        device: &str,
        lat: f64,
        lon: f64,
        region: Option<&str>,
    ) -> Result<String, ActionError> {
        let seller_key = self.key(seller, Role::Producer)?.clone();
        let device = GpsDevice::new(device, self.key(device, Role::Device)?.clone());
        let idx = geo_to_grid(GeoCoord::new(lat, lon)).map_err(rejected)?;
        let proof = self.build_proof(&seller_key, &device, idx, region)?;
        let mut h = Sha256::new();
        h.update(b"privchain.commodity-data.v1");
        h.update(format!("{commodity}|{lat}|{lon}").as_bytes());
        let data_hash: Digest32 = h.finalize().into();
        let link = proof.as_ref().map(LocationProof::link);
        let tx = TxCreate::signed(commodity, data_hash, link, &seller_key);
        let receipt = self.ledger.submit_create(tx).map_err(rejected)?;
        if let Some(p) = proof {
            self.store_proof(p)?;
        }
        Ok(format!(
            "create {commodity} accepted tx={} height={} proof={}",
            short(&receipt.tx_id),
            receipt.height,
            link.map(|l| short(&l)).unwrap_or_else(|| "none".into())
        ))
    }

    pub fn trade(
        &mut self,
        commodity: &str,
        buyer: &str,
        incentive: Option<u64>,
        buyer_incentive: Option<u64>,
        with_proof: bool,
    ) -> Result<String, ActionError> {
        let snap = self.ledger.snapshot();
        let rec = snap
            .commodities
            .get(commodity)
            .ok_or_else(|| rejected(format!("unknown commodity `{commodity}`")))?;
        let seller_name = self
            .name_of(&rec.owner)
            .ok_or_else(|| rejected("owner is not a known participant"))?;
        let seller_key = self.any_key(&seller_name)?.clone();
        let buyer_key = self.any_key(buyer)?.clone();
        let mut data = Sha256::new();
        data.update(b"privchain.trade-data.v1");
        data.update(commodity.as_bytes());
        let data_hash: Digest32 = data.finalize().into();
        let proof = if with_proof {
            rec.proof_link.and_then(|l| self.proofs.get(&l).cloned())
        } else {
            None
        };
        let (com, blob) = match incentive {
            Some(amount) => {
                let bank = self
                    .bank
                    .as_ref()
                    .ok_or_else(|| ActionError::Config("no bank in roster".into()))?;
                let seller_side = NegotiationRecord {
                    amount,
                    blinding: Scalar::random(&mut self.rng),
                    seller_id: seller_name.clone(),
                };
                let com = make_incentive_commitment(self.pk.params(), &seller_side).map_err(rejected)?;
                let buyer_side = NegotiationRecord {
                    amount: buyer_incentive.unwrap_or(amount),
                    ..seller_side.clone()
                };
                let blob = build_payment_blob(&buyer_side, &bank.keys.encryption_public(), &mut self.rng);
                self.negotiations.entries.insert(
                    commodity.to_string(),
                    (
                        amount,
                        hex::encode(seller_side.blinding.to_bytes()),
                        seller_name.clone(),
                    ),
                );
                (Some(com), Some(blob))
            }
            None => (None, None),
        };
        let mut tx = TxTrade::new(
            commodity,
            data_hash,
            rec.proof_link,
            com,
            blob,
            seller_key.public(),
            buyer_key.public(),
        );
        tx.sign_seller(&seller_key);
        tx.sign_buyer(&buyer_key);
        let r = self.ledger.submit_trade(tx, proof.as_ref()).map_err(rejected)?;
        let reason = r.not_verified.map(|n| format!(" reason={n}")).unwrap_or_default();
        Ok(format!(
            "trade {commodity} accepted tx={} height={} region=\"{}\"{reason} reqpay={}",
            short(&r.receipt.tx_id),
            r.receipt.height,
            r.region,
            r.req_pay
                .as_ref()
                .map(|q| short(&q.req_pay_id))
                .unwrap_or_else(|| "none".into())
        ))
    }

    pub fn produce(&mut self, product: &str, buyer: &str, ids: &[String]) -> Result<String, ActionError> {
        let buyer_key = self.key(buyer, Role::Manufacturer)?.clone();
        let snap = self.ledger.snapshot();
        let regions: Vec<String> = ids
            .iter()
            .map(|id| snap.commodities.get(id).map(|c| c.region.clone()).unwrap_or_default())
            .collect();
        let key = self.config.keyring.first().expect("keyring checked at load").clone();
        let blob = encrypt_constituents(&key, product, ids, &mut self.rng).map_err(rejected)?;
        let tx = TxProduce::signed(product, blob, regions.clone(), &buyer_key);
        let receipt = self.ledger.submit_produce(tx).map_err(rejected)?;
        Ok(format!(
            "produce {product} accepted tx={} height={} constituents={} regions={}",
            short(&receipt.tx_id),
            receipt.height,
            ids.len(),
            regions.join(",")
        ))
    }

    /// Region names exactly as a consumer would see them.
    pub fn query(&self, product: &str) -> Result<Vec<String>, ActionError> {
        self.ledger.consumer_query(product).map(|q| q.regions).map_err(rejected)
    }

    pub fn settle_requests(&mut self, reqs: &[ReqPay]) -> Result<Vec<String>, ActionError> {
        let bank = self
            .bank
            .as_mut()
            .ok_or_else(|| ActionError::Config("no bank in roster".into()))?;
        let params = self.pk.vk.params.clone();
        let mut out = Vec::new();
        for req in reqs {
            let line = match bank.process(&params, req, &mut self.ledger) {
                Ok(Settlement::Paid { amount, seller_id }) => {
                    format!(
                        "settle {} paid amount={amount} seller={seller_id}",
                        short(&req.req_pay_id)
                    )
                }
                Ok(Settlement::Disputed { commodity_id, reason }) => format!(
                    "settle {} disputed commodity={commodity_id} reason={}",
                    short(&req.req_pay_id),
                    reason.as_str()
                ),
                Err(e) => format!("settle {} skipped: {e}", short(&req.req_pay_id)),
            };
            out.push(line);
        }
        Ok(out)
    }

    /// Settles every request queued by the ledger since the last call.
    pub fn settle(&mut self) -> Result<Vec<String>, ActionError> {
        let reqs = self.ledger.drain_events();
        self.settle_requests(&reqs)
    }

    /// Buyer re-submits a corrected payment request for a disputed trade,
    /// using the seller's negotiated amount and blinding.
    pub fn repay(&mut self, commodity: &str, amount: u64) -> Result<String, ActionError> {
        let snap = self.ledger.snapshot();
        let req = snap
            .payment_requests
            .values()
            .find(|r| r.commodity_id == commodity)
            .ok_or_else(|| rejected(format!("no payment request for `{commodity}`")))?
            .clone();
        let (_, blinding_hex, seller_id) = self
            .negotiations
            .entries
            .get(commodity)
            .ok_or_else(|| rejected(format!("no negotiation recorded for `{commodity}`")))?
            .clone();
        let blinding = hex::decode(&blinding_hex)
            .ok()
            .and_then(|b| Scalar::from_bytes(&b).ok())
            .ok_or_else(|| ActionError::Config("corrupt negotiation record".into()))?;
        let buyer_name = self
            .name_of(&req.buyer_pub)
            .ok_or_else(|| rejected("buyer is not a known participant"))?;
        let buyer_key = self.any_key(&buyer_name)?.clone();
        let bank_pub = self
            .bank
            .as_ref()
            .ok_or_else(|| ActionError::Config("no bank in roster".into()))?
            .keys
            .encryption_public();
        let n = NegotiationRecord {
            amount,
            blinding,
            seller_id,
        };
        let ciphertext = build_payment_blob(&n, &bank_pub, &mut self.rng);
        let buyer_signature = buyer_key.sign(&payment_signing_bytes(&req.req_pay_id, Some(&req.com_inc), &ciphertext));
        let reqpay = ReqPay {
            req_pay_id: req.req_pay_id,
            com_inc: req.com_inc,
            ciphertext,
            buyer_pub: req.buyer_pub,
            buyer_signature,
        };
        if let Some(layout) = &self.home {
            use std::io::Write;
            let mut f = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(layout.events())
                .map_err(|e| io_err(&layout.events(), e))?;
            writeln!(f, "{}", reqpay.to_line()).map_err(|e| io_err(&layout.events(), e))?;
        }
        let lines = self.settle_requests(&[reqpay])?;
        Ok(lines.join("\n"))
    }

    pub fn audit(&self, product: &str) -> Result<Vec<String>, ActionError> {
        let snap = self.ledger.snapshot();
        let rec = snap
            .products
            .get(product)
            .ok_or_else(|| rejected(format!("unknown product `{product}`")))?;
        let key = self
            .config
            .keyring
            .get(&rec.constituents.key_id)
            .ok_or_else(|| rejected(format!("no key `{}` in keyring", rec.constituents.key_id)))?;
        let tree = self.ledger.audit_trace(key, product).map_err(rejected)?;
        Ok(tree
            .branches
            .iter()
            .map(|b| {
                format!(
                    "audit {product} {} create={} trade={} region=\"{}\"",
                    b.commodity_id,
                    short(&b.create_tx),
                    b.trade_tx.map(|t| short(&t)).unwrap_or_else(|| "none".into()),
                    b.region
                )
            })
            .collect())
    }

    pub fn sell(&mut self, product: &str, holder: &str) -> Result<String, ActionError> {
        let key = self.any_key(holder)?.clone();
        let receipt = self.ledger.mark_sold(TxSold::signed(product, &key)).map_err(rejected)?;
        Ok(format!(
            "sell {product} accepted tx={} height={}",
            short(&receipt.tx_id),
            receipt.height
        ))
    }

    /// Runs one parsed action and returns its transcript lines.
    pub fn execute(&mut self, action: &Action) -> Result<Vec<String>, ActionError> {
        match action {
            Action::Create {
                commodity,
                seller,
                device,
                lat,
                lon,
                region,
            } => self
                .create(commodity, seller, device, *lat, *lon, region.as_deref())
                .map(|l| vec![l]),
            Action::Trade {
                commodity,
                buyer,
                incentive,
                buyer_incentive,
                with_proof,
            } => self
                .trade(commodity, buyer, *incentive, *buyer_incentive, *with_proof)
                .map(|l| vec![l]),
            Action::Produce { product, buyer, ids } => self.produce(product, buyer, ids).map(|l| vec![l]),
            Action::Query { product } => self
                .query(product)
                .map(|r| vec![format!("query {product}: {}", r.join(", "))]),
            Action::Settle => self.settle(),
            Action::Repay { commodity, amount } => self.repay(commodity, *amount).map(|l| vec![l]),
            Action::Audit { product } => self.audit(product),
            Action::Sell { product, holder } => self.sell(product, holder).map(|l| vec![l]),
        }
    }
}

fn short(d: &Digest32) -> String {
    hex::encode(&d[..6])
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Create {
        commodity: String,
        seller: String,
        device: String,
        lat: f64,
        lon: f64,
        region: Option<String>,
    },
    Trade {
        commodity: String,
        buyer: String,
        incentive: Option<u64>,
        buyer_incentive: Option<u64>,
        with_proof: bool,
    },
    Produce {
        product: String,
        buyer: String,
        ids: Vec<String>,
    },
    Query {
        product: String,
    },
    Settle,
    Repay {
        commodity: String,
        amount: u64,
    },
    Audit {
        product: String,
    },
    Sell {
        product: String,
        holder: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScriptLine {
    pub line: usize,
    pub text: String,
    pub action: Action,
    pub expect_fail: bool,
}

/// Parses a script; errors carry the 1-based line number.
pub fn parse_script(text: &str) -> Result<Vec<ScriptLine>, (usize, String)> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut words: Vec<&str> = line.split_whitespace().collect();
        let expect_fail = words.last() == Some(&"expect-fail");
        if expect_fail {
            words.pop();
        }
        let action = parse_action(&words).map_err(|m| (i + 1, m))?;
        out.push(ScriptLine {
            line: i + 1,
            text: words.join(" "),
            action,
            expect_fail,
        });
    }
    Ok(out)
}

/// Parses one action from its words (verb first).
pub fn parse_action(words: &[&str]) -> Result<Action, String> {
    let (verb, args) = words.split_first().ok_or("empty action")?;
    let (positional, options): (Vec<&str>, Vec<&str>) =
        args.iter().partition(|w| !w.contains('=') && **w != "no-proof");
    let mut opts: BTreeMap<&str, &str> = BTreeMap::new();
    let mut no_proof = false;
    for o in options {
        if o == "no-proof" {
            no_proof = true;
        } else {
            let (k, v) = o.split_once('=').expect("partitioned on '='");
            if opts.insert(k, v).is_some() {
                return Err(format!("option `{k}` given twice"));
            }
        }
    }
    let allow = |names: &[&str]| -> Result<(), String> {
        for k in opts.keys() {
            if !names.contains(k) {
                return Err(format!("unknown option `{k}` for `{verb}`"));
            }
        }
        if no_proof && *verb != "trade" {
            return Err(format!("`no-proof` is only valid for trade, not `{verb}`"));
        }
        Ok(())
    };
    let arity = |n: usize| -> Result<(), String> {
        if positional.len() == n {
            Ok(())
        } else {
            Err(format!("`{verb}` takes {n} arguments, got {}", positional.len()))
        }
    };
    let num = |s: &str, what: &str| -> Result<f64, String> { s.parse().map_err(|_| format!("bad {what} `{s}`")) };
    let amount = |s: &str| -> Result<u64, String> { s.parse().map_err(|_| format!("bad amount `{s}`")) };
    let s = |i: usize| positional[i].to_string();
    Ok(match *verb {
        "create" => {
            arity(5)?;
            allow(&["region"])?;
            Action::Create {
                commodity: s(0),
                seller: s(1),
                device: s(2),
                lat: num(positional[3], "latitude")?,
                lon: num(positional[4], "longitude")?,
                region: opts.get("region").map(|r| r.to_string()),
            }
        }
        "trade" => {
            arity(2)?;
            allow(&["incentive", "buyer-incentive"])?;
            let incentive = opts.get("incentive").map(|v| amount(v)).transpose()?;
            let buyer_incentive = opts.get("buyer-incentive").map(|v| amount(v)).transpose()?;
            if buyer_incentive.is_some() && incentive.is_none() {
                return Err("`buyer-incentive` needs `incentive`".into());
            }
            Action::Trade {
                commodity: s(0),
                buyer: s(1),
                incentive,
                buyer_incentive,
                with_proof: !no_proof,
            }
        }
        "produce" => {
            allow(&[])?;
            if positional.len() < 3 {
                return Err("`produce` takes a product, a buyer and at least one commodity".into());
            }
            Action::Produce {
                product: s(0),
                buyer: s(1),
                ids: positional[2..].iter().map(|x| x.to_string()).collect(),
            }
        }
        "query" => {
            arity(1)?;
            allow(&[])?;
            Action::Query { product: s(0) }
        }
        "settle" => {
            arity(0)?;
            allow(&[])?;
            Action::Settle
        }
        "repay" => {
            arity(2)?;
            allow(&[])?;
            Action::Repay {
                commodity: s(0),
                amount: amount(positional[1])?,
            }
        }
        "audit" => {
            arity(1)?;
            allow(&[])?;
            Action::Audit { product: s(0) }
        }
        "sell" => {
            arity(2)?;
            allow(&[])?;
            Action::Sell {
                product: s(0),
                holder: s(1),
            }
        }
        other => return Err(format!("unknown action `{other}`")),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioOutcome {
    pub exit: Exit,
    pub transcript: Vec<String>,
}

impl ScenarioOutcome {
    pub fn text(&self) -> String {
        self.transcript.iter().map(|l| format!("{l}\n")).collect()
    }
}

/// Runs `script` against a fresh simulator. Rejections of actions not marked
/// `expect-fail` (and successes of ones that are) make the exit status 2.
pub fn run_scenario(config: &ScenarioConfig, script_path: &Path, script: &str) -> ScenarioOutcome {
    let mut transcript = vec![format!(
        "# scenario seed={} base={} digits={} batch={}",
        config.seed, config.base, config.digits, config.batch
    )];
    let lines = match parse_script(script) {
        Ok(l) => l,
        Err((line, msg)) => {
            transcript.push(format!("error {}:{line}: {msg}", script_path.display()));
            return ScenarioOutcome {
                exit: Exit::Config,
                transcript,
            };
        }
    };
    let mut sim = match Simulator::new(config.clone()) {
        Ok(s) => s,
        Err(e) => {
            transcript.push(format!("error {e}"));
            return ScenarioOutcome {
                exit: Exit::Config,
                transcript,
            };
        }
    };
    let exit = run_lines(&mut sim, &lines, script_path, &mut transcript);
    ScenarioOutcome { exit, transcript }
}

/// Runs parsed lines against an existing simulator.
pub fn run_lines(sim: &mut Simulator, lines: &[ScriptLine], script_path: &Path, transcript: &mut Vec<String>) -> Exit {
    let mut exit = Exit::Success;
    for l in lines {
        match (sim.execute(&l.action), l.expect_fail) {
            (Ok(out), false) => transcript.extend(out),
            (Ok(out), true) => {
                transcript.extend(out);
                transcript.push(format!("{}: expected a rejection but the action succeeded", l.text));
                exit = Exit::Rejected;
            }
            (Err(ActionError::Rejected(m)), true) => transcript.push(format!("{} rejected as expected: {m}", l.text)),
            (Err(ActionError::Rejected(m)), false) => {
                transcript.push(format!("{} rejected: {m}", l.text));
                exit = Exit::Rejected;
            }
            (Err(ActionError::Config(m)), _) => {
                transcript.push(format!("error {}:{}: {m}", script_path.display(), l.line));
                return Exit::Config;
            }
        }
    }
    if let Err(e) = sim.seal() {
        transcript.push(format!("error sealing ledger: {e}"));
        return Exit::Rejected;
    }
    exit
}
