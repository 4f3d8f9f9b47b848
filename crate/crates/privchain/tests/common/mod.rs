//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use privchain::bank::BankKeys;
use privchain::geo::{GridIndex, Hemisphere, Region, RegionRegistry};
use privchain::identity::{Role, Roster, SigningKey};
use privchain::ledger::{Ledger, LedgerConfig, LedgerContext};
use privchain::tradeflow::{Keyring, TradeFlowKey};
use privchain::zkrp::{prove_location, zkrp_setup, GpsDevice, LocationProof, ProvingKey};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn wine_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/wine")
}

/// A small world: keys, roster, one keyring entry and two registered regions.
pub struct World {
    pub pk: ProvingKey,
    pub registry: RegionRegistry,
    pub roster: Roster,
    pub keyring: Keyring,
    pub seller: SigningKey,
    pub other_seller: SigningKey,
    pub buyer: SigningKey,
    pub maker: SigningKey,
    pub outsider: SigningKey,
    pub device: GpsDevice,
    pub device_key: SigningKey,
    pub bank: BankKeys,
}

pub fn region(name: &str, e10_lo: i64, e10_hi: i64, n10_lo: i64, n10_hi: i64) -> Region {
    Region {
        name: name.to_string(),
        zone: 54,
        hemisphere: Hemisphere::South,
        e10_lo,
        e10_hi,
        n10_lo,
        n10_hi,
    }
}

impl World {
    pub fn new(digits: u32) -> Self {
        let (pk, _) = zkrp_setup(10, digits, b"test-admin").expect("setup");
        let registry = RegionRegistry::new(vec![
            region("Hill", 30000, 30040, 610000, 610040),
            region("Vale", 31000, 31009, 612000, 612009),
        ])
        .expect("registry");
        let seller = SigningKey::derive(7, "seller");
        let other_seller = SigningKey::derive(7, "other-seller");
        let buyer = SigningKey::derive(7, "buyer");
        let maker = SigningKey::derive(7, "maker");
        let outsider = SigningKey::derive(7, "outsider");
        let device_key = SigningKey::derive(7, "gps");
        let device = GpsDevice::new("gps", device_key.clone());
        let bank = BankKeys::derive(7, "bank");
        let mut roster = Roster::new();
        roster.register("seller", Role::Producer, seller.public()).unwrap();
        roster
            .register("other-seller", Role::Producer, other_seller.public())
            .unwrap();
        roster.register("buyer", Role::Manufacturer, buyer.public()).unwrap();
        roster.register("maker", Role::Manufacturer, maker.public()).unwrap();
        roster.register("gps", Role::Device, device.public()).unwrap();
        roster.register("bank", Role::Bank, bank.signing_public()).unwrap();
        World {
            pk,
            registry,
            roster,
            keyring: Keyring::new([TradeFlowKey::derive("k1", 7)]),
            seller,
            other_seller,
            buyer,
            maker,
            outsider,
            device,
            device_key,
            bank,
        }
    }

    pub fn context(&self) -> LedgerContext {
        LedgerContext {
            vk: self.pk.vk.clone(),
            registry: self.registry.clone(),
            roster: self.roster.clone(),
            keyring: self.keyring.clone(),
        }
    }

    pub fn ledger(&self) -> Ledger {
        Ledger::in_memory(self.context(), LedgerConfig::default())
    }

    pub fn key(&self) -> &TradeFlowKey {
        self.keyring.first().unwrap()
    }

    /// Honest proof for a farm at the given offset inside `region_name`.
    pub fn proof_in(&self, region_name: &str, de: i64, dn: i64, seed: u64) -> LocationProof {
        let r = self.registry.get(region_name).expect("region");
        let idx = GridIndex {
            zone: r.zone,
            hemisphere: r.hemisphere,
            e10: r.e10_lo + de,
            n10: r.n10_lo + dn,
        };
        let mut rng = rng(seed);
        let signed = self.device.read(self.pk.params(), idx, 1_700_000_000, &mut rng);
        prove_location(&self.pk, &signed, r, &self.seller, &mut rng).expect("honest proof")
    }
}

/// Random region in a random zone with sides of 1..=max_side cells and a
/// farm cell drawn uniformly inside it.
pub fn random_region<R: Rng>(rng: &mut R, name: &str, max_side: i64) -> (Region, GridIndex) {
    let w = rng.gen_range(1..=max_side);
    let h = rng.gen_range(1..=max_side);
    let zone = rng.gen_range(1..=60u8);
    let hemisphere = if rng.gen_bool(0.5) {
        Hemisphere::North
    } else {
        Hemisphere::South
    };
    let e10_lo = rng.gen_range(10_000..90_000 - w);
    let n10_lo = rng.gen_range(0..1_000_000 - h);
    let region = Region {
        name: name.to_string(),
        zone,
        hemisphere,
        e10_lo,
        e10_hi: e10_lo + w - 1,
        n10_lo,
        n10_hi: n10_lo + h - 1,
    };
    let farm = GridIndex {
        zone,
        hemisphere,
        e10: rng.gen_range(region.e10_lo..=region.e10_hi),
        n10: rng.gen_range(region.n10_lo..=region.n10_hi),
    };
    (region, farm)
}

/// Parses the geodesy reference corpus: `(lat, lon, zone, hemisphere, easting, northing)`.
pub fn utm_reference() -> Vec<(f64, f64, u8, Hemisphere, f64, f64)> {
    let text = include_str!("../data/utm_reference.csv");
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("lat"))
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let hemi = if f[3] == "N" {
                Hemisphere::North
            } else {
                Hemisphere::South
            };
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
                hemi,
                f[4].parse().unwrap(),
                f[5].parse().unwrap(),
            )
        })
        .collect()
}
