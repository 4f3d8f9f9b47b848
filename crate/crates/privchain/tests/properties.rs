mod common;

use std::sync::OnceLock;

use proptest::prelude::*;

use common::rng;
use privchain::geo::{geo_to_grid, utm_zone, wgs84_to_utm, GeoCoord};
use privchain::tradeflow::{decrypt_constituents, encrypt_constituents, ConstituentBlob, TradeFlowKey};
use privchain::zkrp::{
    decompose, digits_for, prove_interval, recompose, verify_interval, zkrp_setup, ProvingKey, VerificationKey,
};
use privchain::Scalar;

fn keys() -> &'static (ProvingKey, VerificationKey) {
    static KEYS: OnceLock<(ProvingKey, VerificationKey)> = OnceLock::new();
    KEYS.get_or_init(|| zkrp_setup(10, 2, b"properties").unwrap())
}

proptest! {
    #[test]
    fn decompose_then_recompose(base in 2u32..=16, digits in 1u32..=8, seed in any::<u64>()) {
        let cap = (base as u128).pow(digits);
        let delta = (seed as u128 % cap) as i64;
        let d = decompose(delta, base, digits).unwrap();
        prop_assert_eq!(d.len(), digits as usize);
        prop_assert!(d.iter().all(|&x| x < base));
        prop_assert_eq!(recompose(&d, base), delta as u128);
        prop_assert!(decompose(cap as i64, base, digits).is_err());
    }

    #[test]
    fn digit_count_is_minimal(span in 1u64..=1_000_000_000, base in 2u32..=16) {
        let l = digits_for(span, base);
        prop_assert!((base as u128).pow(l) >= span as u128);
        if l > 1 {
            prop_assert!(((base as u128).pow(l - 1)) < span as u128);
        }
    }

    #[test]
    fn constituent_round_trip(
        ids in prop::collection::vec("[a-z0-9-]{1,12}", 1..8),
        product in "[a-z0-9-]{1,12}",
        seed in any::<u64>(),
    ) {
        let key = TradeFlowKey::derive("k", 11);
        let blob = encrypt_constituents(&key, &product, &ids, &mut rng(seed)).unwrap();
        let back = ConstituentBlob::from_bytes(&blob.to_bytes()).unwrap();
        prop_assert_eq!(&back, &blob);
        prop_assert_eq!(decrypt_constituents(&key, &back, &product).unwrap(), ids);
    }

    #[test]
    fn projection_stays_in_its_zone(lat in -80.0f64..84.0, lon in -180.0f64..180.0) {
        let utm = wgs84_to_utm(GeoCoord::new(lat, lon)).unwrap();
        prop_assert_eq!(utm.zone, utm_zone(lon));
        prop_assert!((100_000.0..900_000.0).contains(&utm.easting), "easting {}", utm.easting);
        prop_assert!((0.0..10_000_000.0).contains(&utm.northing), "northing {}", utm.northing);
        let idx = geo_to_grid(GeoCoord::new(lat, lon)).unwrap();
        let (e0, e1, n0, n1) = idx.cell_box();
        prop_assert!(e0 <= utm.easting && utm.easting < e1);
        prop_assert!(n0 <= utm.northing && utm.northing < n1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn interval_proof_is_exact(lo in -500i64..500, width in 0i64..100, pick in 0i64..100, seed in any::<u64>()) {
        let (pk, vk) = keys();
        let hi = lo + width;
        let delta = lo + pick % (width + 1);
        let mut rng = rng(seed);
        let r = Scalar::random(&mut rng);
        let com = privchain::commit(pk.params(), &Scalar::from_i64(delta), &r);
        let proof = prove_interval(pk, delta, &r, lo, hi, &mut rng).unwrap();
        prop_assert!(verify_interval(vk, &com, lo, hi, &proof));
        prop_assert!(!verify_interval(vk, &com, lo + 1, hi + 1, &proof));
        prop_assert!(prove_interval(pk, hi + 1, &r, lo, hi, &mut rng).is_err());
        prop_assert!(prove_interval(pk, lo - 1, &r, lo, hi, &mut rng).is_err());
    }
}
