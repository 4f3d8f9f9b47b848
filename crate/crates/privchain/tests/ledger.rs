mod common;

use std::fs;

use common::{rng, World};
use privchain::bank::{build_payment_blob, make_incentive_commitment, NegotiationRecord};
use privchain::identity::SigningKey;
use privchain::ledger::{
    verify_chain_file, CommodityStatus, Digest32, Ledger, LedgerConfig, LedgerError, PaymentStatus, ProductStatus,
    TradeReceipt, TxCreate, TxPaymentStatus, TxProduce, TxSold, TxTrade, REGION_NOT_VERIFIED,
    REGION_PROOF_NOT_PROVIDED,
};
use privchain::tradeflow::{encrypt_constituents, TradeFlowKey};
use privchain::zkrp::{LocationProof, NotVerified};
use privchain::{Commitment, Scalar};

fn data_hash(id: &str) -> Digest32 {
    let mut d = [0u8; 32];
    d[..id.len().min(32)].copy_from_slice(&id.as_bytes()[..id.len().min(32)]);
    d
}

fn create(l: &mut Ledger, id: &str, seller: &SigningKey, link: Option<Digest32>) -> Result<(), LedgerError> {
    l.submit_create(TxCreate::signed(id, data_hash(id), link, seller))
        .map(|_| ())
}

struct Trade<'a> {
    id: &'a str,
    seller: &'a SigningKey,
    buyer: &'a SigningKey,
    link: Option<Digest32>,
    proof: Option<&'a LocationProof>,
    incentive: Option<(Commitment, Vec<u8>)>,
}

impl<'a> Trade<'a> {
    fn plain(id: &'a str, seller: &'a SigningKey, buyer: &'a SigningKey) -> Self {
        Trade {
            id,
            seller,
            buyer,
            link: None,
            proof: None,
            incentive: None,
        }
    }

    fn with_proof(mut self, proof: &'a LocationProof) -> Self {
        self.link = Some(proof.link());
        self.proof = Some(proof);
        self
    }

    fn tx(&self) -> TxTrade {
        let (com, blob) = match &self.incentive {
            Some((c, b)) => (Some(*c), Some(b.clone())),
            None => (None, None),
        };
        let mut tx = TxTrade::new(
            self.id,
            data_hash(self.id),
            self.link,
            com,
            blob,
            self.seller.public(),
            self.buyer.public(),
        );
        tx.sign_seller(self.seller);
        tx.sign_buyer(self.buyer);
        tx
    }

    fn submit(&self, l: &mut Ledger) -> Result<TradeReceipt, LedgerError> {
        l.submit_trade(self.tx(), self.proof)
    }
}

fn incentive(w: &World, amount: u64, seed: u64) -> (Commitment, Vec<u8>) {
    let mut rng = rng(seed);
    let n = NegotiationRecord {
        amount,
        blinding: Scalar::random(&mut rng),
        seller_id: "seller".into(),
    };
    let com = make_incentive_commitment(w.pk.params(), &n).unwrap();
    (com, build_payment_blob(&n, &w.bank.encryption_public(), &mut rng))
}

fn produce_tx(w: &World, l: &Ledger, product: &str, ids: &[&str], maker: &SigningKey) -> TxProduce {
    let ids: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
    let snap = l.snapshot();
    let regions = ids
        .iter()
        .map(|id| snap.commodities.get(id).map(|c| c.region.clone()).unwrap_or_default())
        .collect();
    let blob = encrypt_constituents(w.key(), product, &ids, &mut rng(99)).unwrap();
    TxProduce::signed(product, blob, regions, maker)
}

/// Creates and trades `id` from seller to buyer with a valid Hill proof.
fn traded(w: &World, l: &mut Ledger, id: &str, seed: u64) {
    let proof = w.proof_in("Hill", 1, 2, seed);
    create(l, id, &w.seller, Some(proof.link())).unwrap();
    let r = Trade::plain(id, &w.seller, &w.buyer)
        .with_proof(&proof)
        .submit(l)
        .unwrap();
    assert_eq!(r.region, "Hill");
}

#[test]
fn create_rules() {
    let w = World::new(3);
    let mut l = w.ledger();
    create(&mut l, "g1", &w.seller, None).unwrap();
    assert_eq!(
        create(&mut l, "g1", &w.seller, None),
        Err(LedgerError::DuplicateCommodity("g1".into()))
    );
    assert_eq!(
        create(&mut l, "g2", &w.outsider, None),
        Err(LedgerError::UnknownParticipant)
    );
    assert_eq!(
        create(&mut l, "g2", &w.buyer, None),
        Err(LedgerError::UnknownParticipant)
    );
    let mut tx = TxCreate::signed("g3", data_hash("g3"), None, &w.seller);
    tx.commodity_id = "g4".into();
    assert_eq!(l.submit_create(tx).unwrap_err(), LedgerError::BadSignature);
    let rec = &l.snapshot().commodities["g1"];
    assert_eq!(rec.status, CommodityStatus::Created);
    assert_eq!(rec.region, "");
}

#[test]
fn trade_records_verified_region_and_transfers_ownership() {
    let w = World::new(3);
    let mut l = w.ledger();
    traded(&w, &mut l, "g1", 1);
    let rec = &l.snapshot().commodities["g1"];
    assert_eq!(rec.status, CommodityStatus::Traded);
    assert_eq!(rec.owner, w.buyer.public());
    assert_eq!(rec.region, "Hill");
}

#[test]
fn second_trade_is_rejected() {
    let w = World::new(3);
    let mut l = w.ledger();
    traded(&w, &mut l, "g1", 1);
    let again = Trade::plain("g1", &w.seller, &w.buyer).submit(&mut l);
    assert_eq!(again.unwrap_err(), LedgerError::AlreadyTraded("g1".into()));
    let onward = Trade::plain("g1", &w.buyer, &w.maker).submit(&mut l);
    assert_eq!(onward.unwrap_err(), LedgerError::AlreadyTraded("g1".into()));
}

#[test]
fn trade_error_cases() {
    let w = World::new(3);
    let mut l = w.ledger();
    assert_eq!(
        Trade::plain("nope", &w.seller, &w.buyer).submit(&mut l).unwrap_err(),
        LedgerError::UnknownCommodity("nope".into())
    );
    create(&mut l, "g1", &w.seller, None).unwrap();
    assert_eq!(
        Trade::plain("g1", &w.seller, &w.outsider).submit(&mut l).unwrap_err(),
        LedgerError::UnknownParticipant
    );
    assert_eq!(
        Trade::plain("g1", &w.other_seller, &w.buyer)
            .submit(&mut l)
            .unwrap_err(),
        LedgerError::NotOwner("g1".into())
    );
    let mut tx = Trade::plain("g1", &w.seller, &w.buyer).tx();
    tx.region = "Hill".into();
    assert_eq!(l.submit_trade(tx, None).unwrap_err(), LedgerError::RegionPreset);
    let mut tx = Trade::plain("g1", &w.seller, &w.buyer).tx();
    tx.buyer_signature = w.maker.sign(&tx.body_bytes());
    assert_eq!(l.submit_trade(tx, None).unwrap_err(), LedgerError::BadSignature);
    assert_eq!(l.snapshot().commodities["g1"].status, CommodityStatus::Created);
}

#[test]
fn missing_proof_is_recorded_not_rejected() {
    let w = World::new(3);
    let mut l = w.ledger();
    create(&mut l, "g1", &w.seller, None).unwrap();
    let r = Trade::plain("g1", &w.seller, &w.buyer).submit(&mut l).unwrap();
    assert_eq!(r.region, REGION_PROOF_NOT_PROVIDED);

    let proof = w.proof_in("Hill", 0, 0, 3);
    create(&mut l, "g2", &w.seller, Some(proof.link())).unwrap();
    let mut t = Trade::plain("g2", &w.seller, &w.buyer);
    t.link = Some(proof.link());
    assert_eq!(t.submit(&mut l).unwrap().region, REGION_PROOF_NOT_PROVIDED);
}

#[test]
fn invalid_proof_is_recorded_as_not_verified() {
    let w = World::new(3);
    let mut l = w.ledger();
    let mut proof = w.proof_in("Hill", 0, 0, 4);
    proof.lower_y.challenge = proof.lower_y.challenge + Scalar::from_u64(1);
    proof.resign(&w.seller);
    create(&mut l, "g1", &w.seller, Some(proof.link())).unwrap();
    let r = Trade::plain("g1", &w.seller, &w.buyer)
        .with_proof(&proof)
        .submit(&mut l)
        .unwrap();
    assert_eq!(r.region, REGION_NOT_VERIFIED);
    assert!(r.not_verified.is_some());
    assert_eq!(l.snapshot().commodities["g1"].status, CommodityStatus::Traded);
}

#[test]
fn proof_from_another_seller_or_other_bytes() {
    let w = World::new(3);
    let mut l = w.ledger();
    let mut foreign = w.proof_in("Hill", 0, 0, 5);
    foreign.resign(&w.other_seller);
    create(&mut l, "g1", &w.seller, None).unwrap();
    let r = Trade::plain("g1", &w.seller, &w.buyer)
        .with_proof(&foreign)
        .submit(&mut l)
        .unwrap();
    assert_eq!(r.not_verified, Some(NotVerified::SellerMismatch));

    let good = w.proof_in("Hill", 0, 0, 6);
    let decoy = w.proof_in("Hill", 0, 0, 7);
    create(&mut l, "g2", &w.seller, None).unwrap();
    let mut t = Trade::plain("g2", &w.seller, &w.buyer).with_proof(&good);
    t.proof = Some(&decoy);
    let r = t.submit(&mut l).unwrap();
    assert_eq!(r.not_verified, Some(NotVerified::LinkMismatch));
    assert_eq!(r.region, REGION_NOT_VERIFIED);
}

#[test]
fn payment_request_needs_verified_region_and_full_incentive() {
    let w = World::new(3);
    let proof = w.proof_in("Vale", 1, 1, 8);
    let mut bad = proof.clone();
    bad.upper_x.challenge = bad.upper_x.challenge + Scalar::from_u64(1);
    bad.resign(&w.seller);
    let (com, blob) = incentive(&w, 120, 3);
    // (valid proof, commitment, blob)
    for mask in 0..8u8 {
        let valid = mask & 1 != 0;
        let has_com = mask & 2 != 0;
        let has_blob = mask & 4 != 0;
        let mut l = w.ledger();
        create(&mut l, "g", &w.seller, None).unwrap();
        let p = if valid { &proof } else { &bad };
        let mut t = Trade::plain("g", &w.seller, &w.buyer).with_proof(p);
        let mut tx = t.tx();
        tx.incentive_commitment = has_com.then_some(com);
        tx.payment_blob = has_blob.then(|| blob.clone());
        tx.sign_seller(&w.seller);
        tx.sign_buyer(&w.buyer);
        t.incentive = None;
        let r = l.submit_trade(tx, t.proof).unwrap();
        let expect = valid && has_com && has_blob;
        assert_eq!(r.req_pay.is_some(), expect, "mask {mask}");
        assert_eq!(l.snapshot().payment_requests.len(), expect as usize);
        assert_eq!(l.drain_events().len(), expect as usize);
    }
}

#[test]
fn produce_rules() {
    let w = World::new(3);
    let mut l = w.ledger();
    traded(&w, &mut l, "a", 1);
    traded(&w, &mut l, "b", 2);
    create(&mut l, "fresh", &w.seller, None).unwrap();

    let tx = produce_tx(&w, &l, "p", &["a", "ghost"], &w.buyer);
    assert_eq!(
        l.submit_produce(tx).unwrap_err(),
        LedgerError::UnknownConstituent("ghost".into())
    );
    let tx = produce_tx(&w, &l, "p", &["a", "fresh"], &w.buyer);
    assert_eq!(
        l.submit_produce(tx).unwrap_err(),
        LedgerError::ConstituentNotTraded("fresh".into())
    );
    let tx = produce_tx(&w, &l, "p", &["a", "a"], &w.buyer);
    assert_eq!(
        l.submit_produce(tx).unwrap_err(),
        LedgerError::DuplicateConstituent("a".into())
    );
    let tx = produce_tx(&w, &l, "p", &["a", "b"], &w.maker);
    assert_eq!(l.submit_produce(tx).unwrap_err(), LedgerError::NotOwner("a".into()));
    let tx = produce_tx(&w, &l, "p", &["a"], &w.seller);
    assert_eq!(l.submit_produce(tx).unwrap_err(), LedgerError::UnknownParticipant);
    let mut tx = produce_tx(&w, &l, "p", &["a", "b"], &w.buyer);
    tx.regions = vec!["Vale".into(), "Hill".into()];
    let tx = TxProduce::signed("p", tx.constituents, tx.regions, &w.buyer);
    assert_eq!(l.submit_produce(tx).unwrap_err(), LedgerError::RegionMismatch);
    let foreign = TradeFlowKey::derive("k1", 8);
    let blob = encrypt_constituents(&foreign, "p", &["a".to_string()], &mut rng(1)).unwrap();
    let tx = TxProduce::signed("p", blob, vec!["Hill".into()], &w.buyer);
    assert_eq!(l.submit_produce(tx).unwrap_err(), LedgerError::ConstituentsUnreadable);

    let tx = produce_tx(&w, &l, "p", &["a", "b"], &w.buyer);
    l.submit_produce(tx).unwrap();
    let snap = l.snapshot();
    assert_eq!(snap.commodities["a"].status, CommodityStatus::Consumed);
    assert_eq!(snap.products["p"].regions, vec!["Hill", "Hill"]);

    let tx = produce_tx(&w, &l, "q", &["b"], &w.buyer);
    assert_eq!(
        l.submit_produce(tx).unwrap_err(),
        LedgerError::ConstituentConsumed("b".into())
    );
    let tx = produce_tx(&w, &l, "p", &["fresh"], &w.buyer);
    assert_eq!(
        l.submit_produce(tx).unwrap_err(),
        LedgerError::DuplicateProduct("p".into())
    );
}

#[test]
fn produce_without_ledger_key_skips_checks() {
    let w = World::new(3);
    let config = LedgerConfig {
        ledger_holds_key: false,
        ..LedgerConfig::default()
    };
    let mut l = Ledger::in_memory(w.context(), config);
    let blob = encrypt_constituents(w.key(), "p", &["ghost".to_string()], &mut rng(1)).unwrap();
    l.submit_produce(TxProduce::signed("p", blob, vec!["Hill".into()], &w.buyer))
        .unwrap();
    assert_eq!(l.consumer_query("p").unwrap().regions, vec!["Hill"]);
}

#[test]
fn sold_status() {
    let w = World::new(3);
    let mut l = w.ledger();
    traded(&w, &mut l, "a", 1);
    l.submit_produce(produce_tx(&w, &l, "p", &["a"], &w.buyer)).unwrap();
    assert_eq!(
        l.mark_sold(TxSold::signed("p", &w.maker)).unwrap_err(),
        LedgerError::NotOwner("p".into())
    );
    l.mark_sold(TxSold::signed("p", &w.buyer)).unwrap();
    assert_eq!(l.snapshot().products["p"].status, ProductStatus::Sold);
    assert_eq!(
        l.mark_sold(TxSold::signed("p", &w.buyer)).unwrap_err(),
        LedgerError::AlreadySold("p".into())
    );
    assert_eq!(
        l.mark_sold(TxSold::signed("x", &w.buyer)).unwrap_err(),
        LedgerError::UnknownProduct("x".into())
    );
}

#[test]
fn payment_status_rules() {
    let w = World::new(3);
    let mut l = w.ledger();
    let proof = w.proof_in("Hill", 0, 0, 9);
    create(&mut l, "g", &w.seller, None).unwrap();
    let mut t = Trade::plain("g", &w.seller, &w.buyer).with_proof(&proof);
    t.incentive = Some(incentive(&w, 50, 1));
    let id = t.submit(&mut l).unwrap().req_pay.unwrap().req_pay_id;
    let bank = w.bank.signing_key();

    assert_eq!(
        l.append_payment_status(TxPaymentStatus::signed([9; 32], PaymentStatus::Paid, bank))
            .unwrap_err(),
        LedgerError::UnknownReqPay
    );
    assert_eq!(
        l.append_payment_status(TxPaymentStatus::signed(id, PaymentStatus::Paid, &w.seller))
            .unwrap_err(),
        LedgerError::UnknownParticipant
    );
    l.append_payment_status(TxPaymentStatus::signed(id, PaymentStatus::Disputed, bank))
        .unwrap();
    l.append_payment_status(TxPaymentStatus::signed(id, PaymentStatus::Paid, bank))
        .unwrap();
    assert_eq!(
        l.append_payment_status(TxPaymentStatus::signed(id, PaymentStatus::Disputed, bank))
            .unwrap_err(),
        LedgerError::AlreadyFinalized
    );
    let rec = &l.snapshot().payment_requests[&id];
    assert_eq!(rec.status, Some(PaymentStatus::Paid));
    assert_eq!(rec.status_txs.len(), 2);
}

#[test]
fn query_reveals_regions_only() {
    let w = World::new(3);
    let mut l = w.ledger();
    traded(&w, &mut l, "grape-secret-1", 1);
    traded(&w, &mut l, "grape-secret-2", 2);
    l.submit_produce(produce_tx(&w, &l, "p", &["grape-secret-1", "grape-secret-2"], &w.buyer))
        .unwrap();
    let q = l.consumer_query("p").unwrap();
    assert_eq!(q.regions, vec!["Hill", "Hill"]);
    let bytes = q.to_bytes();
    assert_eq!(bytes, b"Hill\nHill\n");
    let text = String::from_utf8(bytes).unwrap();
    assert!(!text.contains("grape"));
    for key in [&w.seller, &w.buyer] {
        assert!(!text.contains(&key.public().to_hex()));
    }
    assert_eq!(
        l.consumer_query("x").unwrap_err(),
        LedgerError::UnknownProduct("x".into())
    );
}

/// Changes one hex digit inside the transactions of block line `line`.
fn flip_tx_byte(text: &str, line: usize) -> String {
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let l = &mut lines[line];
    let pos = l.find("\"txs\":[\"").expect("block has transactions") + 8 + 40;
    let c = if &l[pos..pos + 1] == "0" { "1" } else { "0" };
    l.replace_range(pos..pos + 1, c);
    lines.join("\n") + "\n"
}

#[test]
fn file_ledger_reloads_to_same_state_and_detects_tampering() {
    let w = World::new(3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.jsonl");
    for batch in [1, 2] {
        let _ = fs::remove_file(&path);
        let config = LedgerConfig {
            batch_size: batch,
            ..LedgerConfig::default()
        };
        let (state, blocks) = {
            let mut l = Ledger::open(&path, w.context(), config.clone()).unwrap();
            traded(&w, &mut l, "a", 1);
            traded(&w, &mut l, "b", 2);
            l.submit_produce(produce_tx(&w, &l, "p", &["a", "b"], &w.buyer))
                .unwrap();
            l.seal().unwrap();
            (l.snapshot(), l.blocks().to_vec())
        };
        let reloaded = Ledger::open(&path, w.context(), config.clone()).unwrap();
        assert_eq!(*reloaded.snapshot(), *state);
        assert_eq!(reloaded.blocks(), &blocks[..]);
        assert_eq!(verify_chain_file(&path).unwrap(), blocks.len());
        drop(reloaded);

        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, flip_tx_byte(&text, 1)).unwrap();
        assert!(verify_chain_file(&path).is_err());
        assert!(Ledger::open(&path, w.context(), config).is_err());
    }
}
