mod common;

use common::{rng, World};
use privchain::bank::{
    build_payment_blob, make_incentive_commitment, BankError, BankKeys, BankState, DisputeReason, NegotiationRecord,
    Settlement, MAX_AMOUNT,
};
use privchain::identity::SigningKey;
use privchain::ledger::{payment_signing_bytes, Ledger, PaymentStatus, ReqPay, TxCreate, TxTrade};
use privchain::Scalar;

struct Setup {
    w: World,
    ledger: Ledger,
    bank: BankState,
}

impl Setup {
    fn new() -> Self {
        let w = World::new(3);
        let ledger = w.ledger();
        let bank = BankState::new(w.bank.clone());
        Setup { w, ledger, bank }
    }

    /// Trades `id` with a verified proof; the seller commits to
    /// `seller_amount` and the buyer encrypts `buyer_amount` for the bank.
    fn trade(&mut self, id: &str, seller_amount: u64, buyer_amount: u64, seed: u64) -> ReqPay {
        let w = &self.w;
        let mut rng = rng(seed);
        let blinding = Scalar::random(&mut rng);
        let agreed = |amount| NegotiationRecord {
            amount,
            blinding,
            seller_id: "seller".into(),
        };
        let com = make_incentive_commitment(w.pk.params(), &agreed(seller_amount)).unwrap();
        let blob = build_payment_blob(&agreed(buyer_amount), &w.bank.encryption_public(), &mut rng);
        let proof = w.proof_in("Vale", 2, 2, seed);
        self.ledger
            .submit_create(TxCreate::signed(id, [1; 32], Some(proof.link()), &w.seller))
            .unwrap();
        let mut tx = TxTrade::new(
            id,
            [1; 32],
            Some(proof.link()),
            Some(com),
            Some(blob),
            w.seller.public(),
            w.buyer.public(),
        );
        tx.sign_seller(&w.seller);
        tx.sign_buyer(&w.buyer);
        let r = self.ledger.submit_trade(tx, Some(&proof)).unwrap();
        assert_eq!(r.region, "Vale");
        r.req_pay.expect("payment request")
    }

    fn process(&mut self, req: &ReqPay) -> Result<Settlement, BankError> {
        let params = self.w.pk.params().clone();
        self.bank.process(&params, req, &mut self.ledger)
    }

    fn status(&self, req: &ReqPay) -> Option<PaymentStatus> {
        self.ledger.snapshot().payment_requests[&req.req_pay_id].status
    }
}

fn resign(req: &mut ReqPay, buyer: &SigningKey) {
    req.buyer_signature = buyer.sign(&payment_signing_bytes(
        &req.req_pay_id,
        Some(&req.com_inc),
        &req.ciphertext,
    ));
}

#[test]
fn matching_values_are_paid() {
    let mut s = Setup::new();
    let req = s.trade("g", 500, 500, 1);
    assert_eq!(
        s.process(&req).unwrap(),
        Settlement::Paid {
            amount: 500,
            seller_id: "seller".into()
        }
    );
    assert_eq!(s.bank.balance("seller"), 500);
    assert_eq!(s.status(&req), Some(PaymentStatus::Paid));
}

#[test]
fn buyer_underpaying_is_disputed() {
    let mut s = Setup::new();
    let req = s.trade("g", 500, 490, 2);
    assert_eq!(
        s.process(&req).unwrap(),
        Settlement::Disputed {
            commodity_id: "g".into(),
            reason: DisputeReason::CommitmentMismatch
        }
    );
    assert_eq!(s.bank.balance("seller"), 0);
    assert_eq!(s.status(&req), Some(PaymentStatus::Disputed));
    assert_eq!(s.bank.dispute_counts()["g"], 1);
}

#[test]
fn seller_overclaiming_is_disputed() {
    let mut s = Setup::new();
    let req = s.trade("g", 510, 500, 3);
    assert!(matches!(
        s.process(&req).unwrap(),
        Settlement::Disputed {
            reason: DisputeReason::CommitmentMismatch,
            ..
        }
    ));
    assert_eq!(s.bank.total_credited(), 0);
}

#[test]
fn replay_is_refused() {
    let mut s = Setup::new();
    let req = s.trade("g", 40, 40, 4);
    s.process(&req).unwrap();
    assert_eq!(s.process(&req).unwrap_err(), BankError::AlreadySettled);
    assert_eq!(s.bank.balance("seller"), 40);
    assert_eq!(s.bank.payments.len(), 1);
}

#[test]
fn dispute_then_corrected_request_pays_once() {
    let mut s = Setup::new();
    let mut rng = rng(5);
    let req = s.trade("g", 300, 250, 5);
    s.process(&req).unwrap();
    assert_eq!(s.process(&req).unwrap_err(), BankError::AlreadySettled);

    // Same seed as the trade, so the same negotiated blinding.
    let mut seed_rng = common::rng(5);
    let blinding = Scalar::random(&mut seed_rng);
    let n = NegotiationRecord {
        amount: 300,
        blinding,
        seller_id: "seller".into(),
    };
    let mut fixed = req.clone();
    fixed.ciphertext = build_payment_blob(&n, &s.w.bank.encryption_public(), &mut rng);
    resign(&mut fixed, &s.w.buyer);
    assert!(matches!(
        s.process(&fixed).unwrap(),
        Settlement::Paid { amount: 300, .. }
    ));
    assert_eq!(s.status(&req), Some(PaymentStatus::Paid));
    assert_eq!(s.process(&fixed).unwrap_err(), BankError::AlreadySettled);
    assert_eq!(s.bank.balance("seller"), 300);
}

#[test]
fn envelope_for_another_bank_is_a_decrypt_failure() {
    let mut s = Setup::new();
    let mut req = s.trade("g", 70, 70, 6);
    let other = BankKeys::derive(99, "other-bank");
    let n = NegotiationRecord {
        amount: 70,
        blinding: Scalar::from_u64(1),
        seller_id: "seller".into(),
    };
    req.ciphertext = build_payment_blob(&n, &other.encryption_public(), &mut rng(6));
    resign(&mut req, &s.w.buyer);
    assert!(matches!(
        s.process(&req).unwrap(),
        Settlement::Disputed {
            reason: DisputeReason::DecryptFailure,
            ..
        }
    ));
}

#[test]
fn tampered_request_fails_signature() {
    let mut s = Setup::new();
    let mut req = s.trade("g", 70, 70, 7);
    let last = req.ciphertext.len() - 1;
    req.ciphertext[last] ^= 1;
    assert_eq!(s.process(&req).unwrap_err(), BankError::BadSignature);
    assert_eq!(s.status(&req), None);

    let mut forged = s.trade("h", 70, 70, 8);
    resign(&mut forged, &s.w.maker);
    forged.buyer_pub = s.w.maker.public();
    assert_eq!(s.process(&forged).unwrap_err(), BankError::BadSignature);
}

#[test]
fn commitment_differing_from_ledger_is_disputed() {
    let mut s = Setup::new();
    let mut req = s.trade("g", 70, 70, 9);
    req.com_inc = make_incentive_commitment(
        s.w.pk.params(),
        &NegotiationRecord {
            amount: 70,
            blinding: Scalar::from_u64(5),
            seller_id: "seller".into(),
        },
    )
    .unwrap();
    resign(&mut req, &s.w.buyer);
    assert!(matches!(
        s.process(&req).unwrap(),
        Settlement::Disputed {
            reason: DisputeReason::LedgerMismatch,
            ..
        }
    ));
}

#[test]
fn unknown_request_is_refused() {
    let mut s = Setup::new();
    let mut req = s.trade("g", 70, 70, 10);
    req.req_pay_id = [3; 32];
    resign(&mut req, &s.w.buyer);
    assert_eq!(s.process(&req).unwrap_err(), BankError::UnknownReqPay);
}

#[test]
fn amounts_must_stay_below_bound() {
    let w = World::new(1);
    let n = NegotiationRecord {
        amount: MAX_AMOUNT,
        blinding: Scalar::from_u64(1),
        seller_id: "s".into(),
    };
    assert_eq!(
        make_incentive_commitment(w.pk.params(), &n).unwrap_err(),
        BankError::AmountTooLarge(MAX_AMOUNT)
    );
}

#[test]
fn state_survives_json_round_trip() {
    let mut s = Setup::new();
    let a = s.trade("a", 11, 11, 11);
    let b = s.trade("b", 12, 13, 12);
    s.process(&a).unwrap();
    s.process(&b).unwrap();
    let mut back = BankState::from_json(&s.bank.to_json()).unwrap();
    assert_eq!(back.balances, s.bank.balances);
    assert_eq!(back.payments, s.bank.payments);
    assert_eq!(back.disputes, s.bank.disputes);
    let params = s.w.pk.params().clone();
    assert_eq!(
        back.process(&params, &a, &mut s.ledger).unwrap_err(),
        BankError::AlreadySettled
    );
}

#[test]
fn credited_total_equals_sum_of_paid_amounts() {
    let mut s = Setup::new();
    let mut paid = 0u128;
    for i in 0..12u64 {
        let amount = 100 + i * 7;
        let buyer_amount = if i % 3 == 0 { amount + 1 } else { amount };
        let req = s.trade(&format!("g{i}"), amount, buyer_amount, 100 + i);
        if let Settlement::Paid { amount, .. } = s.process(&req).unwrap() {
            paid += amount as u128;
        }
    }
    assert_eq!(s.bank.total_credited(), paid);
    assert_eq!(s.bank.payments.len(), 8);
    assert_eq!(s.bank.disputes.len(), 4);
}
