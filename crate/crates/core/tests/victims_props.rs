use std::collections::BTreeSet;

use flare_core::fabric::DeltaDigest;
use flare_core::fabric::Placement;
use flare_core::victims::{
    adder_unit_id, evaluate_adders, evaluate_aes, priority_encode, AdderLayout, AdderScenario,
    AesScenario, AES_DEFAULT_KEY, AES_DEFAULT_PLAINTEXT,
};
use proptest::prelude::*;

fn adders() -> AdderScenario {
    AdderScenario::from_layout(AdderLayout::default()).unwrap()
}

fn aes() -> AesScenario {
    AesScenario::new(
        AES_DEFAULT_KEY,
        AES_DEFAULT_PLAINTEXT,
        Placement::new("x", 0, 0..=511),
        Placement::new("y", 3, 0..=511),
    )
}

// Lowest set index + 1, or 0.
fn encode_oracle(flags: &[bool]) -> u32 {
    flags.iter().position(|&f| f).map_or(0, |i| i as u32 + 1)
}

fn corrupted_strategy() -> impl Strategy<Value = Vec<(usize, usize, u32)>> {
    proptest::collection::vec((1usize..=2, 0usize..500, any::<u32>()), 0..6)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2_000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn flags_are_sound(hits in corrupted_strategy()) {
        let s = adders();
        let corrupted: Vec<(String, DeltaDigest)> = hits
            .iter()
            .map(|&(c, i, d)| (adder_unit_id(c, i), DeltaDigest(d | 1)))
            .collect();
        let ids: BTreeSet<&str> = corrupted.iter().map(|(u, _)| u.as_str()).collect();
        let ev = evaluate_adders(&s, &corrupted);
        for i in 0..500 {
            prop_assert_eq!(ev.flag1[i], ids.contains(adder_unit_id(1, i).as_str()));
            prop_assert_eq!(ev.flag2[i], ids.contains(adder_unit_id(2, i).as_str()));
        }
        prop_assert_eq!(u32::from(ev.flt_sig.cluster1()), encode_oracle(&ev.flag1));
        prop_assert_eq!(u32::from(ev.flt_sig.cluster2()), encode_oracle(&ev.flag2));
        prop_assert_eq!(ev.flt_sig.0, encode_oracle(&ev.flag1) | (encode_oracle(&ev.flag2) << 10));
    }

    #[test]
    fn priority_encoder_matches_oracle(flags in proptest::collection::vec(any::<bool>(), 0..600)) {
        prop_assert_eq!(u32::from(priority_encode(&flags)), encode_oracle(&flags));
    }

    #[test]
    fn aes_flt_sig_range(d1 in proptest::option::of(any::<u32>()), d2 in proptest::option::of(any::<u32>())) {
        let s = aes();
        let mut corrupted = Vec::new();
        if let Some(d) = d1 { corrupted.push(("aes1".to_string(), DeltaDigest(d | 1))); }
        if let Some(d) = d2 { corrupted.push(("aes2".to_string(), DeltaDigest(d | 1))); }
        let ev = evaluate_aes(&s, &corrupted);
        prop_assert!(ev.flt_sig.0 <= 3);
        prop_assert_eq!(ev.flt_sig.0, u32::from(d1.is_some()) + 2 * u32::from(d2.is_some()));
        prop_assert_eq!(ev.ciphertexts[0] != s.expected_ct, d1.is_some());
        prop_assert_eq!(ev.ciphertexts[1] != s.expected_ct, d2.is_some());
    }
}

#[test]
fn fault_free_identity() {
    let s = adders();
    let ev = evaluate_adders(&s, &[]);
    assert_eq!(ev.flt_sig.0, 0);
    assert!(ev.flag1.iter().chain(&ev.flag2).all(|f| !f));

    let a = aes();
    let ev = evaluate_aes(&a, &[]);
    assert_eq!(ev.flt_sig.0, 0);
    assert_eq!(ev.ciphertexts, [a.expected_ct; 2]);
}

#[test]
fn adder_operands() {
    let s = adders();
    assert_eq!(s.n, 500);
    for i in [0usize, 1, 250, 499] {
        let (a, b) = s.inputs[i];
        assert_eq!((a, b), (i as u16, (2 * i + 1) as u16));
        assert_eq!(s.expected_sum(i), 3 * i as u32 + 1);
    }
}

#[test]
fn every_unit_has_a_disjoint_placement() {
    let s = adders();
    let ps = s.placements();
    assert_eq!(ps.len(), 1002);
    for prr in [0, 3] {
        let mut frames: Vec<usize> = ps
            .iter()
            .filter(|p| p.prr_id == prr)
            .flat_map(|p| p.frame_range.clone())
            .collect();
        let n = frames.len();
        frames.sort_unstable();
        frames.dedup();
        assert_eq!(frames.len(), n);
    }
}
