use std::collections::BTreeSet;

use flare_core::codec::FrameAddress;
use flare_core::fabric::{Fabric, Geometry, Placement};
use proptest::prelude::*;

const G: Geometry = Geometry {
    prr_count: 4,
    frames_per_prr: 64,
    frame_words: 4,
};

fn fabric() -> Fabric {
    Fabric::with_seeded_golden(G, 17).unwrap()
}

fn placements() -> Vec<Placement> {
    (0..G.prr_count)
        .flat_map(|p| {
            (0..8).map(move |u| Placement::new(format!("u{p}_{u}"), p, u * 8..=u * 8 + 7))
        })
        .collect()
}

// (prr, offset, frames, fill)
fn write_strategy() -> impl Strategy<Value = (u8, u32, usize, u32)> {
    (
        0u8..G.prr_count as u8,
        0u32..G.frames_per_prr as u32,
        1usize..12,
        any::<u32>(),
    )
}

fn frame_of(word_index: usize) -> (usize, usize) {
    let slot = word_index / G.frame_words;
    (slot / G.frames_per_prr, slot % G.frames_per_prr)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn writes_touch_only_reported_frames(writes in proptest::collection::vec(write_strategy(), 1..6)) {
        let mut f = fabric();
        for (prr, off, frames, fill) in writes {
            let before = f.live().to_vec();
            let payload: Vec<u32> = (0..frames * G.frame_words).map(|i| fill.wrapping_add(i as u32)).collect();
            let report = f.apply_frames(FrameAddress::new(prr, off), &payload).unwrap();
            let written: BTreeSet<_> = report.frames_written.iter().copied().collect();

            // Contiguous from the requested offset, clipped at the PRR end.
            let expect_n = frames.min(G.frames_per_prr - off as usize);
            prop_assert_eq!(report.frames_written.len(), expect_n);
            prop_assert_eq!(report.clipped, expect_n < frames);
            for (i, &(p, fr)) in report.frames_written.iter().enumerate() {
                prop_assert_eq!((p, fr), (prr as usize, off as usize + i));
            }
            for (i, (a, b)) in before.iter().zip(f.live()).enumerate() {
                if !written.contains(&frame_of(i)) {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn diff_empty_iff_placements_match_golden(writes in proptest::collection::vec(write_strategy(), 0..4)) {
        let mut f = fabric();
        for (prr, off, frames, fill) in writes {
            f.apply_frames(FrameAddress::new(prr, off), &vec![fill; frames * G.frame_words]).unwrap();
        }
        let ps = placements();
        let covered_equal = ps.iter().all(|p| {
            p.frame_range.clone().all(|fr| f.live_frame(p.prr_id, fr) == f.golden_frame(p.prr_id, fr))
        });
        prop_assert_eq!(f.diff_corrupted_units(&ps).is_empty(), covered_equal);

        // Per-unit agreement with a direct frame comparison.
        let hit: BTreeSet<String> = f.diff_corrupted_units(&ps).into_iter().map(|(u, _)| u).collect();
        for p in &ps {
            let differs = p.frame_range.clone().any(|fr| f.live_frame(p.prr_id, fr) != f.golden_frame(p.prr_id, fr));
            prop_assert_eq!(hit.contains(&p.unit_id), differs);
        }

        f.reset_to_golden();
        prop_assert!(f.is_pristine());
        prop_assert_eq!(f.live(), f.golden());
        prop_assert!(f.diff_corrupted_units(&ps).is_empty());
    }

    #[test]
    fn digests_are_deterministic_and_odd(writes in proptest::collection::vec(write_strategy(), 1..4)) {
        let mut a = fabric();
        let mut b = fabric();
        for &(prr, off, frames, fill) in &writes {
            let payload = vec![fill; frames * G.frame_words];
            a.apply_frames(FrameAddress::new(prr, off), &payload).unwrap();
            b.apply_frames(FrameAddress::new(prr, off), &payload).unwrap();
        }
        let da = a.diff_corrupted_units(&placements());
        prop_assert_eq!(&da, &b.diff_corrupted_units(&placements()));
        prop_assert!(da.iter().all(|(_, d)| d.0 & 1 == 1));
    }

    #[test]
    fn corruption_accumulates_without_reset(writes in proptest::collection::vec(write_strategy(), 1..8)) {
        let mut f = fabric();
        let ps = placements();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for (prr, off, frames, fill) in writes {
            // Never write golden contents back, so a hit unit stays hit.
            let payload: Vec<u32> = (0..frames * G.frame_words)
                .map(|i| {
                    let slot = (prr as usize * G.frames_per_prr + off as usize) * G.frame_words + i;
                    f.golden().get(slot).map_or(fill, |g| !g)
                })
                .collect();
            f.apply_frames(FrameAddress::new(prr, off), &payload).unwrap();
            let now: BTreeSet<String> = f.diff_corrupted_units(&ps).into_iter().map(|(u, _)| u).collect();
            prop_assert!(now.is_superset(&seen));
            seen = now;
        }
    }
}

#[test]
fn out_of_range_address_rejected() {
    let mut f = fabric();
    assert!(f.apply_frames(FrameAddress::new(4, 0), &[0; 4]).is_err());
    assert!(f.apply_frames(FrameAddress::new(0, 64), &[0; 4]).is_err());
    assert!(f.is_pristine());
}

#[test]
fn clones_share_golden_but_not_live() {
    let mut a = fabric();
    let b = a.clone();
    a.apply_frames(FrameAddress::new(1, 3), &[1, 2, 3, 4])
        .unwrap();
    assert!(b.is_pristine());
    assert!(!a.is_pristine());
    assert_eq!(a.golden(), b.golden());
}
