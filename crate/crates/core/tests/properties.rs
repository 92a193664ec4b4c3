use proptest::prelude::*;

use coldsim::bitmap::SlotBitmap;
use coldsim::heap::{ObjectId, ObjectKind, Region, RegionId, RegionState};
use coldsim::policy::{select_to_pin, update_mma, PinAction, PolicyConfig, Strategy as PinStrategy};
use coldsim::trace::{format_event, parse_event};
use coldsim::workload::TraceEvent;

const REGION: u32 = 65536;

fn bitmap(bits: &[bool]) -> SlotBitmap {
    let mut m = SlotBitmap::new(bits.len());
    for (i, b) in bits.iter().enumerate() {
        if *b {
            m.set(i);
        }
    }
    m
}

fn candidate(id: u32, fill: u32, mma: f64, refs: u64, sum_refs: u64) -> Region {
    let mut r = Region::synthetic(RegionId(id), REGION, RegionState::Unpinned, fill);
    r.mma = mma;
    r.refs = refs;
    r.sum_refs = sum_refs;
    r.census.m_collectible = REGION as u64 / 10;
    r
}

fn candidates() -> impl Strategy<Value = Vec<Region>> {
    prop::collection::vec((49152u32..=REGION, 0.0f64..500.0, 0u64..500, 0u64..200_000), 0..24).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (fill, mma, refs, sum))| candidate(i as u32, fill, mma, refs, sum))
            .collect()
    })
}

fn strategies() -> impl Strategy<Value = PinStrategy> {
    prop_oneof![
        Just(PinStrategy::None),
        Just(PinStrategy::Selective),
        Just(PinStrategy::Unselective),
    ]
}

proptest! {
    #[test]
    fn difference_is_slotwise(pairs in prop::collection::vec(any::<(bool, bool)>(), 0..700)) {
        let a = bitmap(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        let b = bitmap(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
        let d = a.difference(&b);
        prop_assert_eq!(d.len(), pairs.len());
        for (i, (x, y)) in pairs.iter().enumerate() {
            prop_assert_eq!(d.get(i), *x && !*y);
        }
        prop_assert_eq!(d.count_ones(), pairs.iter().filter(|(x, y)| *x && !*y).count());
        prop_assert!(d.is_subset_of(&a));
        prop_assert_eq!(a.is_subset_of(&b), pairs.iter().all(|(x, y)| !*x || *y));
    }

    #[test]
    fn mma_contracts_towards_r(prev in 0.0f64..1e9, r in 0u64..1_000_000_000) {
        let next = update_mma(prev, r);
        let before = (prev - r as f64).abs();
        let after = (next - r as f64).abs();
        prop_assert!((after - 0.875 * before).abs() <= 1e-6 * before.max(1.0));
        prop_assert!(next >= prev.min(r as f64) && next <= prev.max(r as f64));
    }

    #[test]
    fn selection_respects_the_cap(
        regions in candidates(),
        strategy in strategies(),
        p_max in 1u32..12,
        n_pinned in 0usize..14,
    ) {
        let config = PolicyConfig { strategy, p_max, sum_r_floor: Some(1000), ..PolicyConfig::default() };
        let refs: Vec<&Region> = regions.iter().collect();
        let picked = select_to_pin(&refs, n_pinned, &config);
        prop_assert!(picked.len() + n_pinned.min(p_max as usize) <= p_max as usize);
        prop_assert!(picked.iter().all(|d| d.action == PinAction::Pin));
        let ids: Vec<RegionId> = picked.iter().map(|d| d.region).collect();
        let mut unique = ids.clone();
        unique.sort();
        unique.dedup();
        prop_assert_eq!(unique.len(), ids.len());
        prop_assert!(ids.iter().all(|id| regions.iter().any(|r| r.id() == *id)));
        for w in picked.windows(2) {
            prop_assert!(w[0].metric > w[1].metric || (w[0].metric == w[1].metric && w[0].region < w[1].region));
        }
        if strategy == PinStrategy::None {
            prop_assert!(picked.is_empty());
        }
    }

    #[test]
    fn selection_is_pure(regions in candidates(), strategy in strategies(), p_max in 1u32..12) {
        let config = PolicyConfig { strategy, p_max, sum_r_floor: Some(1000), ..PolicyConfig::default() };
        let before: Vec<(f64, u64, u64)> = regions.iter().map(|r| (r.mma, r.refs, r.sum_refs)).collect();
        let refs: Vec<&Region> = regions.iter().collect();
        let a = select_to_pin(&refs, 0, &config);
        let b = select_to_pin(&refs, 0, &config);
        prop_assert_eq!(a, b);
        let after: Vec<(f64, u64, u64)> = regions.iter().map(|r| (r.mma, r.refs, r.sum_refs)).collect();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn unselective_takes_the_top_metrics(regions in candidates(), p_max in 1u32..12) {
        let config = PolicyConfig { strategy: PinStrategy::Unselective, p_max, ..PolicyConfig::default() };
        let refs: Vec<&Region> = regions.iter().collect();
        let picked = select_to_pin(&refs, 0, &config);
        prop_assert_eq!(picked.len(), regions.len().min(p_max as usize));
        let mut metrics: Vec<f64> = regions.iter().map(|r| r.mma * r.density()).collect();
        metrics.sort_by(|a, b| b.total_cmp(a));
        for (d, m) in picked.iter().zip(&metrics) {
            prop_assert_eq!(d.metric, *m);
        }
    }

    #[test]
    fn selective_choices_meet_every_condition(regions in candidates(), p_max in 1u32..30) {
        let floor = 1000;
        let config = PolicyConfig { strategy: PinStrategy::Selective, p_max, sum_r_floor: Some(floor), ..PolicyConfig::default() };
        let refs: Vec<&Region> = regions.iter().collect();
        let picked = select_to_pin(&refs, 0, &config);
        let positive: Vec<f64> = regions.iter().map(|r| r.mma * r.density()).filter(|p| *p > 0.0).collect();
        let avg = positive.iter().sum::<f64>() / positive.len().max(1) as f64;
        let eligible: Vec<RegionId> = regions
            .iter()
            .filter(|r| r.mma > r.refs as f64 && r.refs > 0 && r.sum_refs > floor && r.mma * r.density() > avg)
            .map(|r| r.id())
            .collect();
        prop_assert_eq!(picked.len(), eligible.len().min(p_max as usize));
        for d in &picked {
            prop_assert!(eligible.contains(&d.region));
        }
    }

    #[test]
    fn events_survive_text_form(event in events()) {
        let line = format_event(&event);
        prop_assert_eq!(parse_event(&line, 1).unwrap(), event);
    }
}

fn events() -> impl Strategy<Value = TraceEvent> {
    let kind = prop_oneof![
        Just(ObjectKind::PrimitiveArray),
        Just(ObjectKind::Leaf),
        Just(ObjectKind::Internal),
        Just(ObjectKind::PrimitiveFieldsOnly),
    ];
    let id = any::<u64>().prop_map(ObjectId);
    prop_oneof![
        (
            any::<u64>(),
            any::<u32>(),
            id.clone(),
            kind,
            1u32..1_000_000,
            prop::collection::vec(any::<u64>().prop_map(ObjectId), 0..5)
        )
            .prop_map(|(time, thread, id, kind, size, refs)| TraceEvent::Alloc {
                time,
                thread,
                id,
                kind,
                size,
                refs
            }),
        (any::<u64>(), id.clone()).prop_map(|(time, id)| TraceEvent::Kill { time, id }),
        (any::<u64>(), any::<u32>(), id.clone(), any::<Option<u32>>())
            .prop_map(|(time, thread, id, slot)| TraceEvent::Read { time, thread, id, slot }),
        (any::<u64>(), any::<u32>(), id, any::<Option<u32>>()).prop_map(|(time, thread, id, slot)| TraceEvent::Write {
            time,
            thread,
            id,
            slot
        }),
        (any::<u64>(), any::<u32>(), any::<u64>()).prop_map(|(time, thread, tag)| TraceEvent::Push {
            time,
            thread,
            tag
        }),
        (any::<u64>(), any::<u32>()).prop_map(|(time, thread)| TraceEvent::Pop { time, thread }),
    ]
}

#[test]
fn selective_ignores_rising_regions() {
    // mma below this cycle's count means activity is climbing.
    let r = candidate(0, REGION, 10.0, 20, 100_000);
    let config = PolicyConfig {
        strategy: PinStrategy::Selective,
        sum_r_floor: Some(1000),
        ..PolicyConfig::default()
    };
    assert!(select_to_pin(&[&r], 0, &config).is_empty());
}
