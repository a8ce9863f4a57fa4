use metaflow_core::id::{cover_len, cover_range, split_block, CidrBlock, IdRange, SPACE};
use metaflow_core::hash_path;
use proptest::prelude::*;

/// Independent cover: recursive descent from the whole space, taking every
/// block that lies fully inside the range. This is minimal by construction.
fn descent_cover(block: (u64, u32), lo: u64, hi: u64, out: &mut Vec<(u64, u32)>) {
    let (start, len) = block;
    let end = start + (1u64 << (32 - len));
    if end <= lo || start >= hi {
        return;
    }
    if start >= lo && end <= hi {
        out.push(block);
        return;
    }
    let half = 1u64 << (31 - len);
    descent_cover((start, len + 1), lo, hi, out);
    descent_cover((start + half, len + 1), lo, hi, out);
}

fn arb_range() -> impl Strategy<Value = (u64, u64)> {
    (0..SPACE, 0..SPACE).prop_filter_map("non-empty", |(a, b)| {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        (lo < hi).then_some((lo, hi + 1))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn cover_matches_descent_oracle((lo, hi) in arb_range()) {
        let got: Vec<(u64, u32)> = cover_range(IdRange::new(lo, hi).unwrap())
            .into_iter()
            .map(|b| (b.start(), u32::from(b.len())))
            .collect();
        let mut want = Vec::new();
        descent_cover((0, 0), lo, hi, &mut want);
        prop_assert_eq!(&got, &want);
        prop_assert_eq!(cover_len(lo, hi), want.len());
        prop_assert!(want.len() <= 62);
    }
}

proptest! {
    #[test]
    fn halves_partition_parent(prefix in any::<u32>(), len in 0u8..32) {
        let b = CidrBlock::new(prefix & mask(len), len).unwrap();
        let (l, h) = split_block(b).unwrap();
        prop_assert_eq!(l.start(), b.start());
        prop_assert_eq!(l.end(), h.start());
        prop_assert_eq!(h.end(), b.end());
        prop_assert_eq!(l.size() + h.size(), b.size());
        prop_assert_eq!(l.len(), len + 1);
    }
}

fn mask(len: u8) -> u32 {
    if len == 0 { 0 } else { u32::MAX << (32 - u32::from(len)) }
}

#[test]
fn path_hash_quartiles_are_even() {
    let mut quartiles = [0u32; 4];
    for i in 0..1_000_000 {
        let id = hash_path(format!("/data/u{}/f{}.dat", i % 977, i).as_bytes()).unwrap();
        quartiles[(id.0 >> 30) as usize] += 1;
    }
    for q in quartiles {
        let share = f64::from(q) / 1e6;
        assert!((share - 0.25).abs() <= 0.01, "quartile share {share}");
    }
}
