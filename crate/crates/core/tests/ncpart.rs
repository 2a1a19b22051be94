mod common;

use std::collections::HashSet;

use common::{interleave, kreweras_by_definition};
use freedeconv::ncpart::{catalan, enumerate_nc, is_noncrossing, kreweras, NcPartition};
use proptest::prelude::*;

#[test]
fn counts_are_catalan() {
    for n in 1..=10 {
        let all = enumerate_nc(n).unwrap();
        assert_eq!(all.len() as u64, catalan(n));
        let distinct: HashSet<_> = all.iter().map(|p| p.labels().to_vec()).collect();
        assert_eq!(distinct.len(), all.len());
        assert!(all.iter().all(|p| is_noncrossing(n, &p.blocks()).unwrap()));
    }
}

#[test]
fn block_counts_complement() {
    for n in 1..=8 {
        for pi in enumerate_nc(n).unwrap() {
            assert_eq!(pi.num_blocks() + kreweras(&pi).num_blocks(), n + 1);
        }
    }
}

#[test]
fn kreweras_matches_definition() {
    for n in 1..=6 {
        for pi in enumerate_nc(n).unwrap() {
            assert_eq!(kreweras(&pi), kreweras_by_definition(&pi), "{:?}", pi.blocks());
        }
    }
}

#[test]
fn kreweras_twice_rotates() {
    for n in 1..=7 {
        for pi in enumerate_nc(n).unwrap() {
            assert_eq!(kreweras(&kreweras(&pi)), pi.rotate_down());
        }
    }
}

fn nc_partition(max_n: usize) -> impl Strategy<Value = NcPartition> {
    (1..=max_n).prop_flat_map(|n| {
        let all = enumerate_nc(n).unwrap();
        (0..all.len()).prop_map(move |i| all[i].clone())
    })
}

proptest! {
    #[test]
    fn complement_interleaving_is_noncrossing(pi in nc_partition(10)) {
        let k = kreweras(&pi);
        prop_assert!(is_noncrossing(pi.n(), &k.blocks()).unwrap());
        prop_assert!(is_noncrossing(2 * pi.n(), &interleave(&pi, &k)).unwrap());
    }

    #[test]
    fn complement_is_bijective_up_to_rotation(pi in nc_partition(10)) {
        let n = pi.n();
        let mut rotated = kreweras(&kreweras(&pi));
        for _ in 0..n - 1 {
            rotated = rotated.rotate_down();
        }
        prop_assert_eq!(rotated, pi);
    }

    #[test]
    fn blocks_round_trip(pi in nc_partition(10)) {
        prop_assert_eq!(NcPartition::from_blocks(pi.n(), &pi.blocks()).unwrap(), pi);
    }
}
