use std::collections::BTreeSet;

use ltdps::grid::{ApId, GridTopology, RegionId};
use proptest::prelude::*;

fn moore(rows: usize, cols: usize, a: usize, b: usize) -> bool {
    let (ar, ac) = ((a / cols) as i64, (a % cols) as i64);
    let (br, bc) = ((b / cols) as i64, (b % cols) as i64);
    a != b && (ar - br).abs() <= 1 && (ac - bc).abs() <= 1 && rows > 0
}

#[test]
fn candidate_sets_never_exceed_three_on_default_grid() {
    let grid = GridTopology::default();
    let mut sizes = BTreeSet::new();
    for ap in grid.aps() {
        for region in grid.regions() {
            let s = grid.candidate_next_aps(ap, region).unwrap();
            assert!(s.len() <= 3, "S({ap}, {region}) = {s:?}");
            sizes.insert(s.len());
        }
    }
    assert_eq!(sizes, BTreeSet::from([0, 1, 2, 3]));
}

#[test]
fn every_ap_sits_in_four_regions() {
    let grid = GridTopology::default();
    for ap in grid.aps() {
        let n = grid.regions().filter(|r| grid.region_contains(*r, ap).unwrap()).count();
        assert_eq!(n, 4, "{ap}");
        assert_eq!(grid.regions_of_ap(ap).unwrap().len(), 4);
    }
}

#[test]
fn out_of_bounds_ids_are_rejected() {
    let grid = GridTopology::default();
    assert!(grid.ap_neighbors(ApId(25)).is_err());
    assert!(grid.region_aps(RegionId(36)).is_err());
    assert!(grid.candidate_next_aps(ApId(0), RegionId(99)).is_err());
    assert!(grid.region_of(&[ApId(0), ApId(2)]).is_err());
    assert!(GridTopology::new(0, 5).is_err());
}

proptest! {
    #[test]
    fn adjacency_matches_moore_oracle(rows in 1usize..8, cols in 1usize..8) {
        let grid = GridTopology::new(rows, cols).unwrap();
        for a in 0..rows * cols {
            let got: BTreeSet<u16> = grid.ap_neighbors(ApId(a as u16)).unwrap().iter().map(|x| x.0).collect();
            let want: BTreeSet<u16> = (0..rows * cols).filter(|&b| moore(rows, cols, a, b)).map(|b| b as u16).collect();
            prop_assert_eq!(&got, &want);
            for b in &got {
                prop_assert!(grid.aps_adjacent(ApId(*b), ApId(a as u16)).unwrap());
            }
        }
    }

    #[test]
    fn region_of_inverts_region_aps(rows in 2usize..8, cols in 2usize..8) {
        let grid = GridTopology::new(rows, cols).unwrap();
        prop_assert_eq!(grid.region_count(), (rows + 1) * (cols + 1));
        let mut covered = BTreeSet::new();
        for region in grid.regions() {
            let aps = grid.region_aps(region).unwrap();
            prop_assert!(!aps.is_empty() && aps.len() <= 4);
            prop_assert!(aps.windows(2).all(|w| w[0] < w[1]));
            covered.extend(aps.iter().copied());
            let mut shuffled = aps.clone();
            shuffled.reverse();
            prop_assert_eq!(grid.region_of(&shuffled).unwrap(), region);
        }
        prop_assert_eq!(covered.len(), grid.ap_count());
    }

    #[test]
    fn candidates_are_the_intersection(ap in 0u16..25, region in 0u16..36) {
        let grid = GridTopology::default();
        let n: BTreeSet<ApId> = grid.ap_neighbors(ApId(ap)).unwrap().into_iter().collect();
        let r: BTreeSet<ApId> = grid.region_aps(RegionId(region)).unwrap().into_iter().collect();
        let want: Vec<ApId> = n.intersection(&r).copied().collect();
        prop_assert_eq!(grid.candidate_next_aps(ApId(ap), RegionId(region)).unwrap(), want);
    }

    #[test]
    fn point_lookup_agrees_with_region_centres(region in 0u16..36) {
        let grid = GridTopology::default();
        let (x, y) = grid.region_center(RegionId(region)).unwrap();
        prop_assert_eq!(grid.region_at_point(x, y), Some(RegionId(region)));
    }
}
