use std::collections::HashMap;

use ltdps::grid::{ApId, GridTopology};
use ltdps::miner::{predict_next_ap, PatternDatabase, ScoringConfig};
use ltdps::mobility::{gen_region_path, MobilePath, RegionPathParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn history(seed: u64, n: usize) -> Vec<MobilePath> {
    let grid = GridTopology::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| gen_region_path(&grid, &RegionPathParams::default(), &mut rng).unwrap()).collect()
}

#[test]
fn counts_match_a_window_oracle() {
    let grid = GridTopology::default();
    let paths = history(3, 10_000);
    let db = PatternDatabase::from_paths(&paths, &grid).unwrap();
    let mut pairs: HashMap<(u16, u16), u64> = HashMap::new();
    let mut triples: HashMap<(u16, u16, u16), u64> = HashMap::new();
    for p in &paths {
        let aps: Vec<u16> = p.aps().map(|a| a.0).collect();
        for i in 0..aps.len() {
            if i + 1 < aps.len() {
                *pairs.entry((aps[i], aps[i + 1])).or_default() += 1;
            }
            if i + 2 < aps.len() {
                *triples.entry((aps[i], aps[i + 1], aps[i + 2])).or_default() += 1;
            }
        }
    }
    assert_eq!(db.path_count(), 10_000);
    assert_eq!(db.direct_counts().count(), pairs.len());
    for ((a, b), n) in db.direct_counts() {
        assert_eq!(pairs[&(a.0, b.0)], n);
    }
    assert_eq!(db.indirect_counts().count(), triples.len());
    for ((a, v, b), n) in db.indirect_counts() {
        assert_eq!(triples[&(a.0, v.0, b.0)], n);
    }
}

#[test]
fn invalid_path_leaves_database_untouched() {
    let grid = GridTopology::default();
    let mut db = PatternDatabase::new();
    let bad: MobilePath = "0(0),24(35)".parse().unwrap();
    assert!(db.record_path(&bad, &grid).is_err());
    assert_eq!(db, PatternDatabase::new());
}

#[test]
fn empty_candidate_set_is_an_error() {
    let db = PatternDatabase::new();
    assert!(predict_next_ap(&db, ApId(0), &[], &ScoringConfig::default()).is_err());
}

// Brute-force scorer written from the scoring rule, not the library.
fn oracle(db: &PatternDatabase, from: ApId, cands: &[ApId], cf: f64) -> Vec<(ApId, f64)> {
    let mut set = cands.to_vec();
    set.sort();
    set.dedup();
    let mut out: Vec<(ApId, f64)> = set
        .iter()
        .map(|&to| {
            let mut s = db.direct_count(from, to) as f64;
            if set.len() >= 3 {
                for &v in &set {
                    if v != to {
                        s += cf * db.indirect_count(from, v, to) as f64;
                    }
                }
            }
            (to, s)
        })
        .collect();
    // Highest score first, lower id on ties.
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}

proptest! {
    #[test]
    fn prediction_matches_brute_force(
        cands in proptest::collection::vec(0u16..25, 1..5),
        direct in proptest::collection::vec(0u64..50, 25),
        indirect in proptest::collection::vec(0u64..50, 625),
        cf in 0.0f64..1.0,
    ) {
        let from = ApId(12);
        let mut db = PatternDatabase::new();
        for (to, n) in direct.iter().enumerate() {
            db.set_direct(from, ApId(to as u16), *n);
        }
        for (k, n) in indirect.iter().enumerate() {
            db.set_indirect(from, ApId((k / 25) as u16), ApId((k % 25) as u16), *n);
        }
        let cands: Vec<ApId> = cands.into_iter().map(ApId).collect();
        let cfg = ScoringConfig { corruption_factor: cf };
        let got = predict_next_ap(&db, from, &cands, &cfg).unwrap();
        let want = oracle(&db, from, &cands, cf);
        prop_assert_eq!(got.ap, want[0].0);
        for (i, c) in got.ranking.iter().enumerate() {
            prop_assert_eq!(c.ap, want[i].0);
            prop_assert!((c.score - want[i].1).abs() < 1e-9);
            prop_assert_eq!(c.rank, i + 1);
        }
    }

    #[test]
    fn recording_is_order_independent(seed in 0u64..1000) {
        let grid = GridTopology::default();
        let paths = history(seed, 50);
        let forward = PatternDatabase::from_paths(&paths, &grid).unwrap();
        let backward = PatternDatabase::from_paths(paths.iter().rev(), &grid).unwrap();
        prop_assert_eq!(forward, backward);
    }
}
