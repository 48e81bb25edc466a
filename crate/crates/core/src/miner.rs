//! Path-history mining: 2-hop and 3-hop AP subpath frequencies, candidate
//! scoring with a corruption factor, mobility rules and next-AP prediction.

use std::collections::HashMap;

use thiserror::Error;

use crate::grid::{ApId, GridError, GridTopology, RegionId};
use crate::mobility::{MobilePath, PathError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MinerError {
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("regions {0} and {1} are not adjacent")]
    RegionsNotAdjacent(RegionId, RegionId),
    #[error("rejected path: {0}")]
    InvalidPath(#[from] PathError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringConfig {
    /// Weight applied to indirect (3-AP) path counts.
    pub corruption_factor: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self { corruption_factor: 0.5 }
    }
}

/// Frequency store over consecutive AP pairs and triples of recorded paths.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternDatabase {
    direct: HashMap<(ApId, ApId), u64>,
    indirect: HashMap<(ApId, ApId, ApId), u64>,
    path_count: u64,
}

impl PatternDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates `path` against `grid` and counts it. Invalid paths leave the
    /// database untouched.
    pub fn record_path(&mut self, path: &MobilePath, grid: &GridTopology) -> Result<(), MinerError> {
        path.validate_history(grid)?;
        let aps: Vec<ApId> = path.aps().collect();
        for w in aps.windows(2) {
            *self.direct.entry((w[0], w[1])).or_default() += 1;
        }
        for w in aps.windows(3) {
            *self.indirect.entry((w[0], w[1], w[2])).or_default() += 1;
        }
        self.path_count += 1;
        Ok(())
    }

    pub fn from_paths<'a, I>(paths: I, grid: &GridTopology) -> Result<Self, MinerError>
    where
        I: IntoIterator<Item = &'a MobilePath>,
    {
        let mut db = Self::new();
        for p in paths {
            db.record_path(p, grid)?;
        }
        Ok(db)
    }

    pub fn direct_count(&self, from: ApId, to: ApId) -> u64 {
        self.direct.get(&(from, to)).copied().unwrap_or(0)
    }

    pub fn indirect_count(&self, from: ApId, via: ApId, to: ApId) -> u64 {
        self.indirect.get(&(from, via, to)).copied().unwrap_or(0)
    }

    pub fn path_count(&self) -> u64 {
        self.path_count
    }

    pub fn direct_counts(&self) -> impl Iterator<Item = ((ApId, ApId), u64)> + '_ {
        self.direct.iter().map(|(k, v)| (*k, *v))
    }

    pub fn indirect_counts(&self) -> impl Iterator<Item = ((ApId, ApId, ApId), u64)> + '_ {
        self.indirect.iter().map(|(k, v)| (*k, *v))
    }

    /// Overwrites a pair count. For fixtures and what-if analysis.
    pub fn set_direct(&mut self, from: ApId, to: ApId, count: u64) {
        self.direct.insert((from, to), count);
    }

    /// Overwrites a triple count. For fixtures and what-if analysis.
    pub fn set_indirect(&mut self, from: ApId, via: ApId, to: ApId, count: u64) {
        self.indirect.insert((from, via, to), count);
    }
}

/// `direct(from, to) + cf · Σ_{v ∈ others} indirect(from, v, to)`.
pub fn score_candidate(db: &PatternDatabase, from: ApId, to: ApId, others: &[ApId], cfg: &ScoringConfig) -> f64 {
    let indirect: u64 = others.iter().map(|v| db.indirect_count(from, *v, to)).sum();
    db.direct_count(from, to) as f64 + cfg.corruption_factor * indirect as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedCandidate {
    pub ap: ApId,
    pub score: f64,
    /// 1-based position in the score order.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub ap: ApId,
    /// Every candidate, best first; equal scores order by AP id.
    pub ranking: Vec<RankedCandidate>,
}

impl Prediction {
    /// Rank of `ap`, `None` when it was not a candidate.
    pub fn rank_of(&self, ap: ApId) -> Option<usize> {
        self.ranking.iter().find(|c| c.ap == ap).map(|c| c.rank)
    }

    /// Whether the winner shares its score with the runner-up.
    pub fn is_tied(&self) -> bool {
        matches!(self.ranking.as_slice(), [a, b, ..] if a.score == b.score)
    }
}

/// Picks the next AP from the candidate set `S`.
///
/// One candidate wins outright; two are ranked by direct counts; three or
/// more by [`score_candidate`] with the remaining candidates as the
/// indirect vias.
pub fn predict_next_ap(
    db: &PatternDatabase,
    from: ApId,
    candidates: &[ApId],
    cfg: &ScoringConfig,
) -> Result<Prediction, MinerError> {
    let mut set = candidates.to_vec();
    set.sort_unstable();
    set.dedup();
    if set.is_empty() {
        return Err(MinerError::EmptyCandidates);
    }
    let mut scored: Vec<(ApId, f64)> = set
        .iter()
        .map(|&to| {
            let score = if set.len() >= 3 {
                let others: Vec<ApId> = set.iter().copied().filter(|a| *a != to).collect();
                score_candidate(db, from, to, &others, cfg)
            } else {
                db.direct_count(from, to) as f64
            };
            (to, score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let ranking: Vec<RankedCandidate> =
        scored.into_iter().enumerate().map(|(i, (ap, score))| RankedCandidate { ap, score, rank: i + 1 }).collect();
    Ok(Prediction { ap: ranking[0].ap, ranking })
}

/// `AP13:R15→R9 ⇒ AP8` style rule.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityRule {
    pub ap: ApId,
    pub from_region: RegionId,
    pub to_region: RegionId,
    pub predicted_ap: ApId,
    /// Set once the actual move is known.
    pub valid: Option<bool>,
}

impl MobilityRule {
    pub fn check(&mut self, actual: ApId) -> bool {
        let ok = actual == self.predicted_ap;
        self.valid = Some(ok);
        ok
    }
}

impl std::fmt::Display for MobilityRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AP{}:R{}→R{} ⇒ AP{}", self.ap.0, self.from_region.0, self.to_region.0, self.predicted_ap.0)?;
        match self.valid {
            Some(true) => write!(f, " (valid)"),
            Some(false) => write!(f, " (invalid)"),
            None => Ok(()),
        }
    }
}

pub fn generate_rule(
    db: &PatternDatabase,
    ap: ApId,
    from_region: RegionId,
    to_region: RegionId,
    grid: &GridTopology,
    cfg: &ScoringConfig,
) -> Result<MobilityRule, MinerError> {
    if !grid.regions_adjacent(from_region, to_region)? {
        return Err(MinerError::RegionsNotAdjacent(from_region, to_region));
    }
    let candidates = grid.candidate_next_aps(ap, to_region)?;
    let prediction = predict_next_ap(db, ap, &candidates, cfg)?;
    Ok(MobilityRule { ap, from_region, to_region, predicted_ap: prediction.ap, valid: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ap(i: u16) -> ApId {
        ApId(i)
    }

    #[test]
    fn records_pairs_and_triples() {
        let g = GridTopology::default();
        let mut db = PatternDatabase::new();
        let p: MobilePath = "19(22),13(15),8(9)".parse().unwrap();
        db.record_path(&p, &g).unwrap();
        assert_eq!(db.direct_count(ap(19), ap(13)), 1);
        assert_eq!(db.direct_count(ap(13), ap(8)), 1);
        assert_eq!(db.indirect_count(ap(19), ap(13), ap(8)), 1);
        db.record_path(&p, &g).unwrap();
        assert_eq!(db.direct_count(ap(13), ap(8)), 2);
        assert_eq!(db.indirect_count(ap(19), ap(13), ap(8)), 2);
        assert_eq!(db.path_count(), 2);
    }

    #[test]
    fn invalid_path_leaves_db_unchanged() {
        let g = GridTopology::default();
        let mut db = PatternDatabase::new();
        let bad: MobilePath = "0(0),2(2)".parse().unwrap();
        assert!(db.record_path(&bad, &g).is_err());
        let short: MobilePath = "0(0)".parse().unwrap();
        assert!(db.record_path(&short, &g).is_err());
        assert_eq!(db, PatternDatabase::new());
    }

    #[test]
    fn score_with_and_without_indirect() {
        let mut db = PatternDatabase::new();
        db.set_direct(ap(15), ap(10), 707);
        let cfg = ScoringConfig::default();
        assert_eq!(score_candidate(&db, ap(15), ap(10), &[ap(11), ap(16)], &cfg), 707.0);
        db.set_indirect(ap(15), ap(11), ap(10), 12);
        db.set_indirect(ap(15), ap(16), ap(10), 7);
        assert_eq!(score_candidate(&db, ap(15), ap(10), &[ap(11), ap(16)], &cfg), 707.0 + 9.5);
        assert_eq!(score_candidate(&db, ap(15), ap(10), &[], &cfg), 707.0);
    }

    #[test]
    fn single_candidate_wins_outright() {
        let p = predict_next_ap(&PatternDatabase::new(), ap(19), &[ap(13)], &ScoringConfig::default()).unwrap();
        assert_eq!(p.ap, ap(13));
        assert_eq!(p.rank_of(ap(13)), Some(1));
    }

    #[test]
    fn two_candidates_by_direct_count() {
        let mut db = PatternDatabase::new();
        db.set_direct(ap(13), ap(7), 238);
        db.set_direct(ap(13), ap(8), 367);
        let p = predict_next_ap(&db, ap(13), &[ap(7), ap(8)], &ScoringConfig::default()).unwrap();
        assert_eq!(p.ap, ap(8));
        assert_eq!(p.rank_of(ap(7)), Some(2));
        // indirect counts are ignored for pairs
        db.set_indirect(ap(13), ap(8), ap(7), 1_000);
        let p = predict_next_ap(&db, ap(13), &[ap(7), ap(8)], &ScoringConfig::default()).unwrap();
        assert_eq!(p.ap, ap(8));
    }

    #[test]
    fn three_candidates_table() {
        let mut db = PatternDatabase::new();
        db.set_direct(ap(15), ap(10), 707);
        db.set_direct(ap(15), ap(11), 40);
        db.set_direct(ap(15), ap(16), 54);
        let p = predict_next_ap(&db, ap(15), &[ap(10), ap(11), ap(16)], &ScoringConfig::default()).unwrap();
        assert_eq!(p.ap, ap(10));
        let order: Vec<u16> = p.ranking.iter().map(|c| c.ap.0).collect();
        assert_eq!(order, vec![10, 16, 11]);
        assert_eq!(p.rank_of(ap(16)), Some(2));
        assert_eq!(p.rank_of(ap(3)), None);
    }

    #[test]
    fn ties_go_to_lower_id() {
        let p = predict_next_ap(&PatternDatabase::new(), ap(13), &[ap(8), ap(7)], &ScoringConfig::default()).unwrap();
        assert_eq!(p.ap, ap(7));
        assert!(p.is_tied());
    }

    #[test]
    fn empty_candidates_error() {
        assert_eq!(
            predict_next_ap(&PatternDatabase::new(), ap(0), &[], &ScoringConfig::default()),
            Err(MinerError::EmptyCandidates)
        );
    }

    #[test]
    fn rules_need_adjacent_regions() {
        let g = GridTopology::default();
        let db = PatternDatabase::new();
        let cfg = ScoringConfig::default();
        assert!(matches!(
            generate_rule(&db, ap(13), RegionId(15), RegionId(3), &g, &cfg),
            Err(MinerError::RegionsNotAdjacent(..))
        ));
        let mut rule = generate_rule(&db, ap(19), RegionId(22), RegionId(15), &g, &cfg).unwrap();
        assert_eq!(rule.predicted_ap, ap(13));
        assert!(rule.check(ap(13)));
        assert_eq!(rule.to_string(), "AP19:R22→R15 ⇒ AP13 (valid)");
    }
}
