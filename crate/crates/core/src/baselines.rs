//! Comparison predictors: the AP-to-AP transition matrix (TM) and ignorant
//! prediction (IP).

use rand::seq::SliceRandom;
use rand::Rng;

use crate::grid::{ApId, GridError, GridTopology};
use crate::mobility::MobilePath;

/// Dense AP-to-AP transition counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl TransitionMatrix {
    pub fn zeros(ap_count: usize) -> Self {
        Self { n: ap_count, counts: vec![0; ap_count * ap_count] }
    }

    pub fn ap_count(&self) -> usize {
        self.n
    }

    pub fn count(&self, from: ApId, to: ApId) -> u64 {
        self.counts[from.index() * self.n + to.index()]
    }

    pub fn row(&self, from: ApId) -> &[u64] {
        &self.counts[from.index() * self.n..(from.index() + 1) * self.n]
    }

    /// Non-zero cells as `((from, to), count)`.
    pub fn nonzero(&self) -> impl Iterator<Item = ((ApId, ApId), u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(move |(i, c)| ((ApId((i / self.n) as u16), ApId((i % self.n) as u16)), *c))
    }
}

/// Counts every consecutive AP pair of every path. Paths are assumed valid.
pub fn build_tm<'a, I>(history: I, grid: &GridTopology) -> Result<TransitionMatrix, GridError>
where
    I: IntoIterator<Item = &'a MobilePath>,
{
    let mut tm = TransitionMatrix::zeros(grid.ap_count());
    for path in history {
        let aps: Vec<ApId> = path.aps().collect();
        for w in aps.windows(2) {
            grid.check_ap(w[0])?;
            grid.check_ap(w[1])?;
            tm.counts[w[0].index() * tm.n + w[1].index()] += 1;
        }
    }
    Ok(tm)
}

/// Every AP with a non-zero count from `current`, most frequent first, ties
/// by AP id. An all-zero row falls back to the grid neighbours in id order.
pub fn tm_ranking(tm: &TransitionMatrix, grid: &GridTopology, current: ApId) -> Result<Vec<ApId>, GridError> {
    grid.check_ap(current)?;
    let mut ranked: Vec<(ApId, u64)> =
        tm.row(current).iter().enumerate().filter(|(_, c)| **c > 0).map(|(i, c)| (ApId(i as u16), *c)).collect();
    if ranked.is_empty() {
        log::debug!("TM row for AP {current} is empty; falling back to grid neighbours");
        return grid.ap_neighbors(current);
    }
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().map(|(ap, _)| ap).collect())
}

/// The `x` most likely successors of `current` (`x >= 1`).
pub fn tm_predict(tm: &TransitionMatrix, grid: &GridTopology, current: ApId, x: usize) -> Result<Vec<ApId>, GridError> {
    let mut ranked = tm_ranking(tm, grid, current)?;
    ranked.truncate(x.max(1));
    Ok(ranked)
}

/// Uniform draw over the grid neighbours of `current`.
pub fn ip_predict<R: Rng + ?Sized>(grid: &GridTopology, current: ApId, rng: &mut R) -> Result<ApId, GridError> {
    let neighbours = grid.ap_neighbors(current)?;
    Ok(*neighbours.choose(rng).expect("every AP of a grid larger than 1x1 has a neighbour"))
}
