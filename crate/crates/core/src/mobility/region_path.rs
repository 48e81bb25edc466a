//! Region-level path generator used for histories and test sets.
//!
//! A waypoint walk on the region lattice: the node picks a destination
//! region, steps one adjacent region at a time toward it and, on every
//! step, hands off to the candidate AP closest to the destination. Reaching
//! the destination (or getting boxed in) draws a new one. The node never
//! hands straight back to the AP it just left.

use rand::seq::SliceRandom;
use rand::Rng;

use super::path::{MobilePath, PathStep};
use super::MobilityError;
use crate::grid::{ApId, GridTopology, RegionId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionPathParams {
    pub min_len: usize,
    pub max_len: usize,
    /// Down-weights destinations near the centre of the grid.
    pub center_avoidance: bool,
}

impl Default for RegionPathParams {
    fn default() -> Self {
        Self { min_len: 3, max_len: 6, center_avoidance: false }
    }
}

impl RegionPathParams {
    pub fn validate(&self) -> Result<(), MobilityError> {
        if 2 <= self.min_len && self.min_len <= self.max_len {
            Ok(())
        } else {
            Err(MobilityError::InvalidParams("path length range must satisfy 2 <= min <= max"))
        }
    }
}

/// Give up steering after this many fresh destinations and take any legal move.
const MAX_RETARGETS: usize = 32;

fn pick_destination<R: Rng + ?Sized>(grid: &GridTopology, params: &RegionPathParams, rng: &mut R) -> RegionId {
    let n = grid.region_count();
    if !params.center_avoidance {
        return RegionId(rng.gen_range(0..n) as u16);
    }
    // weight grows with Chebyshev distance from the centre ring
    let (rows, cols) = (grid.region_rows() as f64, grid.region_cols() as f64);
    let weights: Vec<f64> = grid
        .regions()
        .map(|r| {
            let (cx, cy) = grid.region_center(r).expect("region in bounds");
            let d = ((cx - cols / 2.0).abs() / cols).max((cy - rows / 2.0).abs() / rows);
            0.25 + d
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return RegionId(i as u16);
        }
        u -= w;
    }
    RegionId((n - 1) as u16)
}

fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// All legal `(region, AP)` moves from `step`, excluding a hand-back to `prev`.
fn legal_moves(grid: &GridTopology, step: PathStep, prev: Option<ApId>) -> Vec<PathStep> {
    let mut out = Vec::new();
    for region in grid.region_neighbors(step.region).expect("region in bounds") {
        for ap in grid.candidate_next_aps(step.ap, region).expect("in bounds") {
            if Some(ap) != prev {
                out.push(PathStep { ap, region });
            }
        }
    }
    out
}

/// Steers one region toward `dest`; `None` when that move has no candidate AP.
fn steer(grid: &GridTopology, step: PathStep, prev: Option<ApId>, dest: RegionId) -> Option<PathStep> {
    let (i, j) = grid.region_cell(step.region).ok()?;
    let (di, dj) = grid.region_cell(dest).ok()?;
    let next = grid.region_at(
        i as isize + (di as isize - i as isize).signum(),
        j as isize + (dj as isize - j as isize).signum(),
    )?;
    let target = grid.region_center(dest).ok()?;
    let mut best: Option<(f64, ApId)> = None;
    for ap in grid.candidate_next_aps(step.ap, next).ok()? {
        if Some(ap) == prev {
            continue;
        }
        let d = sq_dist(grid.ap_position(ap).ok()?, target);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, ap));
        }
    }
    best.map(|(_, ap)| PathStep { ap, region: next })
}

/// Generates one path with length uniform in `[min_len, max_len]`.
///
/// The start AP is uniform over all APs and its region uniform over the
/// regions it borders, so every AP starts equally often.
pub fn gen_region_path<R: Rng + ?Sized>(
    grid: &GridTopology,
    params: &RegionPathParams,
    rng: &mut R,
) -> Result<MobilePath, MobilityError> {
    params.validate()?;
    let len = rng.gen_range(params.min_len..=params.max_len);
    let ap = ApId(rng.gen_range(0..grid.ap_count()) as u16);
    let region = *grid.regions_of_ap(ap).expect("AP in bounds").choose(rng).expect("every AP borders a region");

    let mut path = MobilePath::new(vec![PathStep { ap, region }]);
    let mut prev: Option<ApId> = None;
    let mut dest = pick_destination(grid, params, rng);
    while path.len() < len {
        let here = *path.steps().last().expect("non-empty");
        let mut next = None;
        for _ in 0..MAX_RETARGETS {
            if dest != here.region {
                next = steer(grid, here, prev, dest);
                if next.is_some() {
                    break;
                }
            }
            dest = pick_destination(grid, params, rng);
        }
        let next = match next {
            Some(n) => n,
            None => *legal_moves(grid, here, prev).choose(rng).ok_or(MobilityError::Stuck(here.ap))?,
        };
        prev = Some(here.ap);
        path.push(next);
    }
    Ok(path)
}
