//! Location tracking from RSSI samples: region identification, motion
//! detection, direction inference, next-region prediction and the handoff
//! trigger.

use thiserror::Error;

use crate::grid::{ApId, GridError, GridTopology, RegionId};
use crate::rssi::{classify_level, similar, RssiConfig, RssiSample, SignalLevel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrackError {
    #[error("sample carries no readings")]
    EmptySample,
    #[error("readings above the region threshold {0:?} do not identify a region")]
    Unidentified(Vec<ApId>),
    #[error("no adjacent region is consistent with the direction reading")]
    Indecisive,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    Stationary,
    Moving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionPattern {
    /// `{MV, MV, MV, MV}`: middle of a region.
    MiddleOfRegion,
    /// `{LV, LV, HV, HV}`: heading between the two HV APs.
    TowardPair,
    /// `{LV, LV, LV, HV}`: heading for the HV AP.
    TowardSingle,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionReading {
    pub pattern: DirectionPattern,
    /// APs the node is heading toward, ascending. Empty unless the pattern
    /// is one of the two directional ones.
    pub toward: Vec<ApId>,
}

/// Per-MN tracking state held by the server.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub mn_id: u16,
    pub current_ap: ApId,
    pub current_region: RegionId,
    pub last_sample: RssiSample,
    pub motion: Motion,
    /// Consecutive samples judged similar to their predecessor.
    pub sample_streak: u32,
}

impl TrackState {
    pub fn new(
        mn_id: u16,
        current_ap: ApId,
        current_region: RegionId,
        sample: RssiSample,
        grid: &GridTopology,
    ) -> Result<Self, TrackError> {
        if !grid.region_contains(current_region, current_ap)? {
            return Err(TrackError::Unidentified(vec![current_ap]));
        }
        Ok(Self {
            mn_id,
            current_ap,
            current_region,
            last_sample: sample,
            motion: Motion::Stationary,
            sample_streak: 0,
        })
    }
}

/// Identifies the region from how many readings reach the region threshold
/// (4 interior, 2 edge, 1 corner; 3 is treated as an interior region with
/// the fourth corner missing) and pairs it with the strongest AP.
pub fn locate_region(
    sample: &RssiSample,
    grid: &GridTopology,
    cfg: &RssiConfig,
) -> Result<(RegionId, ApId), TrackError> {
    let strongest = sample.strongest().ok_or(TrackError::EmptySample)?;
    let above: Vec<ApId> = sample.readings().iter().filter(|r| r.rssi >= cfg.region_threshold).map(|r| r.ap).collect();
    let unidentified = || TrackError::Unidentified(above.clone());
    let region = match above.len() {
        1 | 2 | 4 => grid.region_of(&above).map_err(|e| match e {
            GridError::UnknownRegion(_) => unidentified(),
            other => other.into(),
        })?,
        3 => {
            let mut hits = Vec::new();
            for region in grid.regions_of_ap(above[0])? {
                let corners = grid.region_aps(region)?;
                if corners.len() == 4 && above.iter().all(|a| corners.contains(a)) {
                    hits.push(region);
                }
            }
            match hits.as_slice() {
                [only] => *only,
                _ => return Err(unidentified()),
            }
        }
        _ => return Err(unidentified()),
    };
    // the node associates with its strongest AP, which must border the region
    if !grid.region_contains(region, strongest.ap)? {
        return Err(unidentified());
    }
    Ok((region, strongest.ap))
}

/// Moving iff the AP sets differ or a shared AP changed by more than Δe.
pub fn detect_motion(prev: &RssiSample, cur: &RssiSample, cfg: &RssiConfig) -> Motion {
    let mut prev_aps: Vec<ApId> = prev.readings().iter().map(|r| r.ap).collect();
    let mut cur_aps: Vec<ApId> = cur.readings().iter().map(|r| r.ap).collect();
    prev_aps.sort_unstable();
    cur_aps.sort_unstable();
    if prev_aps != cur_aps {
        return Motion::Moving;
    }
    let changed = cur.readings().iter().any(|r| prev.get(r.ap).is_none_or(|old| !similar(old, r.rssi, cfg)));
    if changed {
        Motion::Moving
    } else {
        Motion::Stationary
    }
}

/// Matches the classified levels of a four-reading sample against the
/// location-tracking table, in any order.
pub fn infer_direction(sample: &RssiSample, cfg: &RssiConfig) -> DirectionReading {
    let levels: Vec<(ApId, SignalLevel)> =
        sample.readings().iter().map(|r| (r.ap, classify_level(r.rssi, cfg))).collect();
    let count = |l: SignalLevel| levels.iter().filter(|(_, x)| *x == l).count();
    let high = || {
        let mut v: Vec<ApId> = levels.iter().filter(|(_, l)| *l == SignalLevel::High).map(|(a, _)| *a).collect();
        v.sort_unstable();
        v
    };
    let other = DirectionReading { pattern: DirectionPattern::Other, toward: Vec::new() };
    if levels.len() != 4 {
        return other;
    }
    match (count(SignalLevel::Low), count(SignalLevel::Medium), count(SignalLevel::High)) {
        (0, 4, 0) => DirectionReading { pattern: DirectionPattern::MiddleOfRegion, toward: Vec::new() },
        (2, 0, 2) => DirectionReading { pattern: DirectionPattern::TowardPair, toward: high() },
        (3, 0, 1) => DirectionReading { pattern: DirectionPattern::TowardSingle, toward: high() },
        _ => other,
    }
}

/// Next region for a moving node: among the regions adjacent to the
/// current one that border every `toward` AP, the one closest to the
/// mirror image of the current region's centre through the centroid of the
/// `toward` APs. Ties go to the lower region id.
pub fn predict_region(
    state: &TrackState,
    reading: &DirectionReading,
    grid: &GridTopology,
) -> Result<RegionId, TrackError> {
    if reading.toward.is_empty() {
        return Err(TrackError::Indecisive);
    }
    let (cx, cy) = grid.region_center(state.current_region)?;
    let mut tx = 0.0;
    let mut ty = 0.0;
    for ap in &reading.toward {
        let (x, y) = grid.ap_position(*ap)?;
        tx += x;
        ty += y;
    }
    let n = reading.toward.len() as f64;
    let (tx, ty) = (tx / n, ty / n);
    if (tx - cx).abs() < 1e-9 && (ty - cy).abs() < 1e-9 {
        // heading for the centre of the current region
        return Err(TrackError::Indecisive);
    }
    let (px, py) = (2.0 * tx - cx, 2.0 * ty - cy);
    let mut best: Option<(f64, RegionId)> = None;
    for region in grid.region_neighbors(state.current_region)? {
        let corners = grid.region_aps(region)?;
        if !reading.toward.iter().all(|a| corners.contains(a)) {
            continue;
        }
        let (rx, ry) = grid.region_center(region)?;
        let d = (rx - px).powi(2) + (ry - py).powi(2);
        if best.is_none_or(|(bd, _)| d < bd - 1e-12) {
            best = Some((d, region));
        }
    }
    best.map(|(_, r)| r).ok_or(TrackError::Indecisive)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandoffDecision {
    pub handoff: bool,
    /// RSSI alone cannot separate the strongest candidates; the target
    /// should come from path mining.
    pub mining_fallback: bool,
}

/// Handoff trigger.
///
/// Fires when the next AP reaches the region threshold while the current
/// AP's reading dropped by more than Δe since the previous sample, or when
/// the current AP is weak (below the region threshold) and the two
/// strongest other readings are similar, in which case the target must come
/// from mining.
pub fn should_handoff(state: &TrackState, cur: &RssiSample, next_ap: ApId, cfg: &RssiConfig) -> HandoffDecision {
    let current_now = cur.get(state.current_ap).unwrap_or(0);
    let current_before = state.last_sample.get(state.current_ap).unwrap_or(0);
    let next_now = cur.get(next_ap).unwrap_or(0);
    let diminishing = current_before > current_now && current_before - current_now > cfg.delta_e;
    if next_now >= cfg.region_threshold && diminishing {
        return HandoffDecision { handoff: true, mining_fallback: false };
    }
    let others: Vec<u8> = cur.readings().iter().filter(|r| r.ap != state.current_ap).map(|r| r.rssi).collect();
    let weak = current_now < cfg.region_threshold;
    if weak && others.len() >= 2 && similar(others[0], others[1], cfg) {
        return HandoffDecision { handoff: true, mining_fallback: true };
    }
    HandoffDecision { handoff: false, mining_fallback: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(pairs: &[(u16, u8)]) -> RssiSample {
        RssiSample::from_pairs(pairs, 0).unwrap()
    }

    fn cfg_with_threshold(t: u8) -> RssiConfig {
        RssiConfig { region_threshold: t, ..RssiConfig::default() }
    }

    fn state(ap: u16, region: u16, last: RssiSample) -> TrackState {
        TrackState::new(1, ApId(ap), RegionId(region), last, &GridTopology::default()).unwrap()
    }

    #[test]
    fn locates_interior_region_and_strongest_ap() {
        let g = GridTopology::default();
        let s = sample(&[(0, 20), (1, 30), (5, 10), (6, 5)]);
        assert_eq!(locate_region(&s, &g, &cfg_with_threshold(5)).unwrap(), (RegionId(7), ApId(1)));
    }

    #[test]
    fn locates_corner_and_edge_regions() {
        let g = GridTopology::default();
        let cfg = cfg_with_threshold(34);
        let s = sample(&[(0, 80), (1, 20), (5, 20), (6, 10)]);
        assert_eq!(locate_region(&s, &g, &cfg).unwrap(), (RegionId(0), ApId(0)));
        let s = sample(&[(0, 50), (1, 70), (5, 20), (6, 10)]);
        assert_eq!(locate_region(&s, &g, &cfg).unwrap(), (RegionId(1), ApId(1)));
    }

    #[test]
    fn three_above_threshold_imputes_fourth() {
        let g = GridTopology::default();
        let s = sample(&[(0, 50), (1, 70), (5, 40), (6, 20)]);
        assert_eq!(locate_region(&s, &g, &cfg_with_threshold(34)).unwrap(), (RegionId(7), ApId(1)));
    }

    #[test]
    fn unidentifiable_samples() {
        let g = GridTopology::default();
        let cfg = cfg_with_threshold(34);
        // AP 12 alone is not a corner region
        let s = sample(&[(12, 80), (13, 20)]);
        assert!(matches!(locate_region(&s, &g, &cfg), Err(TrackError::Unidentified(_))));
        let s = sample(&[(12, 10), (13, 20)]);
        assert!(matches!(locate_region(&s, &g, &cfg), Err(TrackError::Unidentified(_))));
        assert_eq!(locate_region(&RssiSample::default(), &g, &cfg), Err(TrackError::EmptySample));
    }

    #[test]
    fn motion_detection() {
        let cfg = RssiConfig::default();
        let a = sample(&[(0, 20), (1, 30), (5, 10), (6, 5)]);
        assert_eq!(detect_motion(&a, &a, &cfg), Motion::Stationary);
        let b = sample(&[(0, 5), (1, 38), (5, 15), (6, 25)]);
        assert_eq!(detect_motion(&a, &b, &cfg), Motion::Moving);
        let c = sample(&[(0, 25), (1, 26), (5, 15), (6, 1)]);
        assert_eq!(detect_motion(&a, &c, &cfg), Motion::Stationary);
        let d = sample(&[(0, 20), (1, 30), (5, 10), (7, 5)]);
        assert_eq!(detect_motion(&a, &d, &cfg), Motion::Moving);
    }

    #[test]
    fn direction_patterns() {
        let cfg = RssiConfig::default();
        let r = infer_direction(&sample(&[(2, 10), (3, 12), (8, 5), (7, 90)]), &cfg);
        assert_eq!(r, DirectionReading { pattern: DirectionPattern::TowardSingle, toward: vec![ApId(7)] });
        let r = infer_direction(&sample(&[(0, 50), (1, 50), (5, 50), (6, 50)]), &cfg);
        assert_eq!(r.pattern, DirectionPattern::MiddleOfRegion);
        assert!(r.toward.is_empty());
        let r = infer_direction(&sample(&[(0, 5), (1, 80), (5, 15), (6, 70)]), &cfg);
        assert_eq!(r, DirectionReading { pattern: DirectionPattern::TowardPair, toward: vec![ApId(1), ApId(6)] });
        let r = infer_direction(&sample(&[(0, 50), (1, 80), (5, 15), (6, 70)]), &cfg);
        assert_eq!(r.pattern, DirectionPattern::Other);
        let r = infer_direction(&sample(&[(1, 80), (6, 70)]), &cfg);
        assert_eq!(r.pattern, DirectionPattern::Other);
    }

    #[test]
    fn region_prediction() {
        let g = GridTopology::default();
        let last = sample(&[(0, 20), (1, 30), (5, 10), (6, 5)]);
        let st = state(1, 7, last.clone());
        let toward = |aps: &[u16]| DirectionReading {
            pattern: DirectionPattern::TowardPair,
            toward: aps.iter().copied().map(ApId).collect(),
        };
        assert_eq!(predict_region(&st, &toward(&[1, 6]), &g).unwrap(), RegionId(8));
        assert_eq!(
            predict_region(&st, &DirectionReading { pattern: DirectionPattern::MiddleOfRegion, toward: vec![] }, &g),
            Err(TrackError::Indecisive)
        );
        let st22 = state(13, 22, last.clone());
        assert_eq!(predict_region(&st22, &toward(&[13]), &g).unwrap(), RegionId(15));
        // R0 heading for AP0: nothing lies beyond the corner but R1/R6/R7 border it
        let st0 = state(0, 0, last);
        assert_eq!(predict_region(&st0, &toward(&[0]), &g).unwrap(), RegionId(7));
    }

    #[test]
    fn handoff_trigger() {
        let cfg = RssiConfig::default();
        let last = sample(&[(1, 40), (7, 30), (2, 10), (6, 10)]);
        let st = state(1, 8, last);
        let cur = sample(&[(1, 20), (7, 70), (2, 10), (6, 10)]);
        assert_eq!(should_handoff(&st, &cur, ApId(7), &cfg), HandoffDecision { handoff: true, mining_fallback: false });
        let cur = sample(&[(1, 38), (7, 20), (2, 10), (6, 10)]);
        assert!(!should_handoff(&st, &cur, ApId(7), &cfg).handoff);
        // tied pair with a weak current AP defers to mining
        let st = state(1, 8, sample(&[(1, 12), (2, 12), (6, 28), (7, 28)]));
        let cur = sample(&[(1, 10), (2, 12), (6, 30), (7, 30)]);
        assert_eq!(should_handoff(&st, &cur, ApId(7), &cfg), HandoffDecision { handoff: true, mining_fallback: true });
    }
}
