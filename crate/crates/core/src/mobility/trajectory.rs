//! Bounded continuous trajectory generators (random walk, random waypoint,
//! random direction) sampled once per tick, and the bridge from a
//! continuous trajectory to a discrete [`MobilePath`].

use std::f64::consts::TAU;

use rand::Rng;

use super::kinematic::{wrap_angle, Area, KinematicState};
use super::path::{MobilePath, PathStep};
use super::MobilityError;
use crate::grid::{ApId, GridTopology};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedRange {
    pub min: f64,
    pub max: f64,
}

impl SpeedRange {
    pub fn validate(&self) -> Result<(), MobilityError> {
        if self.min.is_finite() && self.max.is_finite() && 0.0 <= self.min && self.min <= self.max {
            Ok(())
        } else {
            Err(MobilityError::InvalidParams("speed range must satisfy 0 <= min <= max"))
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.max > self.min {
            rng.gen_range(self.min..=self.max)
        } else {
            self.min
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub speed: SpeedRange,
    /// Ticks before a new speed and direction are drawn.
    pub leg_ticks: usize,
    pub ticks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointParams {
    pub speed: SpeedRange,
    pub pause_ticks: usize,
    pub ticks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionParams {
    pub speed: SpeedRange,
    pub pause_ticks: usize,
    pub ticks: usize,
}

fn random_point<R: Rng + ?Sized>(area: &Area, rng: &mut R) -> (f64, f64) {
    (rng.gen_range(0.0..area.width), rng.gen_range(0.0..area.height))
}

/// Mirrors a coordinate back into `[0, limit]`, returning whether it bounced.
fn reflect(v: f64, limit: f64) -> (f64, bool) {
    let period = 2.0 * limit;
    let m = v.rem_euclid(period);
    let folded = if m > limit { period - m } else { m };
    (folded, v < 0.0 || v > limit)
}

/// Reflects a free-flight move off the area edges; the heading is mirrored
/// on each axis that bounced.
pub fn reflect_move(state: KinematicState, area: &Area) -> KinematicState {
    let nx = state.x + state.speed * state.direction.cos();
    let ny = state.y + state.speed * state.direction.sin();
    let (x, bx) = reflect(nx, area.width);
    let (y, by) = reflect(ny, area.height);
    let mut dir = state.direction;
    if bx {
        dir = std::f64::consts::PI - dir;
    }
    if by {
        dir = -dir;
    }
    KinematicState { x, y, speed: state.speed, direction: wrap_angle(dir) }
}

/// Random walk with edge reflection. Each tick's state is the position after
/// moving; a new speed and heading are drawn every `leg_ticks`.
pub fn gen_walk_trajectory<R: Rng + ?Sized>(
    start: (f64, f64),
    area: &Area,
    params: &WalkParams,
    rng: &mut R,
) -> Result<Vec<KinematicState>, MobilityError> {
    params.speed.validate()?;
    let leg = params.leg_ticks.max(1);
    let mut state = KinematicState::new(start.0, start.1, 0.0, 0.0);
    let mut out = Vec::with_capacity(params.ticks);
    for tick in 0..params.ticks {
        if tick % leg == 0 {
            state.speed = params.speed.sample(rng);
            state.direction = rng.gen_range(0.0..TAU);
        }
        state = reflect_move(state, area);
        out.push(state);
    }
    Ok(out)
}

/// Random waypoint: pause, pick a uniform destination and speed, travel,
/// repeat. Paused ticks carry zero speed.
pub fn gen_waypoint_trajectory<R: Rng + ?Sized>(
    start: (f64, f64),
    area: &Area,
    params: &WaypointParams,
    rng: &mut R,
) -> Result<Vec<KinematicState>, MobilityError> {
    params.speed.validate()?;
    let mut out = Vec::with_capacity(params.ticks);
    let (mut x, mut y) = start;
    while out.len() < params.ticks {
        for _ in 0..params.pause_ticks {
            if out.len() == params.ticks {
                return Ok(out);
            }
            out.push(KinematicState::new(x, y, 0.0, 0.0));
        }
        let (dx, dy) = random_point(area, rng);
        let speed = params.speed.sample(rng);
        if speed <= 0.0 {
            continue;
        }
        let heading = (dy - y).atan2(dx - x);
        loop {
            if out.len() == params.ticks {
                return Ok(out);
            }
            let remaining = ((dx - x).powi(2) + (dy - y).powi(2)).sqrt();
            if remaining <= speed {
                x = dx;
                y = dy;
                out.push(KinematicState::new(x, y, speed, heading));
                break;
            }
            x += speed * heading.cos();
            y += speed * heading.sin();
            out.push(KinematicState::new(x, y, speed, heading));
        }
    }
    Ok(out)
}

/// Distance along `heading` from `(x, y)` to the area boundary.
fn distance_to_boundary(x: f64, y: f64, heading: f64, area: &Area) -> f64 {
    let (c, s) = (heading.cos(), heading.sin());
    let tx = if c > 1e-12 {
        (area.width - x) / c
    } else if c < -1e-12 {
        -x / c
    } else {
        f64::INFINITY
    };
    let ty = if s > 1e-12 {
        (area.height - y) / s
    } else if s < -1e-12 {
        -y / s
    } else {
        f64::INFINITY
    };
    tx.min(ty).max(0.0)
}

/// Random direction: pick a heading, travel to the boundary, pause there,
/// pick again. Headings that would leave immediately are redrawn.
pub fn gen_direction_trajectory<R: Rng + ?Sized>(
    start: (f64, f64),
    area: &Area,
    params: &DirectionParams,
    rng: &mut R,
) -> Result<Vec<KinematicState>, MobilityError> {
    params.speed.validate()?;
    if params.speed.max <= 0.0 {
        return Err(MobilityError::InvalidParams("random direction needs a positive max speed"));
    }
    let mut out = Vec::with_capacity(params.ticks);
    let (mut x, mut y) = start;
    let mut first = true;
    while out.len() < params.ticks {
        if !first {
            for _ in 0..params.pause_ticks {
                if out.len() == params.ticks {
                    return Ok(out);
                }
                out.push(KinematicState::new(x, y, 0.0, 0.0));
            }
        }
        first = false;
        let (heading, mut remaining) = loop {
            let h = rng.gen_range(0.0..TAU);
            let d = distance_to_boundary(x, y, h, area);
            if d > 1e-9 {
                break (h, d);
            }
        };
        let speed = loop {
            let s = params.speed.sample(rng);
            if s > 0.0 {
                break s;
            }
        };
        while remaining > 0.0 {
            if out.len() == params.ticks {
                return Ok(out);
            }
            let step = speed.min(remaining);
            x += step * heading.cos();
            y += step * heading.sin();
            remaining -= step;
            if remaining <= 0.0 {
                // snap onto the boundary the heading was aimed at
                let (cx, cy) = area.clamp(x, y);
                x = snap(cx, area.width);
                y = snap(cy, area.height);
            }
            out.push(KinematicState::new(x, y, speed, heading));
        }
    }
    Ok(out)
}

fn snap(v: f64, limit: f64) -> f64 {
    if v.abs() < 1e-9 {
        0.0
    } else if (v - limit).abs() < 1e-9 {
        limit
    } else {
        v
    }
}

/// Maximum distance between interpolated samples when walking a trajectory.
const PATH_SAMPLE_STEP: f64 = 0.02;

/// Nearest corner AP of the enclosing region; ties go to the lower id.
fn associated_ap(grid: &GridTopology, x: f64, y: f64) -> Option<PathStep> {
    // the far edges belong to the last row/column of regions
    let (w, h) = grid.area_size();
    let x = if x == w { w - 1e-9 } else { x };
    let y = if y == h { h - 1e-9 } else { y };
    let region = grid.region_at_point(x, y)?;
    let corners = grid.region_aps(region).ok()?;
    let mut best: Option<(f64, ApId)> = None;
    for ap in corners {
        let (ax, ay) = grid.ap_position(ap).ok()?;
        let d = (ax - x).powi(2) + (ay - y).powi(2);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, ap));
        }
    }
    best.map(|(_, ap)| PathStep { ap, region })
}

/// Maps positions (area coordinates, one region width per unit) to the
/// sequence of `(nearest AP in enclosing region, region)` associations.
///
/// Segments between samples are interpolated so no association is skipped.
/// A change of region without a change of AP is not a new visit.
pub fn trajectory_to_path(traj: &[KinematicState], grid: &GridTopology) -> Result<MobilePath, MobilityError> {
    let first = traj.first().ok_or(MobilityError::EmptyTrajectory)?;
    let locate = |x: f64, y: f64| associated_ap(grid, x, y).ok_or(MobilityError::OutsideArea { x, y });
    let mut path = MobilePath::default();
    path.push(locate(first.x, first.y)?);
    let mut last_ap = path.steps()[0].ap;
    for pair in traj.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let dist = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        let n = (dist / PATH_SAMPLE_STEP).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let step = locate(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)?;
            if step.ap == last_ap {
                continue;
            }
            if !grid.aps_adjacent(last_ap, step.ap).unwrap_or(false) {
                return Err(MobilityError::Discontinuous { from: last_ap, to: step.ap });
            }
            last_ap = step.ap;
            path.push(step);
        }
    }
    Ok(path)
}
