//! Continuous-space mobility models: boundless (torus) area, Gauss-Markov
//! and the three-state probabilistic random walk.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::MobilityError;

/// Rectangular simulation area `[0, width) x [0, height)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub fn new(width: f64, height: f64) -> Result<Self, MobilityError> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(MobilityError::EmptyArea { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..self.width).contains(&x) && (0.0..self.height).contains(&y)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.width / 2.0, self.height / 2.0)
    }

    /// Clamps into the closed rectangle.
    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (x.clamp(0.0, self.width), y.clamp(0.0, self.height))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    /// Radians, kept in `[0, 2π)`.
    pub direction: f64,
}

impl KinematicState {
    pub fn new(x: f64, y: f64, speed: f64, direction: f64) -> Self {
        Self { x, y, speed, direction: wrap_angle(direction) }
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundlessParams {
    pub v_max: f64,
    pub a_max: f64,
    /// Maximum angular change rate (rad per time unit).
    pub max_angular_change: f64,
    pub dt: f64,
}

impl Default for BoundlessParams {
    fn default() -> Self {
        Self { v_max: 1.0, a_max: 0.5, max_angular_change: PI / 4.0, dt: 1.0 }
    }
}

impl BoundlessParams {
    pub fn validate(&self) -> Result<(), MobilityError> {
        let ok = [self.v_max, self.a_max, self.max_angular_change, self.dt].iter().all(|v| v.is_finite() && *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(MobilityError::InvalidParams("boundless parameters must be finite and >= 0"))
        }
    }
}

/// One boundless-area update with explicit perturbations.
///
/// The position advances with the speed and heading held *before* the
/// update, and without a `dt` factor on the displacement. Positions wrap
/// torus-style.
pub fn boundless_update(
    state: KinematicState,
    area: &Area,
    params: &BoundlessParams,
    dv: f64,
    dtheta: f64,
) -> KinematicState {
    let speed = (state.speed + dv).max(0.0).min(params.v_max);
    let direction = wrap_angle(state.direction + dtheta);
    let x = (state.x + state.speed * state.direction.cos()).rem_euclid(area.width);
    let y = (state.y + state.speed * state.direction.sin()).rem_euclid(area.height);
    // rem_euclid may return the modulus itself for tiny negative inputs
    let x = if x >= area.width { 0.0 } else { x };
    let y = if y >= area.height { 0.0 } else { y };
    KinematicState { x, y, speed, direction }
}

/// Draws `dv ~ U[-a_max·dt, a_max·dt]` and `dθ ~ U[-α·dt, α·dt]` and applies
/// [`boundless_update`].
pub fn step_boundless<R: Rng + ?Sized>(
    state: KinematicState,
    area: &Area,
    params: &BoundlessParams,
    rng: &mut R,
) -> KinematicState {
    let dv_max = params.a_max * params.dt;
    let dth_max = params.max_angular_change * params.dt;
    let dv = if dv_max > 0.0 { rng.gen_range(-dv_max..=dv_max) } else { 0.0 };
    let dtheta = if dth_max > 0.0 { rng.gen_range(-dth_max..=dth_max) } else { 0.0 };
    boundless_update(state, area, params, dv, dtheta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMarkovParams {
    /// Memory: 1 is linear motion, 0 is memoryless.
    pub alpha: f64,
    pub mean_speed: f64,
    pub mean_direction: f64,
    pub speed_sigma: f64,
    pub direction_sigma: f64,
    /// Fraction of each area dimension treated as the edge band in which
    /// the mean direction is pointed back at the centre.
    pub edge_margin: f64,
}

impl Default for GaussMarkovParams {
    fn default() -> Self {
        Self {
            alpha: 0.75,
            mean_speed: 1.0,
            mean_direction: 0.0,
            speed_sigma: 1.0,
            direction_sigma: 0.5,
            edge_margin: 0.1,
        }
    }
}

impl GaussMarkovParams {
    pub fn validate(&self) -> Result<(), MobilityError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(MobilityError::InvalidParams("alpha must lie in [0, 1]"));
        }
        if !(self.speed_sigma >= 0.0 && self.direction_sigma >= 0.0) {
            return Err(MobilityError::InvalidParams("sigmas must be >= 0"));
        }
        if !(0.0..0.5).contains(&self.edge_margin) {
            return Err(MobilityError::InvalidParams("edge_margin must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

/// Gauss-Markov update with explicit standard-normal draws.
///
/// New speed and direction mix the previous value, the mean and the draw;
/// the position moves with the previous speed and direction. Inside the
/// edge band the mean direction aims at the area centre. Speed is floored
/// at zero and the position is clamped to the area.
pub fn gauss_markov_update(
    state: KinematicState,
    area: &Area,
    params: &GaussMarkovParams,
    speed_draw: f64,
    direction_draw: f64,
) -> KinematicState {
    let a = params.alpha;
    let noise = (1.0 - a * a).sqrt();

    let mx = area.width * params.edge_margin;
    let my = area.height * params.edge_margin;
    let near_edge = state.x < mx || state.x > area.width - mx || state.y < my || state.y > area.height - my;
    let mean_dir = if near_edge {
        let (cx, cy) = area.center();
        (cy - state.y).atan2(cx - state.x)
    } else {
        params.mean_direction
    };
    // unwrap the mean to within π of the current heading so the blend
    // does not cut across the 0/2π seam
    let mean_dir = state.direction + (mean_dir - state.direction + PI).rem_euclid(TAU) - PI;

    let speed = a * state.speed + (1.0 - a) * params.mean_speed + noise * params.speed_sigma * speed_draw;
    let direction = a * state.direction + (1.0 - a) * mean_dir + noise * params.direction_sigma * direction_draw;

    let (x, y) =
        area.clamp(state.x + state.speed * state.direction.cos(), state.y + state.speed * state.direction.sin());
    KinematicState { x, y, speed: speed.max(0.0), direction: wrap_angle(direction) }
}

pub fn step_gauss_markov<R: Rng + ?Sized>(
    state: KinematicState,
    area: &Area,
    params: &GaussMarkovParams,
    rng: &mut R,
) -> KinematicState {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let s = normal.sample(rng);
    let d = normal.sample(rng);
    gauss_markov_update(state, area, params, s, d)
}

/// Per-axis state of the probabilistic walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WalkState {
    /// Holds the current coordinate.
    Stay = 0,
    /// Moves back toward the previous coordinate.
    Back = 1,
    /// Keeps moving in the same direction.
    Forward = 2,
}

impl WalkState {
    pub const ALL: [WalkState; 3] = [WalkState::Stay, WalkState::Back, WalkState::Forward];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Signed displacement multiplier along the axis.
    pub fn offset(self) -> f64 {
        match self {
            WalkState::Stay => 0.0,
            WalkState::Back => -1.0,
            WalkState::Forward => 1.0,
        }
    }
}

/// Row-stochastic 3x3 state-transition matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkStateMatrix {
    rows: [[f64; 3]; 3],
}

impl WalkStateMatrix {
    pub const ROW_TOLERANCE: f64 = 1e-12;

    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self, MobilityError> {
        for row in &rows {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(MobilityError::NotStochastic);
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > Self::ROW_TOLERANCE {
                return Err(MobilityError::NotStochastic);
            }
        }
        Ok(Self { rows })
    }

    /// A stationary axis starts moving either way with equal odds; a moving
    /// one keeps going with probability 0.7 and otherwise stops.
    pub fn p1() -> Self {
        Self { rows: [[0.0, 0.5, 0.5], [0.3, 0.7, 0.0], [0.3, 0.0, 0.7]] }
    }

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.rows
    }

    pub fn prob(&self, from: WalkState, to: WalkState) -> f64 {
        self.rows[from.index()][to.index()]
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, from: WalkState, rng: &mut R) -> WalkState {
        let u: f64 = rng.gen();
        let row = &self.rows[from.index()];
        let mut acc = 0.0;
        for (state, p) in WalkState::ALL.iter().zip(row) {
            acc += p;
            if u < acc {
                return *state;
            }
        }
        // u landed in the rounding slack at the top of the row
        *WalkState::ALL.iter().zip(row).rev().find(|(_, p)| **p > 0.0).map(|(s, _)| s).unwrap_or(&WalkState::Stay)
    }

    /// Long-run state distribution by power iteration.
    pub fn stationary(&self) -> [f64; 3] {
        let mut pi = [1.0 / 3.0; 3];
        for _ in 0..10_000 {
            let mut next = [0.0; 3];
            for (i, p) in pi.iter().enumerate() {
                for (j, q) in self.rows[i].iter().enumerate() {
                    next[j] += p * q;
                }
            }
            let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if delta < 1e-15 {
                break;
            }
        }
        pi
    }

    /// Step length making the stationary mean 2-D displacement per step
    /// equal `target` (axes independent).
    pub fn step_len_for_mean_displacement(&self, target: f64) -> f64 {
        let pi = self.stationary();
        let moving = pi[WalkState::Back.index()] + pi[WalkState::Forward.index()];
        let still = pi[WalkState::Stay.index()];
        let per_unit = moving * moving * 2f64.sqrt() + 2.0 * moving * still;
        if per_unit > 0.0 {
            target / per_unit
        } else {
            0.0
        }
    }
}

impl Default for WalkStateMatrix {
    fn default() -> Self {
        Self::p1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbWalkStep {
    pub x_state: WalkState,
    pub y_state: WalkState,
    pub dx: f64,
    pub dy: f64,
}

/// Advances both axis chains with independent draws.
pub fn step_prob_walk<R: Rng + ?Sized>(
    x_state: WalkState,
    y_state: WalkState,
    matrix: &WalkStateMatrix,
    step_len: f64,
    rng: &mut R,
) -> ProbWalkStep {
    let x_next = matrix.sample_next(x_state, rng);
    let y_next = matrix.sample_next(y_state, rng);
    ProbWalkStep { x_state: x_next, y_state: y_next, dx: x_next.offset() * step_len, dy: y_next.offset() * step_len }
}
