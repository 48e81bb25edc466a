//! Mobile-node movement: continuous mobility models, the region-level path
//! generator and the path-history file format.

pub mod kinematic;
pub mod path;
pub mod region_path;
pub mod trajectory;

use thiserror::Error;

use crate::grid::ApId;

pub use kinematic::{
    boundless_update, gauss_markov_update, step_boundless, step_gauss_markov, step_prob_walk, Area, BoundlessParams,
    GaussMarkovParams, KinematicState, ProbWalkStep, WalkState, WalkStateMatrix,
};
pub use path::{read_history, write_history, HistoryError, MobilePath, PathError, PathStep};
pub use region_path::{gen_region_path, RegionPathParams};
pub use trajectory::{
    gen_direction_trajectory, gen_walk_trajectory, gen_waypoint_trajectory, trajectory_to_path, DirectionParams,
    SpeedRange, WalkParams, WaypointParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MobilityError {
    #[error("simulation area {width}x{height} is empty")]
    EmptyArea { width: f64, height: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("transition matrix is not row-stochastic")]
    NotStochastic,
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("position ({x}, {y}) is outside the simulation area")]
    OutsideArea { x: f64, y: f64 },
    #[error("trajectory jumps from AP {from} to non-adjacent AP {to}")]
    Discontinuous { from: ApId, to: ApId },
    #[error("no legal move from AP {0}")]
    Stuck(ApId),
}
