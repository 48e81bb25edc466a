//! Mobility prediction for 802.11 infrastructure networks.
//!
//! Location tracking over synthetic RSSI samples is combined with frequency
//! mining over a history of mobile paths to predict the next access point.
//! The crate also carries the transition-matrix and ignorant baselines, a
//! CBC-residue integrity protocol for reports, and an accuracy harness.
//!
//! ```
//! use ltdps::grid::{ApId, GridTopology, RegionId};
//! use ltdps::miner::{predict_next_ap, PatternDatabase, ScoringConfig};
//!
//! let grid = GridTopology::default();
//! let history: Vec<_> = ["19(22),13(15),8(9)", "13(15),8(9)", "13(15),7(8)"]
//!     .iter()
//!     .map(|p| p.parse().unwrap())
//!     .collect();
//! let db = PatternDatabase::from_paths(&history, &grid).unwrap();
//! let s = grid.candidate_next_aps(ApId(13), RegionId(9)).unwrap();
//! let p = predict_next_ap(&db, ApId(13), &s, &ScoringConfig::default()).unwrap();
//! assert_eq!(p.ap, ApId(8));
//! ```

pub mod baselines;
pub mod cli;
pub mod config;
pub mod eval;
pub mod grid;
pub mod miner;
pub mod mobility;
pub mod mpps;
pub mod rssi;
pub mod security;
pub mod tracker;

use thiserror::Error;

/// Any error the library can return.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] grid::GridError),
    #[error(transparent)]
    Mobility(#[from] mobility::MobilityError),
    #[error(transparent)]
    Path(#[from] mobility::PathError),
    #[error(transparent)]
    History(#[from] mobility::HistoryError),
    #[error(transparent)]
    Rssi(#[from] rssi::RssiError),
    #[error(transparent)]
    Track(#[from] tracker::TrackError),
    #[error(transparent)]
    Miner(#[from] miner::MinerError),
    #[error(transparent)]
    Mpps(#[from] mpps::MppsError),
    #[error(transparent)]
    Security(#[from] security::SecurityError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
}
