use crate::geometry::Vec2;
use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("obstacles {i} and {j} overlap under lattice translate ({}, {})", .translate.0, .translate.1)]
    OverlappingObstacles {
        i: usize,
        j: usize,
        translate: (i64, i64),
    },

    #[error("infinite horizon: open corridor in direction ({}, {}) of width {width}", .direction.0, .direction.1)]
    InfiniteHorizon { direction: (i64, i64), width: f64 },

    #[error("no obstacle hit within the validated horizon from {origin:?} along {direction:?}")]
    NoHitWithinHorizon { origin: Vec2, direction: Vec2 },

    #[error("time {t} lies beyond the trajectory duration {duration}")]
    TimeBeyondTrajectory { t: f64, duration: f64 },

    #[error("grid cell size must be positive, got {0}")]
    CellSizeNonPositive(f64),

    #[error("covariance estimate is not positive definite: {0:?}")]
    DegenerateCovariance([[f64; 2]; 2]),

    #[error("quadrature tolerance not met: achieved {achieved:e}, requested {requested:e}")]
    ToleranceNotMet { achieved: f64, requested: f64 },

    #[error("variance bracket 1 + 2J - pi^2/6 = {0} is not positive")]
    NegativeBracket(f64),

    #[error("wall-clock budget exceeded; progress saved to {}", .checkpoint.display())]
    BudgetExceeded { checkpoint: PathBuf },

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
