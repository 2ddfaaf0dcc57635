//! Periodic Lorentz gas with finite horizon: billiard dynamics, trajectory
//! recording, self-intersection counting and the constants of the
//! `c n log n` asymptotics.

pub mod billiard;
pub mod campaign;
pub mod constants;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod intersect;
pub mod rng;
pub mod stats;
pub mod trajectory;
pub mod verify;

pub use billiard::{billiard_step, BilliardTable, DiskSpec, HorizonReport, PhasePoint, TableSpec};
pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::{Disk, Segment, Vec2};
pub use intersect::IntersectionReport;
pub use trajectory::{generate, Trajectory};
