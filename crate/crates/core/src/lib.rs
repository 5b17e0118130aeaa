//! Imminent-collision monitoring and safe-stop planning for teleoperated aerial vehicles.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`monitor::check_imminent`] scores the nearest obstacle points ahead of
//!    the vehicle and decides whether a stop is needed.
//! 2. [`escape::sample_escape_points`] lays out candidate rest positions ahead
//!    of the vehicle, ranks them and keeps a stratified subset.
//! 3. [`trajectory::plan_stop`] solves a polynomial stop to each candidate in
//!    cost order and returns the first collision-free, dynamically feasible
//!    one, or a straight-line brake when none qualifies.
//!
//! Obstacles are point clouds indexed by the exact KD-tree in [`map`].

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod escape;
pub mod geometry;
pub mod map;
pub mod monitor;
pub mod trajectory;

pub use escape::{EscapeCandidate, EscapeConfig, Stratum};
pub use geometry::{normalize_angle, Vec3, VehicleState};
pub use map::{MapError, Neighbor, ObstacleMap};
pub use monitor::{check_imminent, MonitorConfig, MonitorVerdict};
pub use trajectory::{
    generate_stop_trajectory, plan_stop, FeasibilityConfig, StopPlan, StopTrajectory, TrajectoryKind,
};
