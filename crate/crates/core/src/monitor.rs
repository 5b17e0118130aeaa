//! Imminent-collision monitor.
//!
//! Nearby obstacle points ahead of the vehicle are scored with
//!
//! ```text
//! C_stop = w1 * |r| - w2 * |v| + w3 * acos(proj)
//! ```
//!
//! where `r` is the vector from the vehicle to the point and `proj` the cosine
//! between `r` and the velocity. A stop is requested when any score drops
//! below `beta`. Lower scores mean higher risk.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Vec3, VehicleState};
use crate::map::ObstacleMap;

#[derive(Debug, Error, PartialEq)]
pub enum MonitorError {
    #[error("velocity is zero; projection is undefined")]
    ZeroVelocity,
    #[error("obstacle point coincides with the vehicle position")]
    CoincidentPoint,
    #[error("obstacle point is behind the vehicle (projection {0})")]
    BehindVehicle(f64),
    #[error("invalid monitor config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorConfig {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub beta: f64,
    /// Hz
    pub monitor_rate: f64,
    pub k_nearest: usize,
    /// meters
    pub query_radius: f64,
    /// Below this speed (m/s) nothing triggers.
    pub min_speed: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            w1: 0.6,
            w2: 0.4,
            w3: 1.2,
            beta: 0.3,
            monitor_rate: 20.0,
            k_nearest: 50,
            query_radius: 5.0,
            min_speed: 0.05,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<(), MonitorError> {
        if !(self.w1 >= 0.0 && self.w2 >= 0.0 && self.w3 >= 0.0) {
            return Err(MonitorError::InvalidConfig("weights must be non-negative"));
        }
        if !self.beta.is_finite() {
            return Err(MonitorError::InvalidConfig("beta must be finite"));
        }
        if !(self.monitor_rate > 0.0 && self.monitor_rate.is_finite()) {
            return Err(MonitorError::InvalidConfig("monitor_rate must be positive"));
        }
        if self.k_nearest == 0 {
            return Err(MonitorError::InvalidConfig("k_nearest must be at least 1"));
        }
        if !(self.query_radius > 0.0) {
            return Err(MonitorError::InvalidConfig("query_radius must be positive"));
        }
        if !(self.min_speed > 0.0) {
            return Err(MonitorError::InvalidConfig("min_speed must be positive"));
        }
        Ok(())
    }
}

/// Outcome of one monitor evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MonitorVerdict {
    pub triggered: bool,
    pub worst_point: Option<Vec3>,
    pub worst_cost: Option<f64>,
    pub evaluated_count: usize,
}

impl MonitorVerdict {
    /// Distance from `state` to the worst point, if any.
    pub fn worst_distance(&self, state: &VehicleState) -> Option<f64> {
        self.worst_point.map(|p| (p - state.position).norm())
    }

    /// Angle between the velocity and the direction to the worst point.
    pub fn worst_angle(&self, state: &VehicleState) -> Option<f64> {
        self.worst_point
            .and_then(|p| projection(state, &p).ok())
            .map(|c| c.clamp(-1.0, 1.0).acos())
    }
}

/// Cosine of the angle between the velocity and the vector to `point`.
pub fn projection(state: &VehicleState, point: &Vec3) -> Result<f64, MonitorError> {
    let speed = state.velocity.norm();
    if speed == 0.0 {
        return Err(MonitorError::ZeroVelocity);
    }
    let r = point - state.position;
    let dist = r.norm();
    if dist == 0.0 {
        return Err(MonitorError::CoincidentPoint);
    }
    Ok(state.velocity.dot(&r) / (speed * dist))
}

/// Stop criterion for one point. The point must not be behind the vehicle.
pub fn stop_cost(state: &VehicleState, point: &Vec3, cfg: &MonitorConfig) -> Result<f64, MonitorError> {
    let proj = projection(state, point)?;
    if proj < 0.0 {
        return Err(MonitorError::BehindVehicle(proj));
    }
    let dist = (point - state.position).norm();
    Ok(stop_cost_terms(dist, state.velocity.norm(), proj, cfg))
}

/// `w1 * distance - w2 * speed + w3 * acos(proj)` with the cosine clamped to `[-1, 1]`.
pub fn stop_cost_terms(distance: f64, speed: f64, proj: f64, cfg: &MonitorConfig) -> f64 {
    cfg.w1 * distance - cfg.w2 * speed + cfg.w3 * proj.clamp(-1.0, 1.0).acos()
}

/// Evaluate the stop criterion over the nearest obstacle points.
pub fn check_imminent(state: &VehicleState, map: &ObstacleMap, cfg: &MonitorConfig) -> MonitorVerdict {
    let speed = state.velocity.norm();
    if !(speed >= cfg.min_speed) {
        return MonitorVerdict::default();
    }
    let mut verdict = MonitorVerdict::default();
    // Neighbors arrive sorted by distance then insertion order, so keeping the
    // first strict minimum gives the documented tie-break.
    for n in map.k_nearest(&state.position, cfg.k_nearest, cfg.query_radius) {
        let Ok(proj) = projection(state, &n.point) else {
            continue;
        };
        if proj < 0.0 {
            continue;
        }
        verdict.evaluated_count += 1;
        let cost = stop_cost_terms(n.distance, speed, proj, cfg);
        if verdict.worst_cost.is_none_or(|w| cost < w) {
            verdict.worst_cost = Some(cost);
            verdict.worst_point = Some(n.point);
        }
    }
    verdict.triggered = verdict.worst_cost.is_some_and(|c| c < cfg.beta);
    verdict
}
