//! Escape-point generation, costing and stratified downsampling.
//!
//! Candidates come from a uniform lattice laid out in the velocity frame
//! ahead of the vehicle. Each candidate is scored by its offset `q` from the
//! velocity line and its obstacle clearance `d`:
//!
//! ```text
//! cost = we1 * q - we2 * d
//! ```
//!
//! so points near the current heading and far from obstacles rank first.
//! Non-colliding candidates are then sorted by cost and sampled by stratum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Vec3, VehicleState};
use crate::map::ObstacleMap;

/// Upper bound on the weighted clearance term, used when the map is empty.
pub const CLEARANCE_TERM_CAP: f64 = 1e9;

#[derive(Debug, Error, PartialEq)]
pub enum EscapeError {
    #[error("velocity is zero; the escape grid has no direction")]
    ZeroVelocity,
    #[error("invalid escape config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    /// Share of the cost-sorted candidates that falls in this stratum.
    pub fraction: f64,
    /// How many candidates to draw from it.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EscapeConfig {
    pub we1: f64,
    pub we2: f64,
    /// Base half-size of the grid box as (forward, lateral, vertical), meters.
    pub grid_half_extents: Vec3,
    pub grid_spacing: f64,
    /// Seconds; the box grows by this factor per m/s of speed.
    pub velocity_scale: f64,
    pub strata: Vec<Stratum>,
    pub clearance_radius: f64,
    pub rng_seed: u64,
}

impl Default for EscapeConfig {
    fn default() -> Self {
        Self {
            we1: 1.0,
            we2: 0.5,
            grid_half_extents: Vec3::new(1.5, 1.5, 0.5),
            grid_spacing: 0.2,
            velocity_scale: 0.5,
            strata: vec![
                Stratum {
                    fraction: 0.01,
                    count: 10,
                },
                Stratum {
                    fraction: 0.09,
                    count: 40,
                },
                Stratum {
                    fraction: 0.40,
                    count: 30,
                },
                Stratum {
                    fraction: 0.50,
                    count: 20,
                },
            ],
            clearance_radius: 0.3,
            rng_seed: 0,
        }
    }
}

impl EscapeConfig {
    pub fn validate(&self) -> Result<(), EscapeError> {
        let bad = |m: &str| Err(EscapeError::InvalidConfig(m.to_string()));
        if !(self.grid_spacing > 0.0) {
            return bad("grid_spacing must be positive");
        }
        if self.grid_half_extents.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
            return bad("grid_half_extents must be finite and non-negative");
        }
        if !(self.velocity_scale >= 0.0) {
            return bad("velocity_scale must be non-negative");
        }
        if !(self.we1 >= 0.0 && self.we2 >= 0.0) {
            return bad("escape weights must be non-negative");
        }
        if self.strata.is_empty() {
            return bad("at least one stratum is required");
        }
        if self.strata.iter().any(|s| s.count == 0 || !(s.fraction > 0.0)) {
            return bad("strata need positive fractions and counts");
        }
        let total: f64 = self.strata.iter().map(|s| s.fraction).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(EscapeError::InvalidConfig(format!(
                "strata fractions sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeCandidate {
    pub point: Vec3,
    /// Distance from the point to the velocity line.
    pub line_offset: f64,
    /// Distance from the point to its nearest obstacle.
    pub clearance: f64,
    pub cost: f64,
    pub colliding: bool,
    /// Position in the generating lattice; final tie-break.
    pub lattice_index: usize,
}

/// Orthonormal frame with `forward` along the velocity.
pub(crate) fn velocity_frame(velocity: &Vec3) -> Option<(Vec3, Vec3, Vec3)> {
    let forward = velocity.try_normalize(0.0)?;
    let up = Vec3::z();
    let lateral = up
        .cross(&forward)
        .try_normalize(1e-9)
        .unwrap_or_else(|| forward.cross(&Vec3::x()).normalize());
    let vertical = forward.cross(&lateral);
    Some((forward, lateral, vertical))
}

fn lattice_count(half: f64, spacing: f64) -> usize {
    (2.0 * half / spacing + 1e-9).floor() as usize + 1
}

/// Half-extents of the grid box at the current speed.
pub fn grid_box_half_extents(speed: f64, cfg: &EscapeConfig) -> Vec3 {
    cfg.grid_half_extents * (1.0 + cfg.velocity_scale * speed)
}

/// Lattice of escape points in a velocity-aligned box that starts at the
/// vehicle and extends forward.
pub fn generate_grid(state: &VehicleState, cfg: &EscapeConfig) -> Result<Vec<Vec3>, EscapeError> {
    let (forward, lateral, vertical) = velocity_frame(&state.velocity).ok_or(EscapeError::ZeroVelocity)?;
    let half = grid_box_half_extents(state.velocity.norm(), cfg);
    let s = cfg.grid_spacing;
    let (nf, nl, nv) = (
        lattice_count(half.x, s),
        lattice_count(half.y, s),
        lattice_count(half.z, s),
    );
    let mut points = Vec::with_capacity(nf * nl * nv);
    for i in 0..nf {
        // forward coordinate is i * s >= 0, so the half-space cut keeps everything
        let f = i as f64 * s;
        for j in 0..nl {
            let l = -half.y + j as f64 * s;
            for k in 0..nv {
                let v = -half.z + k as f64 * s;
                points.push(state.position + forward * f + lateral * l + vertical * v);
            }
        }
    }
    Ok(points)
}

/// Distance from `point` to the line through the vehicle along its velocity.
pub fn line_offset(state: &VehicleState, point: &Vec3) -> Result<f64, EscapeError> {
    let dir = state.velocity.try_normalize(0.0).ok_or(EscapeError::ZeroVelocity)?;
    let r = point - state.position;
    Ok((r - dir * r.dot(&dir)).norm())
}

pub fn escape_cost(
    state: &VehicleState,
    point: &Vec3,
    map: &ObstacleMap,
    cfg: &EscapeConfig,
) -> Result<EscapeCandidate, EscapeError> {
    let q = line_offset(state, point)?;
    let d = map.nearest_distance(point);
    let clearance_term = (cfg.we2 * d).min(CLEARANCE_TERM_CAP);
    Ok(EscapeCandidate {
        point: *point,
        line_offset: q,
        clearance: d,
        cost: cfg.we1 * q - clearance_term,
        colliding: d < cfg.clearance_radius,
        lattice_index: 0,
    })
}

/// Grid generation plus costing, in lattice order.
pub fn cost_grid(
    state: &VehicleState,
    map: &ObstacleMap,
    cfg: &EscapeConfig,
) -> Result<Vec<EscapeCandidate>, EscapeError> {
    generate_grid(state, cfg)?
        .iter()
        .enumerate()
        .map(|(i, p)| {
            escape_cost(state, p, map, cfg).map(|mut c| {
                c.lattice_index = i;
                c
            })
        })
        .collect()
}

/// Sizes of each stratum for `n` sorted candidates. Boundaries are rounded
/// cumulative fractions, so the sizes always add up to `n`.
pub fn stratum_sizes(n: usize, strata: &[Stratum]) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(strata.len());
    let mut cumulative = 0.0;
    let mut prev = 0usize;
    for (i, s) in strata.iter().enumerate() {
        cumulative += s.fraction;
        let bound = if i + 1 == strata.len() {
            n
        } else {
            ((n as f64 * cumulative).round() as usize).clamp(prev, n)
        };
        sizes.push(bound - prev);
        prev = bound;
    }
    sizes
}

fn cost_order(a: &EscapeCandidate, b: &EscapeCandidate) -> std::cmp::Ordering {
    a.cost
        .total_cmp(&b.cost)
        .then(a.line_offset.total_cmp(&b.line_offset))
        .then(a.lattice_index.cmp(&b.lattice_index))
}

/// Sort by cost and draw a fixed number of candidates from each stratum.
///
/// Colliding candidates are dropped first. Draws are without replacement and
/// clamp to the stratum size. The result is sorted ascending by cost.
pub fn stratified_sample(candidates: &[EscapeCandidate], cfg: &EscapeConfig) -> Vec<EscapeCandidate> {
    let mut sorted: Vec<EscapeCandidate> = candidates.iter().filter(|c| !c.colliding).copied().collect();
    sorted.sort_by(cost_order);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut out = Vec::new();
    let mut start = 0;
    for (stratum, size) in cfg.strata.iter().zip(stratum_sizes(sorted.len(), &cfg.strata)) {
        let take = stratum.count.min(size);
        let mut picked = rand::seq::index::sample(&mut rng, size, take).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| sorted[start + i]));
        start += size;
    }
    out
}

/// Full escape pipeline: grid, cost, stratified sample.
pub fn sample_escape_points(
    state: &VehicleState,
    map: &ObstacleMap,
    cfg: &EscapeConfig,
) -> Result<Vec<EscapeCandidate>, EscapeError> {
    Ok(stratified_sample(&cost_grid(state, map, cfg)?, cfg))
}
