//! Scripted stand-ins for the human teleoperator.
//!
//! Both profiles fly toward the goal. The aggressive profile ignores
//! obstacles and wanders with a slowly varying heading error; the cautious
//! profile flies slower and is pushed away from the nearest obstacles.
//!
//! After the safety system has stopped the vehicle, the operator sidesteps:
//! it flies to a waypoint offset to one side of the goal direction, away from
//! the nearest obstacle, before heading for the goal again. While no progress
//! is made, sides alternate and the offset grows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use safestop_core::{normalize_angle, ObstacleMap, Vec3, VehicleState};
use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Aggressive,
    Cautious,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "aggressive" => Ok(Profile::Aggressive),
            "cautious" => Ok(Profile::Cautious),
            other => Err(format!("unknown operator profile '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorCommand {
    pub commanded_velocity: Vec3,
    pub commanded_yaw_rate: f64,
    pub timestamp: f64,
}

impl OperatorCommand {
    pub fn zero(timestamp: f64) -> Self {
        Self {
            commanded_velocity: Vec3::zeros(),
            commanded_yaw_rate: 0.0,
            timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorParams {
    pub aggressive_speed: f64,
    pub cautious_speed: f64,
    /// Stationary standard deviation of the heading error, radians.
    pub heading_noise: f64,
    /// Correlation time of the heading error, seconds.
    pub heading_noise_time: f64,
    /// Cautious profile: obstacles closer than this push the command away.
    pub repulsion_range: f64,
    pub repulsion_gain: f64,
    /// Sidestep after a stop: lateral and forward offset of the waypoint.
    pub detour_lateral: f64,
    pub detour_forward: f64,
    /// Detour waypoints are pulled in until they are this far from obstacles.
    pub detour_clearance: f64,
    /// Give up on a detour waypoint after this long, seconds.
    pub detour_timeout: f64,
    /// Progress toward the goal that resets the detour escalation, meters.
    pub progress_reset: f64,
    pub yaw_gain: f64,
    pub max_yaw_rate: f64,
}

impl Default for OperatorParams {
    fn default() -> Self {
        Self {
            aggressive_speed: 2.0,
            cautious_speed: 1.0,
            heading_noise: 0.2,
            heading_noise_time: 2.0,
            repulsion_range: 2.0,
            repulsion_gain: 1.5,
            detour_lateral: 1.5,
            detour_forward: 1.0,
            detour_clearance: 0.6,
            detour_timeout: 4.0,
            progress_reset: 3.0,
            yaw_gain: 2.0,
            max_yaw_rate: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Detour {
    waypoint: Vec3,
    started: f64,
}

/// Stateful scripted operator; identical seeds and inputs give identical commands.
#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    profile: Profile,
    params: OperatorParams,
    rng: ChaCha8Rng,
    heading_error: f64,
    /// Side (+1 left, -1 right) of the next sidestep.
    next_side: f64,
    pending_detour: bool,
    detour: Option<Detour>,
    escalation: u32,
    last_stop_goal_distance: f64,
}

impl ScriptedOperator {
    pub fn new(profile: Profile, params: OperatorParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f70_6572_6174_6f72);
        let heading_error = params.heading_noise * rng.sample::<f64, _>(StandardNormal);
        let next_side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        Self {
            profile,
            params,
            rng,
            heading_error,
            next_side,
            pending_detour: false,
            detour: None,
            escalation: 0,
            last_stop_goal_distance: f64::INFINITY,
        }
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    fn speed(&self) -> f64 {
        match self.profile {
            Profile::Aggressive => self.params.aggressive_speed,
            Profile::Cautious => self.params.cautious_speed,
        }
    }

    /// Advance the heading-error process by `dt`. Call once per tick.
    fn advance_noise(&mut self, dt: f64) {
        let decay = (-dt / self.params.heading_noise_time).exp();
        let kick = self.params.heading_noise * (1.0 - decay * decay).sqrt();
        self.heading_error = self.heading_error * decay + kick * self.rng.sample::<f64, _>(StandardNormal);
    }

    /// The safety system issued a stop at `state`. The next detour steps
    /// away from the nearest obstacle; while no progress is made, sides
    /// alternate and the offset grows.
    pub fn notify_stop(&mut self, state: &VehicleState, scenario: &Scenario, map: &ObstacleMap) {
        let to_goal = (scenario.goal - state.position).norm();
        if to_goal < self.last_stop_goal_distance - self.params.progress_reset {
            self.escalation = 0;
        } else {
            self.escalation += 1;
        }
        self.last_stop_goal_distance = self.last_stop_goal_distance.min(to_goal);
        if self.escalation == 0 {
            let flat = flat_direction(scenario.goal - state.position);
            let left = Vec3::new(-flat.y, flat.x, 0.0);
            if let Some(n) = map.k_nearest(&state.position, 1, f64::INFINITY).first() {
                let side = (state.position - n.point).dot(&left);
                if side != 0.0 {
                    self.next_side = side.signum();
                }
            }
        }
        // the operator re-aims after being stopped
        self.heading_error = 0.0;
        self.detour = None;
        self.pending_detour = true;
    }

    fn plan_detour(&mut self, state: &VehicleState, scenario: &Scenario, map: &ObstacleMap, time: f64) {
        let flat = flat_direction(scenario.goal - state.position);
        let left = Vec3::new(-flat.y, flat.x, 0.0);
        let full = self.params.detour_lateral * (1.0 + 0.5 * self.escalation as f64).min(3.0);
        let forward = flat * self.params.detour_forward;
        let mut best: Option<(f64, Vec3)> = None;
        'sides: for side in [self.next_side, -self.next_side] {
            let mut lateral = full;
            while lateral >= 0.25 * self.params.detour_lateral {
                let waypoint = state.position + left * (side * lateral) + forward;
                let clearance = map.nearest_distance(&waypoint);
                if clearance >= self.params.detour_clearance {
                    best = Some((side, waypoint));
                    break 'sides;
                }
                lateral *= 0.5;
            }
        }
        let (side, waypoint) = best.unwrap_or((
            self.next_side,
            state.position + left * (self.next_side * full) + forward,
        ));
        self.next_side = -side;
        self.detour = Some(Detour {
            waypoint,
            started: time,
        });
    }

    /// Command for the current tick. `active` is false while the vehicle is
    /// not under operator control; the noise process still advances.
    pub fn command(
        &mut self,
        state: &VehicleState,
        scenario: &Scenario,
        map: &ObstacleMap,
        time: f64,
        dt: f64,
        active: bool,
    ) -> OperatorCommand {
        self.advance_noise(dt);
        if !active {
            return OperatorCommand::zero(time);
        }
        let to_goal = scenario.goal - state.position;
        if to_goal.norm() <= scenario.goal_radius {
            return OperatorCommand::zero(time);
        }

        if self.pending_detour {
            self.pending_detour = false;
            self.plan_detour(state, scenario, map, time);
        }
        if let Some(d) = self.detour {
            let arrived = (d.waypoint - state.position).xy().norm() < 0.4;
            if arrived || time - d.started > self.params.detour_timeout {
                self.detour = None;
            }
        }
        let target = self.detour.map_or(scenario.goal, |d| d.waypoint);

        let mut dir = (target - state.position)
            .try_normalize(1e-9)
            .unwrap_or_else(Vec3::zeros);
        match self.profile {
            Profile::Aggressive => {
                let (s, c) = self.heading_error.sin_cos();
                dir = Vec3::new(c * dir.x - s * dir.y, s * dir.x + c * dir.y, dir.z);
            }
            Profile::Cautious => {
                let mut push = Vec3::zeros();
                for n in map.k_nearest(&state.position, 20, self.params.repulsion_range) {
                    let away = state.position - n.point;
                    let d = n.distance.max(1e-3);
                    push += away / d * (1.0 / d - 1.0 / self.params.repulsion_range);
                }
                push.z = 0.0;
                let blended = dir + push * (self.params.repulsion_gain / 20.0);
                dir = blended.try_normalize(1e-9).unwrap_or(dir);
            }
        }
        let velocity = dir * self.speed();
        let heading = if velocity.xy().norm() > 1e-9 {
            velocity.y.atan2(velocity.x)
        } else {
            state.yaw
        };
        let yaw_rate = (self.params.yaw_gain * normalize_angle(heading - state.yaw))
            .clamp(-self.params.max_yaw_rate, self.params.max_yaw_rate);
        OperatorCommand {
            commanded_velocity: velocity,
            commanded_yaw_rate: yaw_rate,
            timestamp: time,
        }
    }
}

fn flat_direction(v: Vec3) -> Vec3 {
    Vec3::new(v.x, v.y, 0.0).try_normalize(1e-9).unwrap_or_else(Vec3::x)
}
