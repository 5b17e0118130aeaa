//! Fixed-step simulation of the teleoperated vehicle and the safety loop.
//!
//! Modes:
//! - `Teleop`: the vehicle tracks the operator's velocity command through a
//!   first-order lag; the monitor runs every `1 / monitor_rate` seconds.
//! - `Stopping`: the vehicle follows the issued stop trajectory exactly.
//! - `Recovery`: the vehicle hovers and yaws toward the goal, then control
//!   returns to the operator.

use safestop_core::monitor::check_imminent;
use safestop_core::trajectory::{plan_stop, StopTrajectory, TrajectoryKind};
use safestop_core::{normalize_angle, EscapeConfig, FeasibilityConfig, MonitorConfig, ObstacleMap, Vec3, VehicleState};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operator::OperatorCommand;
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid world config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Teleop,
    Stopping,
    Recovery,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Teleop => "TELEOP",
            Mode::Stopping => "STOPPING",
            Mode::Recovery => "RECOVERY",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "TELEOP" => Some(Mode::Teleop),
            "STOPPING" => Some(Mode::Stopping),
            "RECOVERY" => Some(Mode::Recovery),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    /// Simulation tick, seconds. Must divide the monitor period.
    pub dt: f64,
    /// Velocity tracking time constant, seconds.
    pub velocity_time_constant: f64,
    /// Hard-contact distance, meters.
    pub contact_radius: f64,
    pub recovery_duration: f64,
    pub recovery_yaw_gain: f64,
    pub recovery_max_yaw_rate: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            velocity_time_constant: 0.3,
            contact_radius: 0.15,
            recovery_duration: 1.0,
            recovery_yaw_gain: 3.0,
            recovery_max_yaw_rate: 1.5,
        }
    }
}

/// Everything that parameterizes the safety pipeline and the world.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub monitor: MonitorConfig,
    pub escape: EscapeConfig,
    pub feasibility: FeasibilityConfig,
    pub world: WorldConfig,
}

impl SimConfig {
    /// Validate every section and return the monitor period in ticks.
    pub fn monitor_period_ticks(&self) -> Result<u64, WorldError> {
        self.monitor.validate().map_err(|e| WorldError::Config(e.to_string()))?;
        self.escape.validate().map_err(|e| WorldError::Config(e.to_string()))?;
        self.feasibility
            .validate()
            .map_err(|e| WorldError::Config(e.to_string()))?;
        let w = &self.world;
        if !(w.dt > 0.0 && w.velocity_time_constant > 0.0 && w.contact_radius > 0.0 && w.recovery_duration >= 0.0) {
            return Err(WorldError::Config(
                "dt, time constant and contact radius must be positive".into(),
            ));
        }
        let period = 1.0 / self.monitor.monitor_rate;
        let ratio = period / w.dt;
        let ticks = ratio.round();
        if ticks < 1.0 || (ratio - ticks).abs() > 1e-9 * ratio.max(1.0) {
            return Err(WorldError::Config(format!(
                "monitor period {period} s is not a whole number of {} s ticks",
                w.dt
            )));
        }
        Ok(ticks as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopEvent {
    pub time: f64,
    pub position: Vec3,
    pub speed: f64,
    pub obstacle_distance: f64,
    pub obstacle_angle: f64,
    pub cost: f64,
    pub kind: TrajectoryKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum WorldEvent {
    Stop(StopEvent),
    Collision { time: f64, position: Vec3, distance: f64 },
    GoalReached { time: f64 },
    ModeChange { time: f64, from: Mode, to: Mode },
}

/// Per-tick log record. Monitor fields are present on monitor ticks only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub mode: Mode,
    pub position: Vec3,
    pub velocity: Vec3,
    pub yaw: f64,
    pub nearest_obstacle_dist: f64,
    pub stop_cost_min: Option<f64>,
    pub worst_dist: Option<f64>,
    pub worst_angle: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ActiveStop {
    pub trajectory: StopTrajectory,
    pub started: f64,
}

pub struct World {
    pub scenario: Scenario,
    pub map: ObstacleMap,
    pub config: SimConfig,
    pub state: VehicleState,
    pub mode: Mode,
    pub time: f64,
    pub tick: u64,
    pub monitoring_enabled: bool,
    pub active_stop: Option<ActiveStop>,
    pub collided: bool,
    pub goal_reached: bool,
    pub stops_issued: usize,
    recovery_started: f64,
    monitor_period: u64,
    escape_seed: u64,
    last_verdict_cost: Option<f64>,
}

impl World {
    pub fn new(
        scenario: Scenario,
        map: ObstacleMap,
        config: SimConfig,
        monitoring_enabled: bool,
        seed: u64,
    ) -> Result<Self, WorldError> {
        let monitor_period = config.monitor_period_ticks()?;
        let state = scenario.start;
        let escape_seed = config.escape.rng_seed ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        Ok(Self {
            scenario,
            map,
            config,
            state,
            mode: Mode::Teleop,
            time: 0.0,
            tick: 0,
            monitoring_enabled,
            active_stop: None,
            collided: false,
            goal_reached: false,
            stops_issued: 0,
            recovery_started: 0.0,
            monitor_period,
            escape_seed,
            last_verdict_cost: None,
        })
    }

    pub fn dt(&self) -> f64 {
        self.config.world.dt
    }

    pub fn nearest_obstacle_distance(&self) -> f64 {
        self.map.nearest_distance(&self.state.position)
    }

    /// Most recent monitor minimum cost, if the monitor evaluated any point.
    pub fn last_stop_cost(&self) -> Option<f64> {
        self.last_verdict_cost
    }

    /// Reset the vehicle to the scenario start.
    pub fn reset(&mut self) {
        self.state = self.scenario.start;
        self.mode = Mode::Teleop;
        self.active_stop = None;
        self.collided = false;
        self.goal_reached = false;
        self.last_verdict_cost = None;
    }

    fn track_command(&mut self, cmd: &OperatorCommand, dt: f64) {
        let tau = self.config.world.velocity_time_constant;
        let decay = (-dt / tau).exp();
        let s = &mut self.state;

        let u = cmd.commanded_velocity;
        let dv = s.velocity - u;
        s.position += u * dt + dv * (tau * (1.0 - decay));
        s.velocity = u + dv * decay;
        s.acceleration = (u - s.velocity) / tau;
        s.jerk = -s.acceleration / tau;

        let w = cmd.commanded_yaw_rate;
        let dw = s.yaw_rate - w;
        s.yaw = normalize_angle(s.yaw + w * dt + dw * tau * (1.0 - decay));
        s.yaw_rate = w + dw * decay;
        s.yaw_accel = (w - s.yaw_rate) / tau;
        s.yaw_jerk = -s.yaw_accel / tau;
    }

    fn hold_at_rest(&mut self) {
        let s = &mut self.state;
        s.velocity = Vec3::zeros();
        s.acceleration = Vec3::zeros();
        s.jerk = Vec3::zeros();
        s.yaw_accel = 0.0;
        s.yaw_jerk = 0.0;
    }

    fn set_mode(&mut self, to: Mode, events: &mut Vec<WorldEvent>) {
        if to != self.mode {
            events.push(WorldEvent::ModeChange {
                time: self.time,
                from: self.mode,
                to,
            });
            self.mode = to;
        }
    }

    /// Advance one tick. Returns the events raised during the tick and the
    /// trace row describing the state at its end.
    pub fn step(&mut self, cmd: &OperatorCommand) -> (Vec<WorldEvent>, TraceRow) {
        let dt = self.dt();
        let mut events = Vec::new();
        self.tick += 1;
        self.time = self.tick as f64 * dt;

        match self.mode {
            Mode::Teleop => self.track_command(cmd, dt),
            Mode::Stopping => {
                let stop = self.active_stop.expect("stopping without a trajectory");
                let elapsed = self.time - stop.started;
                self.state = stop.trajectory.state_at(elapsed);
                if elapsed >= stop.trajectory.duration {
                    self.hold_at_rest();
                    self.state.yaw_rate = 0.0;
                    self.active_stop = None;
                    self.recovery_started = self.time;
                    self.set_mode(Mode::Recovery, &mut events);
                }
            }
            Mode::Recovery => {
                let w = self.config.world;
                let to_goal = self.scenario.goal - self.state.position;
                let bearing = to_goal.y.atan2(to_goal.x);
                let rate = (w.recovery_yaw_gain * normalize_angle(bearing - self.state.yaw))
                    .clamp(-w.recovery_max_yaw_rate, w.recovery_max_yaw_rate);
                self.hold_at_rest();
                self.state.yaw = normalize_angle(self.state.yaw + rate * dt);
                self.state.yaw_rate = rate;
                if self.time - self.recovery_started >= w.recovery_duration - 1e-9 {
                    self.state.yaw_rate = 0.0;
                    self.set_mode(Mode::Teleop, &mut events);
                }
            }
        }

        let nearest = self.nearest_obstacle_distance();
        if nearest < self.config.world.contact_radius {
            self.collided = true;
            events.push(WorldEvent::Collision {
                time: self.time,
                position: self.state.position,
                distance: nearest,
            });
        }
        if !self.collided && (self.scenario.goal - self.state.position).norm() <= self.scenario.goal_radius {
            self.goal_reached = true;
            events.push(WorldEvent::GoalReached { time: self.time });
        }

        let mut row = TraceRow {
            t: self.time,
            mode: self.mode,
            position: self.state.position,
            velocity: self.state.velocity,
            yaw: self.state.yaw,
            nearest_obstacle_dist: nearest,
            stop_cost_min: None,
            worst_dist: None,
            worst_angle: None,
        };

        let monitor_tick = self.tick.is_multiple_of(self.monitor_period);
        if self.monitoring_enabled && monitor_tick && self.mode == Mode::Teleop && !self.collided && !self.goal_reached
        {
            let verdict = check_imminent(&self.state, &self.map, &self.config.monitor);
            self.last_verdict_cost = verdict.worst_cost;
            row.stop_cost_min = verdict.worst_cost;
            row.worst_dist = verdict.worst_distance(&self.state);
            row.worst_angle = verdict.worst_angle(&self.state);
            if verdict.triggered {
                let trigger_state = self.state;
                let mut escape = self.config.escape.clone();
                escape.rng_seed = self.escape_seed.wrapping_add(self.stops_issued as u64);
                let plan = plan_stop(&trigger_state, &self.map, &escape, &self.config.feasibility);
                self.stops_issued += 1;
                self.active_stop = Some(ActiveStop {
                    trajectory: plan.trajectory,
                    started: self.time,
                });
                events.push(WorldEvent::Stop(StopEvent {
                    time: self.time,
                    position: trigger_state.position,
                    speed: trigger_state.speed(),
                    obstacle_distance: row.worst_dist.unwrap_or(f64::NAN),
                    obstacle_angle: row.worst_angle.unwrap_or(f64::NAN),
                    cost: verdict.worst_cost.unwrap_or(f64::NAN),
                    kind: plan.trajectory.kind,
                }));
                self.set_mode(Mode::Stopping, &mut events);
                row.mode = self.mode;
            }
        }
        (events, row)
    }

    pub fn finished(&self) -> bool {
        self.collided || self.goal_reached
    }
}
