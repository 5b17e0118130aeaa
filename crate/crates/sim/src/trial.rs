//! Single trials and seeded batches.

use rayon::prelude::*;
use safestop_core::trajectory::TrajectoryKind;
use safestop_core::Vec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operator::{OperatorParams, Profile, ScriptedOperator};
use crate::scenario::{
    generate_forest, generate_two_pillar_arena, generate_warehouse, open_field, ForestParams, Scenario, ScenarioError,
    WarehouseParams,
};
use crate::trace::{EventKind, Trace};
use crate::world::{Mode, SimConfig, StopEvent, World, WorldError, WorldEvent};

#[derive(Debug, Error)]
pub enum TrialError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Stop as recorded in a trial summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRecord {
    pub time: f64,
    pub position: Vec3,
    pub speed: f64,
    pub obstacle_distance: f64,
    pub obstacle_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub success: bool,
    pub collided: bool,
    pub duration: f64,
    pub mean_speed: f64,
    pub mean_obstacle_distance: f64,
    pub min_obstacle_distance: f64,
    pub stops_issued: usize,
    pub stop_events: Vec<StopRecord>,
    pub seed: u64,
}

impl TrialResult {
    /// Recompute every metric from a trace. This is the only place metrics
    /// are computed, so a parsed trace log reproduces the live result.
    pub fn from_trace(trace: &Trace, seed: u64) -> Self {
        let mut n = 0usize;
        let mut speed_sum = 0.0;
        let mut dist_sum = 0.0;
        let mut dist_min = f64::INFINITY;
        let mut duration = 0.0;
        for row in trace.ticks() {
            n += 1;
            speed_sum += row.velocity.norm();
            dist_sum += row.nearest_obstacle_dist;
            dist_min = dist_min.min(row.nearest_obstacle_dist);
            duration = row.t;
        }
        let mut collided = false;
        let mut goal = false;
        let mut stop_events = Vec::new();
        for (kind, row) in trace.events() {
            match kind {
                EventKind::Collision => collided = true,
                EventKind::Goal => goal = true,
                EventKind::Stop | EventKind::StopFallback => stop_events.push(StopRecord {
                    time: row.t,
                    position: row.position,
                    speed: row.velocity.norm(),
                    obstacle_distance: row.worst_dist.unwrap_or(f64::NAN),
                    obstacle_angle: row.worst_angle.unwrap_or(f64::NAN),
                }),
                EventKind::Timeout => {}
            }
        }
        let n_f = n.max(1) as f64;
        Self {
            success: goal && !collided,
            collided,
            duration,
            mean_speed: speed_sum / n_f,
            mean_obstacle_distance: dist_sum / n_f,
            min_obstacle_distance: dist_min,
            stops_issued: stop_events.len(),
            stop_events,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub result: TrialResult,
    pub trace: Trace,
    pub monitoring_enabled: bool,
}

/// Everything besides the scenario that a trial depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialSetup {
    pub sim: SimConfig,
    pub operator: OperatorParams,
    pub profile: Profile,
    /// seconds
    pub timeout: f64,
}

impl Default for TrialSetup {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            operator: OperatorParams::default(),
            profile: Profile::Aggressive,
            timeout: 120.0,
        }
    }
}

/// Run one trial to goal, collision or timeout.
pub fn run_trial(
    scenario: &Scenario,
    setup: &TrialSetup,
    monitoring_enabled: bool,
    seed: u64,
) -> Result<TrialOutcome, TrialError> {
    scenario.validate(setup.sim.feasibility.clearance_radius)?;
    let map = scenario.build_map()?;
    let mut world = World::new(scenario.clone(), map, setup.sim.clone(), monitoring_enabled, seed)?;
    let mut operator = ScriptedOperator::new(setup.profile, setup.operator, seed);
    let mut trace = Trace::default();
    trace.push_tick(crate::world::TraceRow {
        t: 0.0,
        mode: Mode::Teleop,
        position: world.state.position,
        velocity: world.state.velocity,
        yaw: world.state.yaw,
        nearest_obstacle_dist: world.nearest_obstacle_distance(),
        stop_cost_min: None,
        worst_dist: None,
        worst_angle: None,
    });
    let dt = world.dt();
    let max_ticks = (setup.timeout / dt).round() as u64;
    while world.tick < max_ticks {
        let active = world.mode == Mode::Teleop;
        let cmd = operator.command(&world.state, &world.scenario, &world.map, world.time, dt, active);
        let (events, row) = world.step(&cmd);
        trace.push_tick(row);
        for e in &events {
            match e {
                WorldEvent::Stop(stop) => {
                    operator.notify_stop(&world.state, &world.scenario, &world.map);
                    trace.push_event(stop_row(&row, stop), stop_kind(stop));
                }
                WorldEvent::Collision { distance, .. } => {
                    let mut r = row;
                    r.nearest_obstacle_dist = *distance;
                    trace.push_event(r, EventKind::Collision);
                }
                WorldEvent::GoalReached { .. } => trace.push_event(row, EventKind::Goal),
                WorldEvent::ModeChange { .. } => {}
            }
        }
        if world.finished() {
            break;
        }
    }
    if !world.finished() {
        let last = trace.records.last().expect("trace has the initial row").row;
        trace.push_event(last, EventKind::Timeout);
    }
    Ok(TrialOutcome {
        result: TrialResult::from_trace(&trace, seed),
        trace,
        monitoring_enabled,
    })
}

fn stop_kind(stop: &StopEvent) -> EventKind {
    match stop.kind {
        TrajectoryKind::Polynomial => EventKind::Stop,
        TrajectoryKind::FallbackBrake => EventKind::StopFallback,
    }
}

fn stop_row(row: &crate::world::TraceRow, stop: &StopEvent) -> crate::world::TraceRow {
    let mut r = *row;
    r.stop_cost_min = Some(stop.cost);
    r.worst_dist = Some(stop.obstacle_distance);
    r.worst_angle = Some(stop.obstacle_angle);
    r
}

/// How a batch obtains its scenario for each seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum ScenarioSpec {
    Forest(ForestParams),
    Warehouse(WarehouseParams),
    TwoPillarArena,
    OpenField {
        distance: f64,
    },
    /// A fixed scenario, the same for every seed.
    Fixed {
        scenario: Box<Scenario>,
    },
}

impl ScenarioSpec {
    pub fn scenario(&self, seed: u64) -> Result<Scenario, ScenarioError> {
        match self {
            ScenarioSpec::Forest(p) => generate_forest(seed, p),
            ScenarioSpec::Warehouse(p) => generate_warehouse(seed, p),
            ScenarioSpec::TwoPillarArena => Ok(generate_two_pillar_arena()),
            ScenarioSpec::OpenField { distance } => Ok(open_field(*distance)),
            ScenarioSpec::Fixed { scenario } => Ok((**scenario).clone()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ScenarioSpec::Forest(_) => "forest",
            ScenarioSpec::Warehouse(_) => "warehouse",
            ScenarioSpec::TwoPillarArena => "two_pillar_arena",
            ScenarioSpec::OpenField { .. } => "open_field",
            ScenarioSpec::Fixed { .. } => "fixed",
        }
    }
}

/// Run `seeds` in each monitoring mode, in parallel. Results come back
/// ordered by mode (as given), then seed.
pub fn run_batch(
    spec: &ScenarioSpec,
    setup: &TrialSetup,
    modes: &[bool],
    seeds: &[u64],
) -> Result<Vec<TrialOutcome>, TrialError> {
    let jobs: Vec<(bool, u64)> = modes.iter().flat_map(|m| seeds.iter().map(move |s| (*m, *s))).collect();
    jobs.par_iter()
        .map(|&(enabled, seed)| {
            let scenario = spec.scenario(seed)?;
            run_trial(&scenario, setup, enabled, seed)
        })
        .collect()
}
