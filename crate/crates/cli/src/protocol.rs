//! Teleoperation wire protocol.
//!
//! Every message is one JSON text frame carrying `"proto": 1`, a sequence
//! number `seq` that strictly increases per direction, and a `type` tag.
//!
//! Client to server: `command`, `reset`, `toggle_monitoring`.
//! Server to client: `hello` (once, on connect), `snapshot` (fixed rate),
//! `event` (pushed as soon as it happens) and `error` (sent before the
//! server closes a connection that violated the protocol).

use safestop_core::trajectory::TrajectorySample;
use safestop_core::{Vec3, VehicleState};
use safestop_sim::{Mode, OperatorCommand, Scenario};
use serde::{Deserialize, Serialize};

pub const PROTO: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientEnvelope {
    pub proto: u32,
    pub seq: u64,
    #[serde(flatten)]
    pub message: ClientMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Command {
        commanded_velocity: Vec3,
        commanded_yaw_rate: f64,
        timestamp: f64,
    },
    Reset,
    ToggleMonitoring,
}

impl ClientMessage {
    pub fn command(cmd: &OperatorCommand) -> Self {
        ClientMessage::Command {
            commanded_velocity: cmd.commanded_velocity,
            commanded_yaw_rate: cmd.commanded_yaw_rate,
            timestamp: cmd.timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerEnvelope {
    pub proto: u32,
    pub seq: u64,
    #[serde(flatten)]
    pub message: ServerMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello(Hello),
    Snapshot(Snapshot),
    Event(EventNotice),
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub scenario: Scenario,
    /// Simulation tick, seconds.
    pub dt: f64,
    /// Snapshot broadcast rate, Hz.
    pub snapshot_rate: f64,
    /// Stop threshold of the monitor.
    pub beta: f64,
    /// Commands older than this are replaced by a zero command, seconds.
    pub command_hold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub state: VehicleState,
    pub mode: Mode,
    pub monitoring_enabled: bool,
    pub stop_cost_min: Option<f64>,
    /// At most 50 points, nearest first.
    pub nearest_obstacles: Vec<Vec3>,
    /// Remaining samples of the stop trajectory being executed, if any.
    pub stop_trajectory: Option<Vec<TrajectorySample>>,
    pub collided: bool,
    pub goal_reached: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Stop,
    StopFallback,
    Collision,
    Goal,
    MonitoringToggled,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventNotice {
    pub t: f64,
    pub event: EventKind,
    pub position: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitoring_enabled: Option<bool>,
    /// Full stop trajectory, for stop events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectorySample>>,
}

impl EventNotice {
    pub fn new(t: f64, event: EventKind, position: Vec3) -> Self {
        Self {
            t,
            event,
            position,
            speed: None,
            obstacle_distance: None,
            obstacle_angle: None,
            stop_cost: None,
            monitoring_enabled: None,
            trajectory: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolViolation {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported proto {0}, expected {PROTO}")]
    Proto(u32),
    #[error("sequence number {got} does not increase (last {last})")]
    Sequence { got: u64, last: u64 },
    #[error("binary frames are not part of the protocol")]
    Binary,
    #[error("command is not finite")]
    NonFinite,
}

/// Per-connection validation of incoming client frames.
#[derive(Debug, Default)]
pub struct ClientValidator {
    last_seq: Option<u64>,
}

impl ClientValidator {
    pub fn accept(&mut self, text: &str) -> Result<ClientMessage, ProtocolViolation> {
        let env: ClientEnvelope =
            serde_json::from_str(text).map_err(|e| ProtocolViolation::Malformed(e.to_string()))?;
        if env.proto != PROTO {
            return Err(ProtocolViolation::Proto(env.proto));
        }
        if let Some(last) = self.last_seq {
            if env.seq <= last {
                return Err(ProtocolViolation::Sequence { got: env.seq, last });
            }
        }
        self.last_seq = Some(env.seq);
        if let ClientMessage::Command {
            commanded_velocity,
            commanded_yaw_rate,
            timestamp,
        } = &env.message
        {
            let finite = commanded_velocity.iter().all(|v| v.is_finite())
                && commanded_yaw_rate.is_finite()
                && timestamp.is_finite();
            if !finite {
                return Err(ProtocolViolation::NonFinite);
            }
        }
        Ok(env.message)
    }
}
