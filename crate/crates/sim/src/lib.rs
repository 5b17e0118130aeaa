//! Closed-loop simulation of a teleoperated multirotor with the stop
//! pipeline in the loop: procedural scenarios, scripted operators, the
//! fixed-step world, trace logs and batch trials.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod operator;
pub mod scenario;
pub mod trace;
pub mod trial;
pub mod world;

pub use operator::{OperatorCommand, OperatorParams, Profile, ScriptedOperator};
pub use scenario::{ForestParams, Scenario, ScenarioError, Solid, WarehouseParams};
pub use trace::{EventKind, Trace, TraceError, TraceRecord, TRACE_HEADER};
pub use trial::{run_batch, run_trial, ScenarioSpec, TrialError, TrialOutcome, TrialResult, TrialSetup};
pub use world::{Mode, SimConfig, StopEvent, TraceRow, World, WorldConfig, WorldError, WorldEvent};
