//! Comma-separated trace logs.
//!
//! One row per tick, columns
//! `t,mode,px,py,pz,vx,vy,vz,yaw,nearest_obstacle_dist,stop_cost_min,event,worst_dist,worst_angle`.
//! Events are extra rows after the tick that raised them, with the `event`
//! column set. Monitor columns are blank on ticks where the monitor did not
//! evaluate any point. Floats use Rust's shortest round-trip formatting, so
//! parsing a trace reproduces the values bit for bit.

use std::fmt::Write as _;
use std::io::BufRead;

use safestop_core::Vec3;
use thiserror::Error;

use crate::world::{Mode, TraceRow};

pub const TRACE_HEADER: &str =
    "t,mode,px,py,pz,vx,vy,vz,yaw,nearest_obstacle_dist,stop_cost_min,event,worst_dist,worst_angle";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing or unexpected header")]
    Header,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Stop,
    StopFallback,
    Collision,
    Goal,
    Timeout,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Stop => "stop",
            EventKind::StopFallback => "stop_fallback",
            EventKind::Collision => "collision",
            EventKind::Goal => "goal",
            EventKind::Timeout => "timeout",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "stop" => EventKind::Stop,
            "stop_fallback" => EventKind::StopFallback,
            "collision" => EventKind::Collision,
            "goal" => EventKind::Goal,
            "timeout" => EventKind::Timeout,
            _ => return None,
        })
    }

    pub fn is_stop(self) -> bool {
        matches!(self, EventKind::Stop | EventKind::StopFallback)
    }
}

/// A trace line: a tick, or an event flagged on top of tick-shaped data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub row: TraceRow,
    pub event: Option<EventKind>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn push_tick(&mut self, row: TraceRow) {
        self.records.push(TraceRecord { row, event: None });
    }

    pub fn push_event(&mut self, row: TraceRow, kind: EventKind) {
        self.records.push(TraceRecord { row, event: Some(kind) });
    }

    pub fn ticks(&self) -> impl Iterator<Item = &TraceRow> {
        self.records.iter().filter(|r| r.event.is_none()).map(|r| &r.row)
    }

    pub fn events(&self) -> impl Iterator<Item = (EventKind, &TraceRow)> {
        self.records.iter().filter_map(|r| r.event.map(|e| (e, &r.row)))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 120);
        out.push_str(TRACE_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let row = &r.row;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.t,
                row.mode.as_str(),
                row.position.x,
                row.position.y,
                row.position.z,
                row.velocity.x,
                row.velocity.y,
                row.velocity.z,
                row.yaw,
                row.nearest_obstacle_dist,
                opt(row.stop_cost_min),
                r.event.map_or("", |e| e.as_str()),
                opt(row.worst_dist),
                opt(row.worst_angle),
            );
        }
        out
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, TraceError> {
        let mut lines = reader.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim_end() == TRACE_HEADER => {}
            Some(Err(e)) => return Err(e.into()),
            _ => return Err(TraceError::Header),
        }
        let mut trace = Trace::default();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let n = i + 2;
            let err = |message: String| TraceError::Parse { line: n, message };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 14 {
                return Err(err(format!("expected 14 columns, found {}", cols.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("'{s}': {e}")));
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            let row = TraceRow {
                t: num(cols[0])?,
                mode: Mode::parse(cols[1]).ok_or_else(|| err(format!("unknown mode '{}'", cols[1])))?,
                position: Vec3::new(num(cols[2])?, num(cols[3])?, num(cols[4])?),
                velocity: Vec3::new(num(cols[5])?, num(cols[6])?, num(cols[7])?),
                yaw: num(cols[8])?,
                nearest_obstacle_dist: num(cols[9])?,
                stop_cost_min: opt(cols[10])?,
                worst_dist: opt(cols[12])?,
                worst_angle: opt(cols[13])?,
            };
            let event = if cols[11].is_empty() {
                None
            } else {
                Some(EventKind::parse(cols[11]).ok_or_else(|| err(format!("unknown event '{}'", cols[11])))?)
            };
            trace.records.push(TraceRecord { row, event });
        }
        Ok(trace)
    }
}
