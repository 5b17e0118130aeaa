//! Command-line front end of the safe-stop simulator: seeded batch runs,
//! reports over trace logs, and a live websocket teleoperation service.

pub mod config;
pub mod protocol;
pub mod report;
pub mod run;
pub mod serve;
pub mod summary;

pub use config::{ConfigError, Monitoring, RunConfig};
