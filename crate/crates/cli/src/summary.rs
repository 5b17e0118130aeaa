//! Batch summary tables and the trace directory layout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use safestop_sim::{Trace, TraceError, TrialResult};

pub const SUMMARY_FILE: &str = "summary.csv";

pub const SUMMARY_HEADER: &str = "scenario,monitoring,trials,success_rate,collision_rate,\
velocity_mean,velocity_sd,distance_mean,distance_sd,min_distance_mean,min_distance_sd,\
stops_mean,stops_sd,trigger_velocity_mean,trigger_velocity_sd,trigger_distance_mean,trigger_distance_sd";

pub fn trace_file_name(monitoring_enabled: bool, seed: u64) -> String {
    format!("trace_{}_seed{seed:06}.csv", mode_label(monitoring_enabled))
}

/// Inverse of [`trace_file_name`].
pub fn parse_trace_file_name(name: &str) -> Option<(bool, u64)> {
    let rest = name.strip_prefix("trace_")?.strip_suffix(".csv")?;
    let (mode, seed) = rest.split_once("_seed")?;
    let enabled = match mode {
        "enabled" => true,
        "disabled" => false,
        _ => return None,
    };
    Some((enabled, seed.parse().ok()?))
}

pub fn mode_label(monitoring_enabled: bool) -> &'static str {
    if monitoring_enabled {
        "enabled"
    } else {
        "disabled"
    }
}

/// Sample mean and standard deviation (n - 1 denominator). `None` for no
/// data; the deviation of a single value is 0.
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub monitoring_enabled: bool,
    pub trials: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub velocity: Option<(f64, f64)>,
    pub distance: Option<(f64, f64)>,
    pub min_distance: Option<(f64, f64)>,
    pub stops: Option<(f64, f64)>,
    pub trigger_velocity: Option<(f64, f64)>,
    pub trigger_distance: Option<(f64, f64)>,
}

impl SummaryRow {
    /// Aggregate trial results of one monitoring mode, in seed order.
    pub fn from_results(scenario: &str, monitoring_enabled: bool, results: &[&TrialResult]) -> Self {
        let n = results.len().max(1) as f64;
        let col = |f: &dyn Fn(&TrialResult) -> f64| results.iter().map(|r| f(r)).collect::<Vec<_>>();
        let triggers: Vec<_> = results.iter().flat_map(|r| r.stop_events.iter()).collect();
        Self {
            scenario: scenario.to_string(),
            monitoring_enabled,
            trials: results.len(),
            success_rate: results.iter().filter(|r| r.success).count() as f64 / n,
            collision_rate: results.iter().filter(|r| r.collided).count() as f64 / n,
            velocity: mean_sd(&col(&|r| r.mean_speed)),
            distance: mean_sd(&col(&|r| r.mean_obstacle_distance)),
            min_distance: mean_sd(&col(&|r| r.min_obstacle_distance)),
            stops: mean_sd(&col(&|r| r.stops_issued as f64)),
            trigger_velocity: mean_sd(&triggers.iter().map(|s| s.speed).collect::<Vec<_>>()),
            trigger_distance: mean_sd(
                &triggers
                    .iter()
                    .map(|s| s.obstacle_distance)
                    .filter(|d| d.is_finite())
                    .collect::<Vec<_>>(),
            ),
        }
    }

    fn write(&self, out: &mut String) {
        let pair = |v: Option<(f64, f64)>| v.map_or(",".to_string(), |(m, s)| format!("{m},{s}"));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            mode_label(self.monitoring_enabled),
            self.trials,
            self.success_rate,
            self.collision_rate,
            pair(self.velocity),
            pair(self.distance),
            pair(self.min_distance),
            pair(self.stops),
            pair(self.trigger_velocity),
            pair(self.trigger_distance),
        );
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        r.write(&mut out);
    }
    out
}

/// One row per monitoring mode present, enabled first.
pub fn summarize(scenario: &str, results: &[(bool, TrialResult)]) -> Vec<SummaryRow> {
    [true, false]
        .iter()
        .filter_map(|&mode| {
            let of_mode: Vec<&TrialResult> = results.iter().filter(|(m, _)| *m == mode).map(|(_, r)| r).collect();
            (!of_mode.is_empty()).then(|| SummaryRow::from_results(scenario, mode, &of_mode))
        })
        .collect()
}

#[derive(Debug)]
pub struct TraceFile {
    pub path: PathBuf,
    pub monitoring_enabled: bool,
    pub seed: u64,
    pub trace: Trace,
}

/// All trace logs in `dir`, ordered by monitoring mode (enabled first) then seed.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<TraceFile>, TraceDirError> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| TraceDirError::Io {
        path: dir.to_path_buf(),
        source: e,
    })? {
        let entry = entry.map_err(|e| TraceDirError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let name = entry.file_name();
        let Some((enabled, seed)) = name.to_str().and_then(parse_trace_file_name) else {
            continue;
        };
        let path = entry.path();
        let file = std::fs::File::open(&path).map_err(|e| TraceDirError::Io {
            path: path.clone(),
            source: e,
        })?;
        let trace = Trace::from_reader(std::io::BufReader::new(file)).map_err(|e| TraceDirError::Trace {
            path: path.clone(),
            source: e,
        })?;
        files.push(TraceFile {
            path,
            monitoring_enabled: enabled,
            seed,
            trace,
        });
    }
    files.sort_by_key(|f| (!f.monitoring_enabled, f.seed));
    Ok(files)
}

#[derive(Debug, thiserror::Error)]
pub enum TraceDirError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Trace { path: PathBuf, source: TraceError },
}

/// Recompute the summary of a run directory from its trace logs alone.
pub fn summarize_trace_dir(scenario: &str, dir: &Path) -> Result<String, TraceDirError> {
    let results: Vec<(bool, TrialResult)> = read_trace_dir(dir)?
        .iter()
        .map(|f| (f.monitoring_enabled, TrialResult::from_trace(&f.trace, f.seed)))
        .collect();
    Ok(summary_csv(&summarize(scenario, &results)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names_round_trip() {
        for (m, s) in [(true, 0), (false, 123_456_789)] {
            assert_eq!(parse_trace_file_name(&trace_file_name(m, s)), Some((m, s)));
        }
        assert_eq!(parse_trace_file_name("summary.csv"), None);
        assert_eq!(parse_trace_file_name("trace_maybe_seed1.csv"), None);
    }

    #[test]
    fn mean_and_sample_sd() {
        assert_eq!(mean_sd(&[]), None);
        assert_eq!(mean_sd(&[2.0]), Some((2.0, 0.0)));
        let (m, s) = mean_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn header_has_one_column_per_value() {
        let row = SummaryRow {
            scenario: "x".into(),
            monitoring_enabled: true,
            trials: 1,
            success_rate: 1.0,
            collision_rate: 0.0,
            velocity: Some((1.0, 0.0)),
            distance: None,
            min_distance: None,
            stops: Some((0.0, 0.0)),
            trigger_velocity: None,
            trigger_distance: None,
        };
        let csv = summary_csv(&[row]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    }
}
