//! `report`: stop/no-stop scatter data, stop-cost series and a linear
//! separability summary, computed from a directory of trace logs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use safestop_core::MonitorConfig;
use safestop_sim::{Trace, TraceRecord};
use serde::Serialize;
use thiserror::Error;

use crate::summary::{read_trace_dir, TraceDirError};

pub const SCATTER_FILE: &str = "scatter.csv";
pub const STOP_COST_FILE: &str = "stop_cost.csv";
pub const SEPARABILITY_FILE: &str = "separability.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Traces(#[from] TraceDirError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    /// Speed band (m/s, inclusive) for the separability fit.
    pub speed_band: (f64, f64),
    pub min_speed: f64,
    /// Directions tried by the coarse classifier sweep.
    pub directions: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            speed_band: (1.0, 2.0),
            min_speed: MonitorConfig::default().min_speed,
            directions: 720,
        }
    }
}

/// One monitor evaluation: the minimum-cost point and whether it triggered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub t: f64,
    pub distance: f64,
    pub angle: f64,
    pub speed: f64,
    pub triggered: bool,
}

/// Monitor ticks of a trace, in time order.
pub fn scatter_points(trace: &Trace) -> Vec<ScatterPoint> {
    let recs = &trace.records;
    let mut out = Vec::new();
    for (i, r) in recs.iter().enumerate() {
        if r.event.is_some() {
            continue;
        }
        let (Some(distance), Some(angle)) = (r.row.worst_dist, r.row.worst_angle) else {
            continue;
        };
        let triggered = recs[i + 1..]
            .iter()
            .take_while(|n: &&TraceRecord| n.event.is_some())
            .any(|n| n.event.is_some_and(|e| e.is_stop()));
        out.push(ScatterPoint {
            t: r.row.t,
            distance,
            angle,
            speed: r.row.velocity.norm(),
            triggered,
        });
    }
    out
}

/// Best linear classifier `w · x < c ⇒ stop` on two features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearBoundary {
    pub distance_weight: f64,
    pub angle_weight: f64,
    pub offset: f64,
    pub accuracy: f64,
}

/// Exhaustive search over directions and thresholds. Features are
/// standardized first; `directions` evenly spaced directions over the full
/// circle are scanned, then the best one is refined locally. Returns `None`
/// unless both classes are present.
pub fn fit_linear(points: &[(f64, f64, bool)], directions: usize) -> Option<LinearBoundary> {
    let pos = points.iter().filter(|p| p.2).count();
    if pos == 0 || pos == points.len() {
        return None;
    }
    let stats = |f: &dyn Fn(&(f64, f64, bool)) -> f64| {
        let n = points.len() as f64;
        let m = points.iter().map(f).sum::<f64>() / n;
        let s = (points.iter().map(|p| (f(p) - m).powi(2)).sum::<f64>() / n).sqrt();
        (m, if s > 0.0 { s } else { 1.0 })
    };
    let (mx, sx) = stats(&|p| p.0);
    let (my, sy) = stats(&|p| p.1);
    let z: Vec<(f64, f64, bool)> = points.iter().map(|p| ((p.0 - mx) / sx, (p.1 - my) / sy, p.2)).collect();

    let eval = |phi: f64| -> (usize, f64) {
        let (s, c) = phi.sin_cos();
        let mut proj: Vec<(f64, bool)> = z.iter().map(|p| (c * p.0 + s * p.1, p.2)).collect();
        proj.sort_by(|a, b| a.0.total_cmp(&b.0));
        // threshold below everything: all predicted negative
        let negatives = proj.len() - pos;
        let mut correct = negatives;
        let (mut best, mut best_thr) = (correct, proj[0].0 - 1.0);
        let mut i = 0;
        while i < proj.len() {
            let v = proj[i].0;
            while i < proj.len() && proj[i].0 == v {
                if proj[i].1 {
                    correct += 1;
                } else {
                    correct -= 1;
                }
                i += 1;
            }
            if correct > best {
                best = correct;
                best_thr = if i < proj.len() { 0.5 * (v + proj[i].0) } else { v + 1.0 };
            }
        }
        (best, best_thr)
    };

    let step = std::f64::consts::TAU / directions.max(4) as f64;
    let mut best = (0usize, 0.0f64, 0.0f64);
    for k in 0..directions.max(4) {
        let phi = k as f64 * step;
        let (c, thr) = eval(phi);
        if c > best.0 {
            best = (c, phi, thr);
        }
    }
    let center = best.1;
    for k in 0..=200 {
        let phi = center - step + 2.0 * step * k as f64 / 200.0;
        let (c, thr) = eval(phi);
        if c > best.0 {
            best = (c, phi, thr);
        }
    }
    let (correct, phi, thr) = best;
    let (s, c) = phi.sin_cos();
    // back to original units: c (d - mx) / sx + s (a - my) / sy < thr
    let distance_weight = c / sx;
    let angle_weight = s / sy;
    Some(LinearBoundary {
        distance_weight,
        angle_weight,
        offset: thr + distance_weight * mx + angle_weight * my,
        accuracy: correct as f64 / points.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Separability {
    pub traces: usize,
    pub monitor_ticks: usize,
    pub triggers: usize,
    /// Slowest speed at which any stop was triggered, m/s.
    pub min_trigger_speed: Option<f64>,
    pub min_speed: f64,
    pub triggers_below_min_speed: usize,
    pub speed_band: (f64, f64),
    pub band_samples: usize,
    pub band_triggers: usize,
    /// `null` when the band holds only one class.
    pub accuracy: Option<f64>,
    pub boundary: Option<LinearBoundary>,
    pub notice: Option<String>,
}

#[derive(Debug)]
pub struct ReportOutput {
    pub separability: Separability,
    pub files: Vec<PathBuf>,
}

pub fn report(in_dir: &Path, out_dir: &Path, opts: &ReportOptions) -> Result<ReportOutput, ReportError> {
    let traces = read_trace_dir(in_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|e| ReportError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;

    let mut scatter = String::from("trace,t,distance,angle,speed,triggered\n");
    let mut series = String::from("trace,t,stop_cost_min,stop\n");
    let mut all = Vec::new();
    for f in &traces {
        let name = f.path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let points = scatter_points(&f.trace);
        for p in &points {
            let _ = writeln!(
                scatter,
                "{name},{},{},{},{},{}",
                p.t, p.distance, p.angle, p.speed, p.triggered as u8
            );
        }
        let mut recs = f.trace.records.iter().peekable();
        while let Some(r) = recs.next() {
            if r.event.is_some() {
                continue;
            }
            let stop = recs.peek().is_some_and(|n| n.event.is_some_and(|e| e.is_stop()));
            if let Some(c) = r.row.stop_cost_min {
                let _ = writeln!(series, "{name},{},{c},{}", r.row.t, stop as u8);
            }
        }
        all.extend(points);
    }

    let (lo, hi) = opts.speed_band;
    let band: Vec<(f64, f64, bool)> = all
        .iter()
        .filter(|p| p.speed >= lo && p.speed <= hi)
        .map(|p| (p.distance, p.angle, p.triggered))
        .collect();
    let triggered: Vec<&ScatterPoint> = all.iter().filter(|p| p.triggered).collect();
    let boundary = fit_linear(&band, opts.directions);
    let notice = if traces.is_empty() {
        Some(format!("empty report: no trace logs in {}", in_dir.display()))
    } else if boundary.is_none() {
        Some("separability undefined: the speed band does not contain both stop and no-stop samples".to_string())
    } else {
        None
    };
    let separability = Separability {
        traces: traces.len(),
        monitor_ticks: all.len(),
        triggers: triggered.len(),
        min_trigger_speed: triggered.iter().map(|p| p.speed).reduce(f64::min),
        min_speed: opts.min_speed,
        triggers_below_min_speed: triggered.iter().filter(|p| p.speed < opts.min_speed).count(),
        speed_band: opts.speed_band,
        band_samples: band.len(),
        band_triggers: band.iter().filter(|p| p.2).count(),
        accuracy: boundary.map(|b| b.accuracy),
        boundary,
        notice,
    };

    let mut files = Vec::new();
    let mut write = |name: &str, body: String| -> Result<(), ReportError> {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(|e| ReportError::Io {
            path: path.clone(),
            source: e,
        })?;
        files.push(path);
        Ok(())
    };
    write(SCATTER_FILE, scatter)?;
    write(STOP_COST_FILE, series)?;
    let json = serde_json::to_string_pretty(&separability).expect("report serializes") + "\n";
    write(SEPARABILITY_FILE, json)?;
    Ok(ReportOutput { separability, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_data_is_fit_exactly() {
        // stop iff d + 2a < 3
        let mut pts = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                let (d, a) = (i as f64 * 0.1, j as f64 * 0.04);
                if (d + 2.0 * a - 3.0).abs() > 1e-6 {
                    pts.push((d, a, d + 2.0 * a < 3.0));
                }
            }
        }
        let b = fit_linear(&pts, 720).unwrap();
        assert_eq!(b.accuracy, 1.0);
        for p in &pts {
            let pred = b.distance_weight * p.0 + b.angle_weight * p.1 < b.offset;
            assert_eq!(pred, p.2);
        }
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(fit_linear(&[(1.0, 0.1, false), (2.0, 0.3, false)], 90).is_none());
        assert!(fit_linear(&[], 90).is_none());
    }

    #[test]
    fn accuracy_counts_the_best_threshold() {
        // one mislabeled point in 1-D
        let pts = vec![
            (0.0, 0.0, true),
            (1.0, 0.0, true),
            (2.0, 0.0, false),
            (3.0, 0.0, true),
            (4.0, 0.0, false),
        ];
        let b = fit_linear(&pts, 360).unwrap();
        assert_eq!(b.accuracy, 0.8);
    }
}
