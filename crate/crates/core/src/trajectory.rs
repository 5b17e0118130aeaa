//! Polynomial stopping trajectories.
//!
//! Each axis (x, y, z, yaw) gets a degree-7 polynomial that matches the
//! current position, velocity, acceleration and jerk at `t = 0` and reaches
//! the escape point at rest (zero velocity, acceleration and jerk) at `t = T`.
//! Candidates are tried in cost order; the first one that is collision-free
//! and inside the acceleration bound is returned. When none qualifies, a
//! straight-line constant-deceleration brake is used instead.

use std::io::Write;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::escape::{sample_escape_points, EscapeCandidate, EscapeConfig};
use crate::geometry::{Vec3, VehicleState};
use crate::map::ObstacleMap;

/// Number of polynomial coefficients per axis.
pub const COEFFS: usize = 8;
/// Shortest duration the boundary solver accepts, seconds.
pub const MIN_DURATION: f64 = 1e-6;
/// Highest derivative order [`StopTrajectory::evaluate`] supports.
pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("duration {0} is too short or not finite")]
    InvalidDuration(f64),
    #[error("boundary values must be finite")]
    NonFiniteBoundary,
    #[error("boundary system is singular or ill-conditioned")]
    Singular,
    #[error("time {t} is outside [0, {duration}]")]
    OutOfDomain { t: f64, duration: f64 },
    #[error("derivative order {0} is not supported")]
    UnsupportedOrder(usize),
    #[error("invalid feasibility config: {0}")]
    InvalidConfig(&'static str),
}

/// Boundary values for one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBoundary {
    pub p0: f64,
    pub v0: f64,
    pub a0: f64,
    pub j0: f64,
    pub pf: f64,
    pub duration: f64,
}

/// Polynomial `sum c[i] * t^i` on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolySegment {
    pub coefficients: [f64; COEFFS],
    pub duration: f64,
}

impl PolySegment {
    pub fn constant(value: f64, duration: f64) -> Self {
        let mut coefficients = [0.0; COEFFS];
        coefficients[0] = value;
        Self { coefficients, duration }
    }

    /// `order`-th derivative at `t`. No domain check.
    pub fn derivative(&self, t: f64, order: usize) -> f64 {
        if order >= COEFFS {
            return 0.0;
        }
        // Horner on the differentiated coefficients.
        let mut acc = 0.0;
        for k in (order..COEFFS).rev() {
            acc = acc * t + falling_factorial(k, order) * self.coefficients[k];
        }
        acc
    }
}

fn falling_factorial(k: usize, order: usize) -> f64 {
    ((k - order + 1)..=k).map(|i| i as f64).product()
}

/// Solve for the degree-7 polynomial meeting the eight boundary constraints.
///
/// The system is solved in normalized time `tau = t / T` and the
/// coefficients rescaled afterwards; positions are taken relative to `p0`.
pub fn solve_axis(b: &AxisBoundary) -> Result<PolySegment, TrajectoryError> {
    let t = b.duration;
    if !(t >= MIN_DURATION && t.is_finite()) {
        return Err(TrajectoryError::InvalidDuration(t));
    }
    if ![b.p0, b.v0, b.a0, b.j0, b.pf].iter().all(|v| v.is_finite()) {
        return Err(TrajectoryError::NonFiniteBoundary);
    }

    let mut m = SMatrix::<f64, COEFFS, COEFFS>::zeros();
    for order in 0..4 {
        m[(order, order)] = falling_factorial(order, order);
        for k in order..COEFFS {
            m[(4 + order, k)] = falling_factorial(k, order);
        }
    }
    let rhs = SVector::<f64, COEFFS>::from_column_slice(&[
        0.0,
        b.v0 * t,
        b.a0 * t * t,
        b.j0 * t * t * t,
        b.pf - b.p0,
        0.0,
        0.0,
        0.0,
    ]);
    let normalized = m.lu().solve(&rhs).ok_or(TrajectoryError::Singular)?;

    let mut coefficients = [0.0; COEFFS];
    let mut scale = 1.0;
    for (k, c) in coefficients.iter_mut().enumerate() {
        *c = normalized[k] / scale;
        scale *= t;
    }
    coefficients[0] += b.p0;
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(TrajectoryError::Singular);
    }
    Ok(PolySegment {
        coefficients,
        duration: t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Polynomial,
    FallbackBrake,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopTrajectory {
    /// x, y, z, yaw
    pub axes: [PolySegment; 4],
    pub duration: f64,
    pub escape_point: Option<Vec3>,
    pub kind: TrajectoryKind,
}

/// One sampled point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub yaw: f64,
}

impl StopTrajectory {
    /// Translational derivative of `order` and the matching yaw derivative at `t`.
    pub fn evaluate(&self, t: f64, order: usize) -> Result<(Vec3, f64), TrajectoryError> {
        if order > MAX_ORDER {
            return Err(TrajectoryError::UnsupportedOrder(order));
        }
        if !(0.0..=self.duration).contains(&t) {
            return Err(TrajectoryError::OutOfDomain {
                t,
                duration: self.duration,
            });
        }
        Ok(self.evaluate_unchecked(t, order))
    }

    pub(crate) fn evaluate_unchecked(&self, t: f64, order: usize) -> (Vec3, f64) {
        let [x, y, z, yaw] = &self.axes;
        (
            Vec3::new(x.derivative(t, order), y.derivative(t, order), z.derivative(t, order)),
            yaw.derivative(t, order),
        )
    }

    /// Kinematic state at `t`, clamped into `[0, T]`.
    pub fn state_at(&self, t: f64) -> VehicleState {
        let t = t.clamp(0.0, self.duration);
        let (position, yaw) = self.evaluate_unchecked(t, 0);
        let (velocity, yaw_rate) = self.evaluate_unchecked(t, 1);
        let (acceleration, yaw_accel) = self.evaluate_unchecked(t, 2);
        let (jerk, yaw_jerk) = self.evaluate_unchecked(t, 3);
        VehicleState {
            position,
            velocity,
            acceleration,
            jerk,
            yaw: crate::geometry::normalize_angle(yaw),
            yaw_rate,
            yaw_accel,
            yaw_jerk,
        }
    }

    pub fn samples(&self, dt: f64) -> Vec<TrajectorySample> {
        sample_times(self.duration, dt)
            .into_iter()
            .map(|t| {
                let (position, yaw) = self.evaluate_unchecked(t, 0);
                TrajectorySample {
                    t,
                    position,
                    velocity: self.evaluate_unchecked(t, 1).0,
                    acceleration: self.evaluate_unchecked(t, 2).0,
                    yaw,
                }
            })
            .collect()
    }

    /// Comma-separated export with a header row.
    pub fn write_csv<W: Write>(&self, dt: f64, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,px,py,pz,vx,vy,vz,ax,ay,az,yaw")?;
        for s in self.samples(dt) {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                s.t,
                s.position.x,
                s.position.y,
                s.position.z,
                s.velocity.x,
                s.velocity.y,
                s.velocity.z,
                s.acceleration.x,
                s.acceleration.y,
                s.acceleration.z,
                s.yaw
            )?;
        }
        Ok(())
    }
}

/// `0, dt, 2dt, ...` strictly below `duration`, then `duration` itself.
pub fn sample_times(duration: f64, dt: f64) -> Vec<f64> {
    let mut times = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 * dt;
        if t >= duration {
            break;
        }
        times.push(t);
        k += 1;
    }
    times.push(duration);
    times
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeasibilityConfig {
    /// Bound on the acceleration norm, m/s^2.
    pub accel_bound: f64,
    /// Required obstacle clearance along the trajectory, meters.
    pub clearance_radius: f64,
    /// Spacing of the check samples, seconds.
    pub sample_dt: f64,
    /// Duration floor, seconds.
    pub min_duration: f64,
    /// Duration stretch over the constant-speed travel time.
    pub duration_stretch: f64,
    /// Share of `accel_bound` used for braking.
    pub brake_fraction: f64,
    /// Reject trajectories whose speed rises again after its peak.
    pub monotone_speed: bool,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        Self {
            accel_bound: 10.0,
            clearance_radius: 0.3,
            sample_dt: 0.02,
            min_duration: 0.5,
            duration_stretch: 1.5,
            brake_fraction: 0.5,
            monotone_speed: true,
        }
    }
}

impl FeasibilityConfig {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let positive = [
            self.accel_bound,
            self.clearance_radius,
            self.sample_dt,
            self.min_duration,
            self.duration_stretch,
            self.brake_fraction,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
        if !positive {
            return Err(TrajectoryError::InvalidConfig(
                "feasibility parameters must be positive and finite",
            ));
        }
        Ok(())
    }

    fn brake_decel(&self) -> f64 {
        self.brake_fraction * self.accel_bound
    }
}

/// Trajectory duration for a stop at `escape`.
///
/// `max(min_duration, stretch * distance / speed, speed / (brake_fraction * accel_bound))`
pub fn choose_duration(state: &VehicleState, escape: &Vec3, cfg: &FeasibilityConfig) -> f64 {
    let speed = state.velocity.norm();
    let distance = (escape - state.position).norm();
    let travel = if speed > 0.0 {
        cfg.duration_stretch * distance / speed
    } else {
        f64::INFINITY
    };
    cfg.min_duration.max(travel).max(speed / cfg.brake_decel())
}

/// Stopping trajectory from `state` to rest at `escape`, holding the initial yaw.
pub fn solve_stop(state: &VehicleState, escape: &Vec3, duration: f64) -> Result<StopTrajectory, TrajectoryError> {
    let axis = |i: usize| AxisBoundary {
        p0: state.position[i],
        v0: state.velocity[i],
        a0: state.acceleration[i],
        j0: state.jerk[i],
        pf: escape[i],
        duration,
    };
    let yaw = AxisBoundary {
        p0: state.yaw,
        v0: state.yaw_rate,
        a0: state.yaw_accel,
        j0: state.yaw_jerk,
        pf: state.yaw,
        duration,
    };
    Ok(StopTrajectory {
        axes: [
            solve_axis(&axis(0))?,
            solve_axis(&axis(1))?,
            solve_axis(&axis(2))?,
            solve_axis(&yaw)?,
        ],
        duration,
        escape_point: Some(*escape),
        kind: TrajectoryKind::Polynomial,
    })
}

/// True iff every sample keeps at least `clearance_radius` from the map.
pub fn check_collision_free(traj: &StopTrajectory, map: &ObstacleMap, cfg: &FeasibilityConfig) -> bool {
    sample_times(traj.duration, cfg.sample_dt)
        .into_iter()
        .all(|t| map.nearest_distance(&traj.evaluate_unchecked(t, 0).0) >= cfg.clearance_radius)
}

/// True iff the translational acceleration norm stays strictly below the bound.
pub fn check_dynamic_feasibility(traj: &StopTrajectory, cfg: &FeasibilityConfig) -> bool {
    sample_times(traj.duration, cfg.sample_dt)
        .into_iter()
        .all(|t| traj.evaluate_unchecked(t, 2).0.norm() < cfg.accel_bound)
}

/// Constant-deceleration straight-line stop with no goal position.
/// Speed may rise at the start (the vehicle can still be accelerating) but
/// never again once it has peaked. Checked on a grid ten times finer than
/// `sample_dt`.
pub fn check_monotone_speed(traj: &StopTrajectory, cfg: &FeasibilityConfig) -> bool {
    let speeds: Vec<f64> = sample_times(traj.duration, cfg.sample_dt / 10.0)
        .into_iter()
        .map(|t| traj.evaluate_unchecked(t, 1).0.norm())
        .collect();
    let peak = speeds
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > speeds[best] { i } else { best });
    speeds[peak..].windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

pub fn fallback_brake(state: &VehicleState, cfg: &FeasibilityConfig) -> StopTrajectory {
    let speed = state.velocity.norm();
    let hold = |duration: f64| StopTrajectory {
        axes: [
            PolySegment::constant(state.position.x, duration),
            PolySegment::constant(state.position.y, duration),
            PolySegment::constant(state.position.z, duration),
            PolySegment::constant(state.yaw, duration),
        ],
        duration,
        escape_point: None,
        kind: TrajectoryKind::FallbackBrake,
    };
    if speed == 0.0 {
        return hold(0.0);
    }
    let decel = cfg.brake_decel();
    let duration = speed / decel;
    let dir = state.velocity / speed;
    let mut traj = hold(duration);
    for i in 0..3 {
        let axis = &mut traj.axes[i];
        axis.coefficients[1] = state.velocity[i];
        axis.coefficients[2] = -0.5 * decel * dir[i];
    }
    traj
}

/// Everything the planner looked at while picking a stop.
#[derive(Debug, Clone, PartialEq)]
pub struct StopPlan {
    pub trajectory: StopTrajectory,
    /// Stratified candidates in the order they were tried.
    pub candidates: Vec<EscapeCandidate>,
    /// Index into `candidates` of the accepted escape point.
    pub chosen: Option<usize>,
    /// Number of candidate trajectories solved and checked.
    pub attempts: usize,
}

/// Search escape points in cost order and return the first safe, feasible stop.
pub fn plan_stop(
    state: &VehicleState,
    map: &ObstacleMap,
    escape_cfg: &EscapeConfig,
    feas_cfg: &FeasibilityConfig,
) -> StopPlan {
    let candidates = sample_escape_points(state, map, escape_cfg).unwrap_or_default();
    let mut attempts = 0;
    for (i, cand) in candidates.iter().enumerate() {
        attempts += 1;
        let duration = choose_duration(state, &cand.point, feas_cfg);
        let Ok(traj) = solve_stop(state, &cand.point, duration) else {
            continue;
        };
        let monotone = !feas_cfg.monotone_speed || check_monotone_speed(&traj, feas_cfg);
        if check_dynamic_feasibility(&traj, feas_cfg) && monotone && check_collision_free(&traj, map, feas_cfg) {
            return StopPlan {
                trajectory: traj,
                candidates,
                chosen: Some(i),
                attempts,
            };
        }
    }
    StopPlan {
        trajectory: fallback_brake(state, feas_cfg),
        candidates,
        chosen: None,
        attempts,
    }
}

pub fn generate_stop_trajectory(
    state: &VehicleState,
    map: &ObstacleMap,
    escape_cfg: &EscapeConfig,
    feas_cfg: &FeasibilityConfig,
) -> StopTrajectory {
    plan_stop(state, map, escape_cfg, feas_cfg).trajectory
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residuals(b: &AxisBoundary, seg: &PolySegment) -> [f64; 8] {
        let t = b.duration;
        [
            seg.derivative(0.0, 0) - b.p0,
            seg.derivative(0.0, 1) - b.v0,
            seg.derivative(0.0, 2) - b.a0,
            seg.derivative(0.0, 3) - b.j0,
            seg.derivative(t, 0) - b.pf,
            seg.derivative(t, 1),
            seg.derivative(t, 2),
            seg.derivative(t, 3),
        ]
    }

    #[test]
    fn rest_to_rest_zero_displacement_is_constant() {
        let b = AxisBoundary {
            p0: 1.0,
            v0: 0.0,
            a0: 0.0,
            j0: 0.0,
            pf: 1.0,
            duration: 1.0,
        };
        let seg = solve_axis(&b).unwrap();
        assert_eq!(seg.coefficients[0], 1.0);
        assert!(seg.coefficients[1..].iter().all(|c| *c == 0.0));
    }

    #[test]
    fn boundary_residuals_small() {
        let b = AxisBoundary {
            p0: 0.0,
            v0: 1.0,
            a0: 0.0,
            j0: 0.0,
            pf: 0.5,
            duration: 2.0,
        };
        let seg = solve_axis(&b).unwrap();
        for r in residuals(&b, &seg) {
            assert!(r.abs() < 1e-9, "{r}");
        }
    }

    #[test]
    fn scaling_positions_scales_coefficients() {
        let b = AxisBoundary {
            p0: 0.3,
            v0: 0.0,
            a0: 0.0,
            j0: 0.0,
            pf: 1.7,
            duration: 1.3,
        };
        let s = 3.5;
        let scaled = AxisBoundary {
            p0: b.p0 * s,
            pf: b.pf * s,
            ..b
        };
        let a = solve_axis(&b).unwrap();
        let c = solve_axis(&scaled).unwrap();
        for k in 0..COEFFS {
            assert!((a.coefficients[k] * s - c.coefficients[k]).abs() < 1e-9 * (1.0 + c.coefficients[k].abs()));
        }
    }

    #[test]
    fn solve_rejects_bad_duration() {
        let b = AxisBoundary {
            p0: 0.0,
            v0: 1.0,
            a0: 0.0,
            j0: 0.0,
            pf: 1.0,
            duration: 0.0,
        };
        assert_eq!(solve_axis(&b), Err(TrajectoryError::InvalidDuration(0.0)));
        let b = AxisBoundary { duration: 1e-9, ..b };
        assert!(solve_axis(&b).is_err());
        let b = AxisBoundary {
            duration: f64::NAN,
            ..b
        };
        assert!(solve_axis(&b).is_err());
        let b = AxisBoundary {
            duration: 1.0,
            pf: f64::INFINITY,
            ..b
        };
        assert_eq!(solve_axis(&b), Err(TrajectoryError::NonFiniteBoundary));
    }

    #[test]
    fn choose_duration_examples() {
        let cfg = FeasibilityConfig::default();
        let s = VehicleState::moving(Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0));
        // max(0.5, 1.5 * 3 / 2, 2 / (0.5 * 10))
        let t = choose_duration(&s, &Vec3::new(3.0, 0.0, 0.0), &cfg);
        assert!((t - 2.25).abs() < 1e-12);

        let crawl = VehicleState::moving(Vec3::zeros(), Vec3::new(1e-3, 0.0, 0.0));
        assert_eq!(choose_duration(&crawl, &Vec3::new(1e-5, 0.0, 0.0), &cfg), 0.5);

        let mut last = 0.0;
        for d in 0..50 {
            let t = choose_duration(&s, &Vec3::new(0.1 * d as f64, 0.0, 0.0), &cfg);
            assert!(t >= last);
            last = t;
        }
    }

    fn sample_traj() -> StopTrajectory {
        let mut s = VehicleState::moving(Vec3::new(1.0, -2.0, 1.5), Vec3::new(1.5, 0.4, -0.1));
        s.acceleration = Vec3::new(0.3, -0.2, 0.0);
        s.jerk = Vec3::new(-0.5, 0.1, 0.2);
        s.yaw_rate = 0.3;
        solve_stop(&s, &Vec3::new(2.5, -1.2, 1.4), 1.7).unwrap()
    }

    #[test]
    fn evaluate_boundaries_and_domain() {
        let traj = sample_traj();
        let (v0, w0) = traj.evaluate(0.0, 1).unwrap();
        assert!((v0 - Vec3::new(1.5, 0.4, -0.1)).norm() < 1e-12);
        assert!((w0 - 0.3).abs() < 1e-12);
        for order in 1..=3 {
            let (d, w) = traj.evaluate(traj.duration, order).unwrap();
            assert!(d.norm() < 1e-9 && w.abs() < 1e-9, "order {order}: {d:?} {w}");
        }
        let (end, yaw) = traj.evaluate(traj.duration, 0).unwrap();
        assert!((end - Vec3::new(2.5, -1.2, 1.4)).norm() < 1e-9);
        assert!((yaw - 0.4f64.atan2(1.5)).abs() < 1e-9);
        assert!(matches!(
            traj.evaluate(-0.1, 0),
            Err(TrajectoryError::OutOfDomain { .. })
        ));
        assert!(matches!(
            traj.evaluate(1.8, 0),
            Err(TrajectoryError::OutOfDomain { .. })
        ));
        assert_eq!(traj.evaluate(0.5, 5), Err(TrajectoryError::UnsupportedOrder(5)));
        // snap exists, beyond that nothing
        assert!(traj.evaluate(0.5, 4).is_ok());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let traj = sample_traj();
        let h = 1e-5;
        for i in 1..=100 {
            let t = traj.duration * i as f64 / 101.0;
            for order in 1..=3 {
                let (lo, wlo) = traj.evaluate(t - h, order - 1).unwrap();
                let (hi, whi) = traj.evaluate(t + h, order - 1).unwrap();
                let (d, w) = traj.evaluate(t, order).unwrap();
                assert!(((hi - lo) / (2.0 * h) - d).norm() < 1e-5);
                assert!(((whi - wlo) / (2.0 * h) - w).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn sample_times_cover_endpoints() {
        assert_eq!(sample_times(0.0, 0.02), vec![0.0]);
        let ts = sample_times(0.05, 0.02);
        assert_eq!(ts, vec![0.0, 0.02, 0.04, 0.05]);
        let ts = sample_times(0.04, 0.02);
        assert_eq!(*ts.last().unwrap(), 0.04);
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn collision_check_examples() {
        let cfg = FeasibilityConfig::default();
        let traj = sample_traj();
        assert!(check_collision_free(&traj, &ObstacleMap::empty(), &cfg));

        let s = VehicleState::moving(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0));
        let straight = solve_stop(&s, &Vec3::new(2.0, 0.0, 0.0), 3.0).unwrap();
        let map = ObstacleMap::build(vec![Vec3::new(1.0, 0.1, 0.0)]).unwrap();
        assert!(!check_collision_free(&straight, &map, &cfg));
        let far = ObstacleMap::build(vec![Vec3::new(1.0, 1.0, 0.0)]).unwrap();
        assert!(check_collision_free(&straight, &far, &cfg));
    }

    #[test]
    fn feasibility_examples() {
        let cfg = FeasibilityConfig::default();
        assert_eq!(cfg.accel_bound, 10.0);
        let rest = VehicleState::at_rest(Vec3::new(1.0, 2.0, 3.0), 0.0);
        let hold = solve_stop(&rest, &rest.position, 1.0).unwrap();
        assert!(check_dynamic_feasibility(&hold, &cfg));

        // 2 m/s stopped over 0.3 m in 0.3 s needs more than 12 m/s^2.
        let s = VehicleState::moving(Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0));
        let harsh = solve_stop(&s, &Vec3::new(0.3, 0.0, 0.0), 0.3).unwrap();
        let peak = sample_times(harsh.duration, 1e-4)
            .into_iter()
            .map(|t| harsh.evaluate(t, 2).unwrap().0.norm())
            .fold(0.0, f64::max);
        assert!(peak > 12.0, "{peak}");
        assert!(!check_dynamic_feasibility(&harsh, &cfg));
    }

    #[test]
    fn fallback_brake_kinematics() {
        let cfg = FeasibilityConfig::default();
        let s = VehicleState::moving(Vec3::new(1.0, 1.0, 1.0), Vec3::new(0.0, 2.0, 0.0));
        let b = fallback_brake(&s, &cfg);
        assert_eq!(b.kind, TrajectoryKind::FallbackBrake);
        assert!(b.escape_point.is_none());
        assert!((b.duration - 0.4).abs() < 1e-12);
        let (end, _) = b.evaluate(b.duration, 0).unwrap();
        assert!(((end - s.position).norm() - 0.4).abs() < 1e-12);
        assert!(b.evaluate(b.duration, 1).unwrap().0.norm() < 1e-9);

        let still = VehicleState::at_rest(Vec3::new(3.0, 0.0, 1.0), 0.7);
        let h = fallback_brake(&still, &cfg);
        assert_eq!(h.duration, 0.0);
        assert_eq!(h.evaluate(0.0, 0).unwrap(), (still.position, 0.7));
    }

    #[test]
    fn open_space_takes_first_candidate() {
        let s = VehicleState::moving(Vec3::new(0.0, 0.0, 1.5), Vec3::new(2.0, 0.0, 0.0));
        let plan = plan_stop(
            &s,
            &ObstacleMap::empty(),
            &EscapeConfig::default(),
            &FeasibilityConfig::default(),
        );
        assert_eq!(plan.trajectory.kind, TrajectoryKind::Polynomial);
        let chosen = plan.chosen.unwrap();
        let best = plan.candidates[chosen];
        // first feasible in cost order sits on the velocity ray
        assert!(best.line_offset < 1e-9);
        assert!(plan.candidates[..chosen].iter().all(|c| c.cost <= best.cost));
    }

    #[test]
    fn boxed_in_vehicle_falls_back() {
        // Dense sphere of points 0.5 m around the vehicle.
        let mut pts = Vec::new();
        for i in 0..40 {
            for j in 0..20 {
                let th = i as f64 / 40.0 * std::f64::consts::TAU;
                let ph = (j as f64 + 0.5) / 20.0 * std::f64::consts::PI;
                pts.push(Vec3::new(ph.sin() * th.cos(), ph.sin() * th.sin(), ph.cos()) * 0.5);
            }
        }
        let map = ObstacleMap::build(pts).unwrap();
        let s = VehicleState::moving(Vec3::zeros(), Vec3::new(1.5, 0.0, 0.0));
        let traj = generate_stop_trajectory(&s, &map, &EscapeConfig::default(), &FeasibilityConfig::default());
        assert_eq!(traj.kind, TrajectoryKind::FallbackBrake);
    }

    #[test]
    fn zero_velocity_holds() {
        let s = VehicleState::at_rest(Vec3::new(1.0, 0.0, 0.0), 0.0);
        let traj = generate_stop_trajectory(
            &s,
            &ObstacleMap::empty(),
            &EscapeConfig::default(),
            &FeasibilityConfig::default(),
        );
        assert_eq!(traj.kind, TrajectoryKind::FallbackBrake);
        assert_eq!(traj.duration, 0.0);
    }

    #[test]
    fn csv_export() {
        let traj = sample_traj();
        let mut out = Vec::new();
        traj.write_csv(0.5, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,px,py,pz,vx,vy,vz,ax,ay,az,yaw");
        assert_eq!(lines.len(), 1 + sample_times(traj.duration, 0.5).len());
        assert!(lines[1].starts_with("0,1,-2,1.5,1.5,0.4,-0.1,"));
    }
}
