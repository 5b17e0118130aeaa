//! Basic geometric types shared by the monitor, sampler and trajectory solver.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Position, velocity, acceleration or jerk in meters-based units, depending on context.
pub type Vec3 = Vector3<f64>;

/// Wrap an angle into `(-PI, PI]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Full kinematic state of the vehicle up to jerk, plus yaw and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec3,
    pub velocity: Vec3,
    #[serde(default = "Vec3::zeros")]
    pub acceleration: Vec3,
    #[serde(default = "Vec3::zeros")]
    pub jerk: Vec3,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub yaw_rate: f64,
    #[serde(default)]
    pub yaw_accel: f64,
    #[serde(default)]
    pub yaw_jerk: f64,
}

impl VehicleState {
    /// A vehicle at rest at `position`, facing `yaw`.
    pub fn at_rest(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            acceleration: Vec3::zeros(),
            jerk: Vec3::zeros(),
            yaw: normalize_angle(yaw),
            yaw_rate: 0.0,
            yaw_accel: 0.0,
            yaw_jerk: 0.0,
        }
    }

    pub fn moving(position: Vec3, velocity: Vec3) -> Self {
        let mut s = Self::at_rest(position, 0.0);
        s.velocity = velocity;
        if velocity.x != 0.0 || velocity.y != 0.0 {
            s.yaw = velocity.y.atan2(velocity.x);
        }
        s
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    pub fn is_finite(&self) -> bool {
        [self.position, self.velocity, self.acceleration, self.jerk]
            .iter()
            .all(|v| v.iter().all(|c| c.is_finite()))
            && [self.yaw, self.yaw_rate, self.yaw_accel, self.yaw_jerk]
                .iter()
                .all(|c| c.is_finite())
    }
}

pub(crate) fn is_finite_vec(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}
