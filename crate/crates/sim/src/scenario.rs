//! Scenario description and procedural generators.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safestop_core::{normalize_angle, ObstacleMap, Vec3, VehicleState};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCENARIO_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("could not place {wanted} trees ({placed} placed after {attempts} attempts)")]
    Placement {
        wanted: usize,
        placed: usize,
        attempts: usize,
    },
    #[error("infeasible geometry: {0}")]
    Geometry(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unsupported scenario schema {0}")]
    Schema(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Map(#[from] safestop_core::MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl Bounds {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Solid {
    /// Vertical cylinder; `center` is the middle of its axis.
    Cylinder {
        center: Vec3,
        radius: f64,
        height: f64,
    },
    Box {
        center: Vec3,
        half_extents: Vec3,
    },
}

impl Solid {
    /// Euclidean distance from `p` to the solid (zero inside).
    pub fn distance(&self, p: &Vec3) -> f64 {
        match *self {
            Solid::Cylinder { center, radius, height } => {
                let radial = ((p.x - center.x).powi(2) + (p.y - center.y).powi(2)).sqrt();
                let dr = (radial - radius).max(0.0);
                let dz = ((p.z - center.z).abs() - height / 2.0).max(0.0);
                dr.hypot(dz)
            }
            Solid::Box { center, half_extents } => {
                let d = (p - center).abs() - half_extents;
                d.map(|c| c.max(0.0)).norm()
            }
        }
    }

    /// Points on the surface with roughly `spacing` between neighbors.
    pub fn surface_points(&self, spacing: f64) -> Vec<Vec3> {
        let mut pts = Vec::new();
        match *self {
            Solid::Cylinder { center, radius, height } => {
                let n_theta = ((TAU * radius / spacing).ceil() as usize).max(3);
                let n_z = (height / spacing).ceil() as usize;
                let bottom = center.z - height / 2.0;
                for iz in 0..=n_z {
                    let z = bottom + height * iz as f64 / n_z.max(1) as f64;
                    for it in 0..n_theta {
                        let th = TAU * it as f64 / n_theta as f64;
                        pts.push(Vec3::new(center.x + radius * th.cos(), center.y + radius * th.sin(), z));
                    }
                }
                // caps, ring by ring
                let n_r = (radius / spacing).ceil() as usize;
                for z in [bottom, bottom + height] {
                    pts.push(Vec3::new(center.x, center.y, z));
                    for ir in 1..n_r {
                        let r = radius * ir as f64 / n_r as f64;
                        let n = ((TAU * r / spacing).ceil() as usize).max(3);
                        for it in 0..n {
                            let th = TAU * it as f64 / n as f64;
                            pts.push(Vec3::new(center.x + r * th.cos(), center.y + r * th.sin(), z));
                        }
                    }
                }
            }
            Solid::Box { center, half_extents } => {
                let counts = half_extents.map(|h| ((2.0 * h / spacing).ceil() as usize).max(1));
                let coord = |axis: usize, i: usize| {
                    center[axis] - half_extents[axis] + 2.0 * half_extents[axis] * i as f64 / counts[axis] as f64
                };
                for i in 0..=counts.x {
                    for j in 0..=counts.y {
                        for k in 0..=counts.z {
                            let on_face = i == 0 || i == counts.x || j == 0 || j == counts.y || k == 0 || k == counts.z;
                            if on_face {
                                pts.push(Vec3::new(coord(0, i), coord(1, j), coord(2, k)));
                            }
                        }
                    }
                }
            }
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    pub bounds: Bounds,
    pub solids: Vec<Solid>,
    pub start: VehicleState,
    pub goal: Vec3,
    pub goal_radius: f64,
    pub surface_sample_spacing: f64,
}

impl Scenario {
    pub fn obstacle_points(&self) -> Vec<Vec3> {
        self.solids
            .iter()
            .flat_map(|s| s.surface_points(self.surface_sample_spacing))
            .collect()
    }

    pub fn build_map(&self) -> Result<ObstacleMap, ScenarioError> {
        Ok(ObstacleMap::build(self.obstacle_points())?)
    }

    /// Exact distance from `p` to the nearest solid.
    pub fn solid_distance(&self, p: &Vec3) -> f64 {
        self.solids.iter().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self, clearance_radius: f64) -> Result<(), ScenarioError> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(ScenarioError::Schema(self.schema));
        }
        if !(self.surface_sample_spacing > 0.0) {
            return Err(ScenarioError::Invalid("surface_sample_spacing must be positive".into()));
        }
        if !(self.goal_radius > 0.0) {
            return Err(ScenarioError::Invalid("goal_radius must be positive".into()));
        }
        if !self.bounds.contains(&self.start.position) || !self.bounds.contains(&self.goal) {
            return Err(ScenarioError::Invalid("start and goal must lie inside bounds".into()));
        }
        if self.solid_distance(&self.start.position) < clearance_radius {
            return Err(ScenarioError::Invalid("start is too close to an obstacle".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        if s.schema != SCENARIO_SCHEMA {
            return Err(ScenarioError::Schema(s.schema));
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Distance from `p` to the straight start-goal segment, in the horizontal plane.
    pub fn distance_to_route(&self, p: &Vec3) -> f64 {
        let a = self.start.position.xy();
        let b = self.goal.xy();
        let ab = b - a;
        let t = ((p.xy() - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        (p.xy() - (a + ab * t)).norm()
    }

    /// Smallest horizontal distance from any obstacle point to the straight
    /// start-goal segment; infinite without obstacles.
    pub fn route_clearance(&self) -> f64 {
        self.obstacle_points()
            .iter()
            .map(|p| self.distance_to_route(p))
            .fold(f64::INFINITY, f64::min)
    }
}

fn start_state(start: Vec3, goal: Vec3) -> VehicleState {
    let d = goal - start;
    VehicleState::at_rest(start, normalize_angle(d.y.atan2(d.x)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub bounds: Bounds,
    /// trees per square meter
    pub tree_density: f64,
    pub radius_range: (f64, f64),
    /// Minimum surface-to-surface gap between trees, meters.
    pub min_gap: f64,
    /// Trees keep this far (surface) from the start and goal.
    pub keepout_radius: f64,
    pub surface_sample_spacing: f64,
    pub goal_radius: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            bounds: Bounds::new(Vec3::zeros(), Vec3::new(40.0, 40.0, 3.0)),
            tree_density: 0.08,
            radius_range: (0.2, 0.4),
            min_gap: 1.0,
            keepout_radius: 2.0,
            surface_sample_spacing: 0.1,
            goal_radius: 1.0,
        }
    }
}

/// Random forest of vertical cylinders between a start and goal on opposite
/// sides of the bounds.
pub fn generate_forest(seed: u64, p: &ForestParams) -> Result<Scenario, ScenarioError> {
    let (rmin, rmax) = p.radius_range;
    if !(rmin > 0.0 && rmax >= rmin) || !(p.tree_density >= 0.0) {
        return Err(ScenarioError::Geometry(
            "radius range and density must be positive".into(),
        ));
    }
    let size = p.bounds.size();
    let center = p.bounds.center();
    let start = Vec3::new(p.bounds.min.x + 2.0, center.y, center.z);
    let goal = Vec3::new(p.bounds.max.x - 2.0, center.y, center.z);
    let wanted = (p.tree_density * size.x * size.y).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees: Vec<(Vec3, f64)> = Vec::with_capacity(wanted);
    let max_attempts = 1000 + 200 * wanted;
    let mut attempts = 0;
    while trees.len() < wanted {
        if attempts >= max_attempts {
            return Err(ScenarioError::Placement {
                wanted,
                placed: trees.len(),
                attempts,
            });
        }
        attempts += 1;
        let r = if rmax > rmin {
            rng.random_range(rmin..rmax)
        } else {
            rmin
        };
        let c = Vec3::new(
            rng.random_range(p.bounds.min.x + r..p.bounds.max.x - r),
            rng.random_range(p.bounds.min.y + r..p.bounds.max.y - r),
            center.z,
        );
        let clear_of_ends = [start, goal]
            .iter()
            .all(|e| (e.xy() - c.xy()).norm() - r >= p.keepout_radius);
        let clear_of_trees = trees
            .iter()
            .all(|(o, ro)| (o.xy() - c.xy()).norm() - r - ro >= p.min_gap);
        if clear_of_ends && clear_of_trees {
            trees.push((c, r));
        }
    }

    Ok(Scenario {
        schema: SCENARIO_SCHEMA,
        name: format!("forest-{seed}"),
        bounds: p.bounds,
        solids: trees
            .into_iter()
            .map(|(center, radius)| Solid::Cylinder {
                center,
                radius,
                height: size.z,
            })
            .collect(),
        start: start_state(start, goal),
        goal,
        goal_radius: p.goal_radius,
        surface_sample_spacing: p.surface_sample_spacing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WarehouseParams {
    pub bounds: Bounds,
    pub aisle_width: f64,
    /// Shelf unit (length along the row, depth, height).
    pub shelf_dims: Vec3,
    /// Range of the seeded gaps between shelf units in a row.
    pub gap_range: (f64, f64),
    /// Open space between the row ends and the bounds, along x.
    pub end_margin: f64,
    pub clearance_radius: f64,
    pub surface_sample_spacing: f64,
    pub goal_radius: f64,
}

impl Default for WarehouseParams {
    fn default() -> Self {
        Self {
            bounds: Bounds::new(Vec3::zeros(), Vec3::new(30.0, 12.0, 3.0)),
            aisle_width: 2.0,
            shelf_dims: Vec3::new(4.0, 1.0, 3.0),
            gap_range: (0.3, 1.0),
            end_margin: 3.0,
            clearance_radius: 0.3,
            surface_sample_spacing: 0.1,
            goal_radius: 1.0,
        }
    }
}

/// Rows of shelf units along x separated by aisles; the route runs down the
/// middle aisle from one end to the other.
pub fn generate_warehouse(seed: u64, p: &WarehouseParams) -> Result<Scenario, ScenarioError> {
    if !(p.aisle_width > 2.0 * p.clearance_radius) {
        return Err(ScenarioError::Geometry(format!(
            "aisle width {} must exceed twice the clearance radius {}",
            p.aisle_width, p.clearance_radius
        )));
    }
    let size = p.bounds.size();
    let depth = p.shelf_dims.y;
    let rows = ((size.y + p.aisle_width) / (depth + p.aisle_width)).floor() as usize;
    if rows < 2 {
        return Err(ScenarioError::Geometry("bounds too narrow for two shelf rows".into()));
    }
    let row_x0 = p.bounds.min.x + p.end_margin;
    let row_x1 = p.bounds.max.x - p.end_margin;
    if row_x1 - row_x0 < p.shelf_dims.x {
        return Err(ScenarioError::Geometry("bounds too short for a shelf unit".into()));
    }
    let used = rows as f64 * depth + (rows - 1) as f64 * p.aisle_width;
    let y0 = p.bounds.min.y + (size.y - used) / 2.0;
    let row_center_y = |i: usize| y0 + depth / 2.0 + i as f64 * (depth + p.aisle_width);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let height = p.shelf_dims.z.min(size.z);
    let zc = p.bounds.min.z + height / 2.0;
    let mut solids = Vec::new();
    for i in 0..rows {
        let mut x = row_x0;
        while x < row_x1 {
            let len = p.shelf_dims.x.min(row_x1 - x);
            solids.push(Solid::Box {
                center: Vec3::new(x + len / 2.0, row_center_y(i), zc),
                half_extents: Vec3::new(len / 2.0, depth / 2.0, height / 2.0),
            });
            let (g0, g1) = p.gap_range;
            x += len + if g1 > g0 { rng.random_range(g0..g1) } else { g0 };
        }
    }

    // middle aisle, between rows `mid - 1` and `mid`
    let mid = rows / 2;
    let aisle_y = (row_center_y(mid - 1) + row_center_y(mid)) / 2.0;
    let z = p.bounds.center().z;
    let start = Vec3::new(p.bounds.min.x + 1.5, aisle_y, z);
    let goal = Vec3::new(p.bounds.max.x - 1.5, aisle_y, z);
    Ok(Scenario {
        schema: SCENARIO_SCHEMA,
        name: format!("warehouse-{seed}"),
        bounds: p.bounds,
        solids,
        start: start_state(start, goal),
        goal,
        goal_radius: p.goal_radius,
        surface_sample_spacing: p.surface_sample_spacing,
    })
}

/// Centerline y of every aisle in a warehouse generated with `p`.
pub fn warehouse_aisle_centers(p: &WarehouseParams) -> Vec<f64> {
    let size = p.bounds.size();
    let depth = p.shelf_dims.y;
    let rows = ((size.y + p.aisle_width) / (depth + p.aisle_width)).floor() as usize;
    let used = rows as f64 * depth + (rows.saturating_sub(1)) as f64 * p.aisle_width;
    let y0 = p.bounds.min.y + (size.y - used) / 2.0;
    (1..rows)
        .map(|i| y0 + i as f64 * (depth + p.aisle_width) - p.aisle_width / 2.0)
        .collect()
}

/// Fixed 8 m x 8 m arena with two pillars the route passes between.
pub fn generate_two_pillar_arena() -> Scenario {
    let bounds = Bounds::new(Vec3::zeros(), Vec3::new(8.0, 8.0, 3.0));
    let pillar = |y: f64| Solid::Cylinder {
        center: Vec3::new(4.0, y, 1.5),
        radius: 0.3,
        height: 3.0,
    };
    let start = Vec3::new(1.0, 4.0, 1.5);
    let goal = Vec3::new(7.0, 4.0, 1.5);
    Scenario {
        schema: SCENARIO_SCHEMA,
        name: "two-pillar-arena".into(),
        bounds,
        solids: vec![pillar(4.0 - 1.25), pillar(4.0 + 1.25)],
        start: start_state(start, goal),
        goal,
        goal_radius: 0.5,
        surface_sample_spacing: 0.1,
    }
}

/// Obstacle-free scenario with the goal `distance` meters ahead of the start.
pub fn open_field(distance: f64) -> Scenario {
    let start = Vec3::new(1.0, 5.0, 1.5);
    let goal = start + Vec3::new(distance, 0.0, 0.0);
    Scenario {
        schema: SCENARIO_SCHEMA,
        name: "open-field".into(),
        bounds: Bounds::new(Vec3::zeros(), Vec3::new(distance + 2.0, 10.0, 3.0)),
        solids: Vec::new(),
        start: start_state(start, goal),
        goal,
        goal_radius: 0.5,
        surface_sample_spacing: 0.1,
    }
}
