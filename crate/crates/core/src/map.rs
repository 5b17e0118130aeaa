//! Point-cloud obstacle map backed by an exact KD-tree.
//!
//! The tree is stored implicitly: points are permuted so that every index
//! range `[lo, hi)` has its splitting point at `(lo + hi) / 2`, with the
//! splitting axis cycling with depth. Queries are exact. Distance ties are
//! resolved by the order in which points were handed to [`ObstacleMap::build`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

use crate::geometry::{is_finite_vec, Vec3};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One result of a k-nearest query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub point: Vec3,
    pub distance: f64,
    /// Position of the point in the list the map was built from.
    pub index: usize,
}

#[derive(Clone)]
pub struct ObstacleMap {
    /// Points in insertion order.
    points: Vec<Vec3>,
    /// Tree-ordered copy of the points.
    tree: Vec<Vec3>,
    /// `tree_index[i]` is the insertion index of `tree[i]`.
    tree_index: Vec<usize>,
}

impl fmt::Debug for ObstacleMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObstacleMap")
            .field("point_count", &self.points.len())
            .finish()
    }
}

/// Heap key ordered by distance, then insertion index.
#[derive(Clone, Copy, PartialEq)]
struct Key {
    distance: f64,
    index: usize,
    slot: usize,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl ObstacleMap {
    pub fn build(points: Vec<Vec3>) -> Result<Self, MapError> {
        if let Some(index) = points.iter().position(|p| !is_finite_vec(p)) {
            return Err(MapError::NonFinitePoint { index });
        }
        let mut entries: Vec<(Vec3, usize)> = points.iter().copied().enumerate().map(|(i, p)| (p, i)).collect();
        let len = entries.len();
        build_recursive(&mut entries, 0, len, 0);
        let (tree, tree_index) = entries.into_iter().unzip();
        Ok(Self {
            points,
            tree,
            tree_index,
        })
    }

    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            tree: Vec::new(),
            tree_index: Vec::new(),
        }
    }

    /// Read a whitespace-separated `x y z` point file; `#` starts a comment.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, MapError> {
        let mut points = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let coords: Vec<f64> = body
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e: std::num::ParseFloatError| MapError::Parse {
                    line: n + 1,
                    message: e.to_string(),
                })?;
            if coords.len() != 3 {
                return Err(MapError::Parse {
                    line: n + 1,
                    message: format!("expected 3 coordinates, found {}", coords.len()),
                });
            }
            points.push(Vec3::new(coords[0], coords[1], coords[2]));
        }
        Self::build(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MapError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn write_points<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for p in &self.points {
            writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points in insertion order.
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Up to `k` points within `radius` of `query`, nearest first.
    ///
    /// `radius` may be `f64::INFINITY`.
    pub fn k_nearest(&self, query: &Vec3, k: usize, radius: f64) -> Vec<Neighbor> {
        if k == 0 || self.tree.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(query, k, radius, 0, self.tree.len(), 0, &mut heap);
        let mut keys = heap.into_vec();
        keys.sort();
        keys.into_iter()
            .map(|key| Neighbor {
                point: self.tree[key.slot],
                distance: key.distance,
                index: key.index,
            })
            .collect()
    }

    /// Exact distance to the closest obstacle point; infinity for an empty map.
    pub fn nearest_distance(&self, query: &Vec3) -> f64 {
        self.k_nearest(query, 1, f64::INFINITY)
            .first()
            .map_or(f64::INFINITY, |n| n.distance)
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        query: &Vec3,
        k: usize,
        radius: f64,
        lo: usize,
        hi: usize,
        depth: usize,
        heap: &mut BinaryHeap<Key>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = depth % 3;
        let point = &self.tree[mid];
        let distance = (point - query).norm();
        if distance <= radius {
            let key = Key {
                distance,
                index: self.tree_index[mid],
                slot: mid,
            };
            if heap.len() < k {
                heap.push(key);
            } else if heap.peek().is_some_and(|worst| key < *worst) {
                heap.pop();
                heap.push(key);
            }
        }

        let diff = query[axis] - point[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(query, k, radius, near.0, near.1, depth + 1, heap);

        // Equal-distance points on the far side may still win on insertion
        // order, so only prune when the plane is strictly farther.
        let plane = diff.abs() * (1.0 - 1e-12);
        let bound = if heap.len() < k {
            radius
        } else {
            heap.peek().map_or(radius, |w| w.distance.min(radius))
        };
        if plane <= bound {
            self.search(query, k, radius, far.0, far.1, depth + 1, heap);
        }
    }
}

fn build_recursive(entries: &mut [(Vec3, usize)], lo: usize, hi: usize, depth: usize) {
    if hi - lo <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = (lo + hi) / 2;
    entries[lo..hi].select_nth_unstable_by(mid - lo, |a, b| a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1)));
    build_recursive(entries, lo, mid, depth + 1);
    build_recursive(entries, mid + 1, hi, depth + 1);
}
