use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safestop_core::{ObstacleMap, Vec3};

fn points(n: usize) -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -3.0..3.0f64), 1..n)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect())
}

fn query() -> impl Strategy<Value = Vec3> {
    (-12.0..12.0f64, -12.0..12.0f64, -4.0..4.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn brute(points: &[Vec3], q: &Vec3, k: usize, radius: f64) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p - q).norm()))
        .filter(|(_, d)| *d <= radius)
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

proptest! {
    #[test]
    fn full_k_returns_every_point_sorted(pts in points(200), q in query()) {
        let map = ObstacleMap::build(pts.clone()).unwrap();
        let got = map.k_nearest(&q, pts.len(), f64::INFINITY);
        prop_assert_eq!(got.len(), pts.len());
        let mut idx: Vec<usize> = got.iter().map(|n| n.index).collect();
        for w in got.windows(2) {
            prop_assert!(w[0].distance <= w[1].distance);
        }
        idx.sort_unstable();
        prop_assert_eq!(idx, (0..pts.len()).collect::<Vec<_>>());
    }

    #[test]
    fn knn_matches_brute_force(pts in points(300), q in query(), k in 1usize..40, radius in 0.5..20.0f64) {
        let map = ObstacleMap::build(pts.clone()).unwrap();
        let got: Vec<(usize, f64)> = map.k_nearest(&q, k, radius).iter().map(|n| (n.index, n.distance)).collect();
        prop_assert_eq!(got, brute(&pts, &q, k, radius));
    }

    #[test]
    fn nearest_distance_is_one_lipschitz(pts in points(200), a in query(), b in query()) {
        let map = ObstacleMap::build(pts).unwrap();
        let (da, db) = (map.nearest_distance(&a), map.nearest_distance(&b));
        prop_assert!((da - db).abs() <= (a - b).norm() + 1e-12);
    }
}

#[test]
fn exact_agreement_on_thousand_point_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..3 {
        let pts: Vec<Vec3> = (0..1000)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-20.0..20.0),
                    rng.random_range(0.0..3.0),
                )
            })
            .collect();
        let map = ObstacleMap::build(pts.clone()).unwrap();
        for _ in 0..100 {
            let q = Vec3::new(
                rng.random_range(-22.0..22.0),
                rng.random_range(-22.0..22.0),
                rng.random_range(-1.0..4.0),
            );
            let k = rng.random_range(1..60);
            let radius = rng.random_range(0.5..8.0);
            let got: Vec<(usize, f64)> = map
                .k_nearest(&q, k, radius)
                .iter()
                .map(|n| (n.index, n.distance))
                .collect();
            assert_eq!(got, brute(&pts, &q, k, radius));
            let nearest = pts.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min);
            assert_eq!(map.nearest_distance(&q), nearest);
        }
    }
}

#[test]
fn duplicate_points_tie_break_by_insertion() {
    let p = Vec3::new(1.0, 1.0, 1.0);
    let map = ObstacleMap::build(vec![Vec3::new(5.0, 0.0, 0.0), p, p, p]).unwrap();
    let idx: Vec<usize> = map.k_nearest(&Vec3::zeros(), 3, 10.0).iter().map(|n| n.index).collect();
    assert_eq!(idx, vec![1, 2, 3]);
}

#[test]
fn file_round_trip_preserves_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts: Vec<Vec3> = (0..50)
        .map(|_| {
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    let map = ObstacleMap::build(pts).unwrap();
    let mut buf = Vec::new();
    map.write_points(&mut buf).unwrap();
    let back = ObstacleMap::from_reader(buf.as_slice()).unwrap();
    assert_eq!(back.points(), map.points());
}
