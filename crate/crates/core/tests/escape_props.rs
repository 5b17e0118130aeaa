use proptest::prelude::*;
use safestop_core::escape::{
    cost_grid, generate_grid, grid_box_half_extents, line_offset, sample_escape_points, stratified_sample,
    stratum_sizes,
};
use safestop_core::{EscapeCandidate, EscapeConfig, ObstacleMap, Vec3, VehicleState};

fn candidates(n: usize) -> Vec<EscapeCandidate> {
    // distinct costs in shuffled lattice order
    (0..n)
        .map(|i| {
            let cost = ((i * 7919) % n) as f64;
            EscapeCandidate {
                point: Vec3::new(i as f64, 0.0, 0.0),
                line_offset: 0.0,
                clearance: 1.0,
                cost,
                colliding: false,
                lattice_index: i,
            }
        })
        .collect()
}

#[test]
fn ten_thousand_candidates_draw_ten_forty_thirty_twenty() {
    let cfg = EscapeConfig::default();
    let cands = candidates(10_000);
    assert_eq!(stratum_sizes(10_000, &cfg.strata), vec![100, 900, 4000, 5000]);
    let out = stratified_sample(&cands, &cfg);
    assert_eq!(out.len(), 100);
    // costs equal the rank, so each draw's stratum is read off its cost
    let bounds = [0.0, 100.0, 1000.0, 5000.0, 10_000.0];
    let per: Vec<usize> = bounds
        .windows(2)
        .map(|w| out.iter().filter(|c| c.cost >= w[0] && c.cost < w[1]).count())
        .collect();
    assert_eq!(per, vec![10, 40, 30, 20]);
    let mut ids: Vec<usize> = out.iter().map(|c| c.lattice_index).collect();
    ids.dedup();
    assert_eq!(ids.len(), 100);
    assert!(out.windows(2).all(|w| w[0].cost <= w[1].cost));
}

#[test]
fn sixty_candidates_clamp_to_stratum_sizes() {
    let cfg = EscapeConfig::default();
    assert_eq!(stratum_sizes(60, &cfg.strata), vec![1, 5, 24, 30]);
    let out = stratified_sample(&candidates(60), &cfg);
    assert_eq!(out.len(), 1 + 5 + 24 + 20);
}

proptest! {
    #[test]
    fn line_offset_matches_cross_product(
        p in (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
        v in (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64),
        x in (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
    ) {
        let v = Vec3::new(v.0, v.1, v.2);
        prop_assume!(v.norm() > 1e-3);
        let state = VehicleState::moving(Vec3::new(p.0, p.1, p.2), v);
        let x = Vec3::new(x.0, x.1, x.2);
        let oracle = (x - state.position).cross(&v).norm() / v.norm();
        prop_assert!((line_offset(&state, &x).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn stratum_sizes_partition_n(n in 0usize..50_000) {
        let sizes = stratum_sizes(n, &EscapeConfig::default().strata);
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
    }

    #[test]
    fn grid_is_a_box_ahead_of_the_vehicle(speed in 0.1..3.0f64, heading in -3.1..3.1f64, climb in -0.5..0.5f64) {
        let cfg = EscapeConfig { grid_spacing: 0.5, ..Default::default() };
        let v = Vec3::new(heading.cos(), heading.sin(), climb).normalize() * speed;
        let state = VehicleState::moving(Vec3::new(1.0, 2.0, 1.5), v);
        let grid = generate_grid(&state, &cfg).unwrap();
        let h = grid_box_half_extents(speed, &cfg);
        let count = |half: f64| ((2.0 * half / cfg.grid_spacing) + 1e-9).floor() as usize + 1;
        prop_assert_eq!(grid.len(), count(h.x) * count(h.y) * count(h.z));
        let dir = v.normalize();
        for p in &grid {
            let r = p - state.position;
            let along = r.dot(&dir);
            prop_assert!(along >= -1e-9 && along <= 2.0 * h.x + 1e-9);
            // off-axis extent fits the larger cross-section half extent
            prop_assert!((r - dir * along).norm() <= (h.y * h.y + h.z * h.z).sqrt() + 1e-9);
        }
    }
}

#[test]
fn default_grid_at_two_meters_per_second_has_about_ten_thousand_points() {
    let state = VehicleState::moving(Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0));
    let n = generate_grid(&state, &EscapeConfig::default()).unwrap().len();
    assert!((8_000..=12_000).contains(&n), "{n}");
}

#[test]
fn sampling_is_seeded_and_never_returns_colliding_points() {
    let obstacles: Vec<Vec3> = (0..40).map(|i| Vec3::new(2.0, -2.0 + 0.1 * i as f64, 1.5)).collect();
    let map = ObstacleMap::build(obstacles).unwrap();
    let state = VehicleState::moving(Vec3::new(0.0, 0.0, 1.5), Vec3::new(1.5, 0.0, 0.0));
    let cfg = EscapeConfig {
        grid_spacing: 0.3,
        ..Default::default()
    };
    let a = sample_escape_points(&state, &map, &cfg).unwrap();
    let b = sample_escape_points(&state, &map, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(!a.is_empty());
    assert!(a.iter().all(|c| !c.colliding && c.clearance >= cfg.clearance_radius));
    let other = sample_escape_points(
        &state,
        &map,
        &EscapeConfig {
            rng_seed: cfg.rng_seed + 1,
            ..cfg.clone()
        },
    )
    .unwrap();
    assert_ne!(a, other);
    // the cheapest non-colliding candidate is always in the first stratum
    let all = cost_grid(&state, &map, &cfg).unwrap();
    let best = all
        .iter()
        .filter(|c| !c.colliding)
        .map(|c| c.cost)
        .fold(f64::INFINITY, f64::min);
    assert!(a[0].cost >= best);
}
