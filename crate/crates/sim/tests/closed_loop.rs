use safestop_core::trajectory::{check_collision_free, TrajectoryKind};
use safestop_sim::scenario::generate_two_pillar_arena;
use safestop_sim::{
    run_batch, run_trial, ForestParams, Mode, OperatorParams, Profile, ScenarioSpec, ScriptedOperator, Trace,
    TrialResult, TrialSetup, World, WorldEvent,
};

fn pillar_run() -> safestop_sim::Scenario {
    let mut s = generate_two_pillar_arena();
    s.start.position.y = 2.75;
    s.goal.y = 2.75;
    s
}

fn quiet_setup() -> TrialSetup {
    TrialSetup {
        operator: OperatorParams {
            heading_noise: 0.0,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn flying_at_a_pillar_stops_before_contact() {
    let scenario = pillar_run();
    let out = run_trial(&scenario, &quiet_setup(), true, 0).unwrap();
    assert!(out.result.stops_issued >= 1);
    assert!(!out.result.collided);
    for row in out.trace.ticks() {
        assert!(scenario.solid_distance(&row.position) > 0.0);
        assert!(row.nearest_obstacle_dist > 0.15);
    }
    let first = &out.result.stop_events[0];
    assert!(first.position.x < 4.0 - 0.3);
}

#[test]
fn flying_at_a_pillar_without_monitoring_collides() {
    let out = run_trial(&pillar_run(), &quiet_setup(), false, 0).unwrap();
    assert!(out.result.collided);
    assert!(!out.result.success);
    assert_eq!(out.result.stops_issued, 0);
}

fn stopping_segments(trace: &Trace) -> Vec<(Vec<f64>, f64)> {
    // speeds during each STOPPING run, plus the speed on the following tick
    let ticks: Vec<_> = trace.ticks().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < ticks.len() {
        if ticks[i].mode != Mode::Stopping {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < ticks.len() && ticks[j].mode == Mode::Stopping {
            j += 1;
        }
        if j < ticks.len() {
            let speeds = ticks[i..j].iter().map(|r| r.velocity.norm()).collect();
            out.push((speeds, ticks[j].velocity.norm()));
        }
        i = j;
    }
    out
}

#[test]
fn stopping_speed_never_rises_after_its_peak() {
    let spec = ScenarioSpec::Forest(ForestParams::default());
    let outs = run_batch(&spec, &TrialSetup::default(), &[true], &(0..6).collect::<Vec<_>>()).unwrap();
    let mut segments = 0;
    for o in &outs {
        for (speeds, after) in stopping_segments(&o.trace) {
            segments += 1;
            let peak = speeds
                .iter()
                .enumerate()
                .fold(0, |b, (i, v)| if *v > speeds[b] { i } else { b });
            for w in speeds[peak..].windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "seed {}: {} after {}", o.result.seed, w[1], w[0]);
            }
            assert!(after <= 1e-6);
        }
    }
    assert!(segments >= 6);
}

#[test]
fn only_allowed_mode_transitions_occur() {
    let spec = ScenarioSpec::Forest(ForestParams::default());
    let outs = run_batch(&spec, &TrialSetup::default(), &[true], &[7, 8]).unwrap();
    for o in &outs {
        let ticks: Vec<_> = o.trace.ticks().collect();
        for w in ticks.windows(2) {
            let ok = w[0].mode == w[1].mode
                || matches!(
                    (w[0].mode, w[1].mode),
                    (Mode::Teleop, Mode::Stopping) | (Mode::Stopping, Mode::Recovery) | (Mode::Recovery, Mode::Teleop)
                );
            assert!(ok, "{:?} -> {:?} at t = {}", w[0].mode, w[1].mode, w[1].t);
        }
    }
}

#[test]
fn issued_trajectories_were_collision_free_at_issue() {
    let spec = ScenarioSpec::Forest(ForestParams::default());
    let setup = TrialSetup::default();
    let mut checked = 0;
    for seed in 0..4 {
        let scenario = spec.scenario(seed).unwrap();
        let map = scenario.build_map().unwrap();
        let mut world = World::new(scenario, map, setup.sim.clone(), true, seed).unwrap();
        let mut op = ScriptedOperator::new(Profile::Aggressive, setup.operator, seed);
        while !world.finished() && world.time < 60.0 {
            let active = world.mode == Mode::Teleop;
            let cmd = op.command(
                &world.state,
                &world.scenario,
                &world.map,
                world.time,
                world.dt(),
                active,
            );
            let (events, _) = world.step(&cmd);
            for e in &events {
                if let WorldEvent::Stop(_) = e {
                    op.notify_stop(&world.state, &world.scenario, &world.map);
                    let stop = world.active_stop.as_ref().unwrap();
                    if stop.trajectory.kind == TrajectoryKind::Polynomial {
                        assert!(check_collision_free(
                            &stop.trajectory,
                            &world.map,
                            &setup.sim.feasibility
                        ));
                        checked += 1;
                    }
                }
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn metrics_are_recomputable_from_the_written_log() {
    let spec = ScenarioSpec::Forest(ForestParams::default());
    let outs = run_batch(&spec, &TrialSetup::default(), &[true, false], &[3]).unwrap();
    for o in &outs {
        let parsed = Trace::from_reader(o.trace.to_csv().as_bytes()).unwrap();
        let r = TrialResult::from_trace(&parsed, 3);
        assert_eq!(r, o.result);
        let min = parsed
            .ticks()
            .map(|t| t.nearest_obstacle_dist)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.min_obstacle_distance, min);
        assert!(r.min_obstacle_distance <= r.mean_obstacle_distance);
        assert!(!(r.collided && r.success));
    }
}

#[test]
fn batch_is_ordered_by_mode_then_seed() {
    let outs = run_batch(
        &ScenarioSpec::OpenField { distance: 2.0 },
        &TrialSetup::default(),
        &[false, true],
        &[5, 1, 9],
    )
    .unwrap();
    let keys: Vec<(bool, u64)> = outs.iter().map(|o| (o.monitoring_enabled, o.result.seed)).collect();
    assert_eq!(
        keys,
        vec![(false, 5), (false, 1), (false, 9), (true, 5), (true, 1), (true, 9)]
    );
}

#[test]
fn aggressive_operator_without_monitoring_collides_in_most_forest_trials() {
    let spec = ScenarioSpec::Forest(ForestParams::default());
    let seeds: Vec<u64> = (0..20).collect();
    let outs = run_batch(&spec, &TrialSetup::default(), &[false], &seeds).unwrap();
    let collided = outs.iter().filter(|o| o.result.collided).count();
    assert!(collided >= 10, "{collided}/20");
}

#[test]
fn monitoring_keeps_more_distance_in_paired_trials() {
    let spec = ScenarioSpec::Forest(ForestParams::default());
    let seeds: Vec<u64> = (0..20).collect();
    let outs = run_batch(&spec, &TrialSetup::default(), &[true, false], &seeds).unwrap();
    let (on, off) = outs.split_at(20);
    let wins = on
        .iter()
        .zip(off)
        .filter(|(a, b)| a.result.min_obstacle_distance >= b.result.min_obstacle_distance)
        .count();
    assert!(wins >= 14, "{wins}/20");
    for o in on {
        assert!(
            (1..=15).contains(&o.result.stops_issued),
            "seed {}: {}",
            o.result.seed,
            o.result.stops_issued
        );
    }
}

#[test]
fn cautious_operator_reaches_the_arena_goal() {
    let setup = TrialSetup {
        profile: Profile::Cautious,
        ..Default::default()
    };
    let out = run_trial(&generate_two_pillar_arena(), &setup, true, 2).unwrap();
    assert!(out.result.success);
    assert!(out.result.mean_speed <= 1.0 + 1e-9);
    let goal = generate_two_pillar_arena().goal;
    let last = out.trace.ticks().last().unwrap();
    assert!((last.position - goal).norm() <= 0.5 + 1e-9);
}
