//! End-to-end behavior checks on the bundled scenarios: qualitative
//! properties a correct pipeline must show, beyond the acceptance gates.

use std::path::{Path, PathBuf};

use sidle::geometry::wrap_angle;
use sidle::scenario::{self, Scenario};
use sidle::search::SearchState;

fn workspace_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

#[test]
fn open_map_produces_a_near_straight_low_jerk_line() {
    let scenario = Scenario::load(&workspace_path("scenarios/open.toml")).unwrap();
    let out = scenario::run(&scenario).unwrap();
    let traj = &out.trajectory;
    let mut max_dev = 0.0f64;
    let mut t = 0.0;
    while t <= traj.total_time() {
        let p = traj.derivative(t, 0);
        max_dev = max_dev.max((p[1] - 3.0).abs());
        t += 0.01;
    }
    assert!(max_dev < 0.05, "lateral deviation {max_dev:.3} m");
    assert!(
        out.report.dispersed_jerk < 2.0,
        "jerk {} on an unobstructed straight",
        out.report.dispersed_jerk
    );
}

#[test]
fn blocked_goal_fails_in_the_search_stage() {
    let scenario =
        Scenario::load(&workspace_path("scenarios/failing/goal_in_wall.toml")).unwrap();
    let err = scenario::run(&scenario).unwrap_err();
    assert_eq!(err.stage(), "search");
}

#[test]
fn narrow_gaps_force_yaw_alignment() {
    let scenario = Scenario::load(&workspace_path("scenarios/slot_s.toml")).unwrap();
    let out = scenario::run(&scenario).unwrap();
    let traj = &out.trajectory;
    // A 1.2 x 0.6 m body fits a 0.8 m gap only within about 0.17 rad of
    // parallel; inside each wall band the planned yaw must stay aligned.
    let bands = [[4.95, 5.35], [9.95, 10.35]];
    let mut crossings = 0;
    let mut t = 0.0;
    while t <= traj.total_time() {
        let p = traj.derivative(t, 0);
        for band in bands {
            if p[0] >= band[0] && p[0] <= band[1] {
                crossings += 1;
                let tilt = wrap_angle(p[2]).abs();
                assert!(
                    tilt < 0.2,
                    "yaw {tilt:.3} rad while crossing x = {:.2}",
                    p[0]
                );
            }
        }
        t += 0.01;
    }
    assert!(crossings > 10, "trajectory never crossed the gaps");
}

#[test]
fn start_equals_goal_degenerates_to_holding_still() {
    let scenario = Scenario {
        name: "hold".into(),
        map_path: workspace_path("maps/open.txt"),
        bitmap_geometry: None,
        shape: sidle::geometry::RobotShape::new(1.2, 0.6).unwrap(),
        start: SearchState::new(2.0, 3.0, 0.0),
        goal: SearchState::new(2.0, 3.0, 0.0),
        search: Default::default(),
        corridor: Default::default(),
        optimizer: Default::default(),
        csv_dt: 0.01,
        footprint_interval: 0.5,
    };
    let out = scenario::run(&scenario).unwrap();
    assert!(out.report.collision_valid);
    assert!(out.report.length_m < 0.05, "drifted {} m", out.report.length_m);
    let end = out.trajectory.derivative(out.trajectory.total_time(), 0);
    assert!((end[0] - 2.0).abs() < 1e-6 && (end[1] - 3.0).abs() < 1e-6);
}

#[test]
fn trajectory_ends_exactly_at_the_requested_goal() {
    for rel in ["scenarios/open.toml", "scenarios/slot_s.toml"] {
        let scenario = Scenario::load(&workspace_path(rel)).unwrap();
        let out = scenario::run(&scenario).unwrap();
        let end = out.trajectory.derivative(out.trajectory.total_time(), 0);
        assert!((end[0] - scenario.goal.pos[0]).abs() < 1e-6);
        assert!((end[1] - scenario.goal.pos[1]).abs() < 1e-6);
        assert!(wrap_angle(end[2] - scenario.goal.yaw).abs() < 1e-6);
        let end_vel = out.trajectory.derivative(out.trajectory.total_time(), 1);
        assert!(end_vel.iter().all(|v| v.abs() < 1e-6), "moving at goal");
    }
}
