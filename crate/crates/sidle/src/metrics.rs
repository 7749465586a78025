//! Summary statistics for finished trajectories.

use crate::trajectory::QuinticTrajectory;

/// Aggregate kinematic profile of a trajectory, sampled densely.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryStats {
    pub duration: f64,
    /// Arc length of the position channel.
    pub length: f64,
    pub max_speed: f64,
    pub max_acceleration: f64,
    pub max_yaw_rate: f64,
    /// Jerk measure: Riemann sum of squared translational jerk plus
    /// squared yaw jerk at the given sampling step.
    pub dispersed_jerk: f64,
}

/// Riemann-sum jerk measure at step `dt`: sum over samples of
/// (|p'''|^2 + psi'''^2) * dt, taken at t = i*dt for i in 0..floor(T/dt).
pub fn dispersed_jerk(traj: &QuinticTrajectory, dt: f64) -> f64 {
    assert!(dt > 0.0, "sampling step must be positive");
    let total = traj.total_time();
    let steps = (total / dt).floor() as usize;
    let mut sum = 0.0;
    for i in 0..steps {
        let j = traj.derivative(i as f64 * dt, 3);
        sum += (j[0] * j[0] + j[1] * j[1] + j[2] * j[2]) * dt;
    }
    sum
}

/// Sample the trajectory at step `dt` and collect its aggregate stats.
pub fn trajectory_stats(traj: &QuinticTrajectory, dt: f64) -> TrajectoryStats {
    assert!(dt > 0.0, "sampling step must be positive");
    let total = traj.total_time();
    let steps = (total / dt).ceil() as usize;
    let mut length = 0.0;
    let mut max_speed: f64 = 0.0;
    let mut max_acc: f64 = 0.0;
    let mut max_yaw_rate: f64 = 0.0;
    let mut prev = traj.derivative(0.0, 0);
    for i in 0..=steps {
        let t = (i as f64 * dt).min(total);
        let p = traj.derivative(t, 0);
        let v = traj.derivative(t, 1);
        let a = traj.derivative(t, 2);
        length += ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2)).sqrt();
        prev = p;
        max_speed = max_speed.max((v[0] * v[0] + v[1] * v[1]).sqrt());
        max_acc = max_acc.max((a[0] * a[0] + a[1] * a[1]).sqrt());
        max_yaw_rate = max_yaw_rate.max(v[2].abs());
    }
    TrajectoryStats {
        duration: total,
        length,
        max_speed,
        max_acceleration: max_acc,
        max_yaw_rate,
        dispersed_jerk: dispersed_jerk(traj, dt),
    }
}
