//! Joint position-and-yaw trajectory optimization inside a corridor.
//!
//! Decision variables are the spline's junction waypoints (x, y, yaw) and
//! the per-segment durations, the latter through a floored softplus map so
//! any real vector is a valid, well-conditioned timing. The cost is jerk
//! energy plus
//! weighted total time plus smoothed penalties on velocity, acceleration,
//! yaw rate, and corridor containment of the whole rectangle footprint,
//! all evaluated at fixed per-segment checkpoint counts so the objective
//! is smooth in the durations.
//!
//! Every gradient is analytic. Penalties differentiate through the
//! checkpoint states into the polynomial coefficients and through both the
//! checkpoint spacing and position into the durations; the spline then
//! pulls the coefficient gradients back onto waypoints and durations with
//! one transpose solve.
//!
//! After the solver stops, the result is re-validated against the raw grid
//! at twice the checkpoint density. Any residual contact escalates the
//! corridor weight tenfold and re-optimizes from the current iterate, a
//! few times at most, before reporting failure.

use thiserror::Error;

use crate::collision::pose_in_collision;
use crate::corridor::CorridorRegion;
use crate::geometry::{wrap_angle, RobotShape};
use crate::gridmap::OccupancyGrid;
use crate::lbfgs::{self, SolverParams, StopReason};
use crate::search::DynamicLimits;
use crate::trajectory::{BoundaryState, QuinticTrajectory, TrajectoryError};

#[derive(Clone, Copy, Debug)]
pub struct PenaltyWeights {
    pub time: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub yaw_rate: f64,
    pub corridor: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self {
            time: 1.0,
            velocity: 1e4,
            acceleration: 1e4,
            yaw_rate: 1e4,
            corridor: 1e5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizerParams {
    pub weights: PenaltyWeights,
    pub limits: DynamicLimits,
    /// Target spacing of penalty checkpoints along the seed timing; the
    /// per-segment counts are frozen from it.
    pub checkpoint_dt: f64,
    /// Width of the smoothed-ramp penalty's cubic blend region.
    pub smoothing_mu: f64,
    /// Shortest allowed seed duration per segment.
    pub min_duration: f64,
    pub solver: SolverParams,
    /// Corridor-weight multiplier applied when validation finds contact.
    pub escalation_factor: f64,
    pub max_escalations: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            weights: PenaltyWeights::default(),
            limits: DynamicLimits::default(),
            checkpoint_dt: 0.05,
            smoothing_mu: 1e-2,
            min_duration: 0.1,
            solver: SolverParams::default(),
            escalation_factor: 10.0,
            max_escalations: 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("corridor must have at least two regions")]
    TooFewRegions,
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(
        "trajectory still touches obstacles after {escalations} penalty escalations \
         ({contacts} contact poses)"
    )]
    Unsafe { escalations: usize, contacts: usize },
}

/// Weighted contribution of each objective term.
#[derive(Clone, Copy, Debug, Default)]
pub struct CostBreakdown {
    pub smoothness: f64,
    pub time: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub yaw_rate: f64,
    pub corridor: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.smoothness
            + self.time
            + self.velocity
            + self.acceleration
            + self.yaw_rate
            + self.corridor
    }
}

/// One accepted solver iterate.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub gradient_norm: f64,
    pub breakdown: CostBreakdown,
}

#[derive(Debug)]
pub struct OptimizeReport {
    pub trajectory: QuinticTrajectory,
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub escalations: usize,
    pub solver_stop: StopReason,
    /// One record per accepted iterate, across all escalation rounds.
    pub diagnostics: Vec<IterationRecord>,
}

/// Smoothed one-sided ramp: zero for x <= 0, cubic-quartic blend on
/// (0, mu), then x - mu/2. Twice continuously differentiable everywhere.
/// Returns (value, derivative).
pub fn smooth_ramp(x: f64, mu: f64) -> (f64, f64) {
    if x <= 0.0 {
        (0.0, 0.0)
    } else if x < mu {
        let mu2 = mu * mu;
        let mu3 = mu2 * mu;
        (
            x * x * x / mu2 - x * x * x * x / (2.0 * mu3),
            3.0 * x * x / mu2 - 2.0 * x * x * x / mu3,
        )
    } else {
        (x - 0.5 * mu, 1.0)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn softplus_inverse(t: f64) -> f64 {
    debug_assert!(t > 0.0);
    t + (-(-t).exp()).ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Monomial basis derivative row, duplicated from the spline internals so
/// penalty gradients can be written straight into coefficient space.
fn basis_row(t: f64, order: usize) -> [f64; 6] {
    let mut b = [0.0; 6];
    for k in order..6 {
        let mut coef = 1.0;
        for d in 0..order {
            coef *= (k - d) as f64;
        }
        b[k] = coef * t.powi((k - order) as i32);
    }
    b
}

/// The penalty objective over packed decision variables: interior
/// waypoints (x, y, yaw each) followed by one softplus-mapped duration per
/// segment. Exposed so gradients can be probed directly.
pub struct PenaltyObjective<'a> {
    shape: &'a RobotShape,
    regions: &'a [CorridorRegion],
    start: BoundaryState,
    end: BoundaryState,
    /// Frozen checkpoint count per segment.
    k_counts: Vec<usize>,
    weights: PenaltyWeights,
    limits: DynamicLimits,
    mu: f64,
    /// Hard lower bound on segment durations. Keeps line-search probes
    /// away from the singular zero-duration spline system.
    t_floor: f64,
}

impl<'a> PenaltyObjective<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        shape: &'a RobotShape,
        regions: &'a [CorridorRegion],
        start: BoundaryState,
        end: BoundaryState,
        k_counts: Vec<usize>,
        weights: PenaltyWeights,
        limits: DynamicLimits,
        mu: f64,
        t_floor: f64,
    ) -> Result<Self, OptimizeError> {
        if regions.len() < 2 {
            return Err(OptimizeError::TooFewRegions);
        }
        assert_eq!(k_counts.len(), regions.len() - 1);
        assert!(k_counts.iter().all(|&k| k >= 1));
        assert!(mu > 0.0);
        assert!(t_floor >= 0.0 && t_floor.is_finite());
        Ok(Self {
            shape,
            regions,
            start,
            end,
            k_counts,
            weights,
            limits,
            mu,
            t_floor,
        })
    }

    fn segments(&self) -> usize {
        self.regions.len() - 1
    }

    /// Packed variable count: 3 per interior waypoint plus one duration
    /// per segment.
    pub fn variable_count(&self) -> usize {
        4 * self.segments() - 3
    }

    /// Pack waypoints and durations (each above the floor) into a
    /// variable vector.
    pub fn pack(&self, waypoints: &[[f64; 3]], times: &[f64]) -> Vec<f64> {
        let m = self.segments();
        assert_eq!(waypoints.len(), m - 1);
        assert_eq!(times.len(), m);
        let mut z = Vec::with_capacity(self.variable_count());
        for w in waypoints {
            z.extend_from_slice(w);
        }
        for &t in times {
            assert!(t > self.t_floor, "duration {t} at or below floor");
            z.push(softplus_inverse(t - self.t_floor));
        }
        z
    }

    pub fn unpack(&self, z: &[f64]) -> (Vec<[f64; 3]>, Vec<f64>) {
        let m = self.segments();
        let mut wps = Vec::with_capacity(m - 1);
        for i in 0..m - 1 {
            wps.push([z[3 * i], z[3 * i + 1], z[3 * i + 2]]);
        }
        let times = z[3 * (m - 1)..]
            .iter()
            .map(|&tau| self.t_floor + softplus(tau))
            .collect();
        (wps, times)
    }

    /// Objective value; the gradient lands in `grad`.
    pub fn evaluate(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let mut bd = CostBreakdown::default();
        self.evaluate_with_breakdown(z, grad, &mut bd)
    }

    /// Weighted value of each objective term at `z`.
    pub fn breakdown(&self, z: &[f64]) -> CostBreakdown {
        let mut bd = CostBreakdown::default();
        let mut scratch = vec![0.0; z.len()];
        self.evaluate_with_breakdown(z, &mut scratch, &mut bd);
        bd
    }

    /// `evaluate` that also reports each term's weighted contribution.
    fn evaluate_with_breakdown(
        &self,
        z: &[f64],
        grad: &mut [f64],
        bd: &mut CostBreakdown,
    ) -> f64 {
        let m = self.segments();
        let (wps, times) = self.unpack(z);
        let traj = QuinticTrajectory::interpolate(&self.start, &wps, &self.end, &times)
            .expect("floored softplus keeps durations positive");

        let (mut grad_c, mut grad_t) = traj.jerk_energy_gradient();
        *bd = CostBreakdown::default();
        bd.smoothness = traj.jerk_energy();

        for (i, &t) in times.iter().enumerate() {
            bd.time += self.weights.time * t;
            grad_t[i] += self.weights.time;
        }

        let body = self.shape.body_edge_samples();
        for seg in 0..m {
            let k_count = self.k_counts[seg];
            let dt = times[seg] / k_count as f64;
            for j in 0..=k_count {
                let w_trap = if j == 0 || j == k_count { 0.5 } else { 1.0 };
                let weight = w_trap * dt;
                // Rate of the checkpoint's local time in this duration.
                let t_rate = j as f64 / k_count as f64;
                let t = t_rate * times[seg];

                let p = traj.segment_derivative(seg, t, 0);
                let v = traj.segment_derivative(seg, t, 1);
                let a = traj.segment_derivative(seg, t, 2);
                let jrk = traj.segment_derivative(seg, t, 3);

                let mut point_cost = 0.0;
                // d(point_cost)/dt along the trajectory, for the moving
                // checkpoint's share of the duration gradient.
                let mut point_rate = 0.0;

                let b0 = basis_row(t, 0);
                let b1 = basis_row(t, 1);
                let b2 = basis_row(t, 2);
                let add = |grad_c: &mut [Vec<f64>; 3],
                               ch: usize,
                               row: &[f64; 6],
                               scale: f64| {
                    let base = 6 * seg;
                    for k in 0..6 {
                        grad_c[ch][base + k] += scale * row[k];
                    }
                };

                // Speed limit.
                let g_v = v[0] * v[0] + v[1] * v[1]
                    - self.limits.v_max * self.limits.v_max;
                let (val, der) = smooth_ramp(g_v, self.mu);
                if val > 0.0 {
                    let wv = self.weights.velocity;
                    point_cost += wv * val;
                    bd.velocity += weight * wv * val;
                    let s = weight * wv * der * 2.0;
                    add(&mut grad_c, 0, &b1, s * v[0]);
                    add(&mut grad_c, 1, &b1, s * v[1]);
                    point_rate += wv * der * 2.0 * (v[0] * a[0] + v[1] * a[1]);
                }

                // Acceleration limit.
                let g_a = a[0] * a[0] + a[1] * a[1]
                    - self.limits.a_max * self.limits.a_max;
                let (val, der) = smooth_ramp(g_a, self.mu);
                if val > 0.0 {
                    let wa = self.weights.acceleration;
                    point_cost += wa * val;
                    bd.acceleration += weight * wa * val;
                    let s = weight * wa * der * 2.0;
                    add(&mut grad_c, 0, &b2, s * a[0]);
                    add(&mut grad_c, 1, &b2, s * a[1]);
                    point_rate += wa * der * 2.0 * (a[0] * jrk[0] + a[1] * jrk[1]);
                }

                // Yaw-rate limit.
                let g_w = v[2] * v[2]
                    - self.limits.yaw_rate_max * self.limits.yaw_rate_max;
                let (val, der) = smooth_ramp(g_w, self.mu);
                if val > 0.0 {
                    let ww = self.weights.yaw_rate;
                    point_cost += ww * val;
                    bd.yaw_rate += weight * ww * val;
                    add(&mut grad_c, 2, &b1, weight * ww * der * 2.0 * v[2]);
                    point_rate += ww * der * 2.0 * v[2] * a[2];
                }

                // Corridor containment of every body edge point, against
                // whichever bracketing region violates less (ties keep the
                // earlier region).
                let pick = {
                    let score = |r: &CorridorRegion| -> f64 {
                        let mut total = 0.0;
                        for s in body {
                            let q = world_point(&p, s);
                            for (n, b) in r
                                .polygon
                                .normals()
                                .iter()
                                .zip(r.polygon.offsets())
                            {
                                let g = n[0] * q[0] + n[1] * q[1] - b;
                                total += smooth_ramp(g, self.mu).0;
                            }
                        }
                        total
                    };
                    let lo = score(&self.regions[seg]);
                    let hi = score(&self.regions[seg + 1]);
                    if hi < lo {
                        &self.regions[seg + 1]
                    } else {
                        &self.regions[seg]
                    }
                };
                let (sin, cos) = p[2].sin_cos();
                let wp_w = self.weights.corridor;
                for s in body {
                    let q = [
                        p[0] + cos * s[0] - sin * s[1],
                        p[1] + sin * s[0] + cos * s[1],
                    ];
                    // Body point motion from yaw: dR/dpsi * s.
                    let dq_dpsi = [-sin * s[0] - cos * s[1], cos * s[0] - sin * s[1]];
                    for (n, b) in pick
                        .polygon
                        .normals()
                        .iter()
                        .zip(pick.polygon.offsets())
                    {
                        let g = n[0] * q[0] + n[1] * q[1] - b;
                        let (val, der) = smooth_ramp(g, self.mu);
                        if val > 0.0 {
                            point_cost += wp_w * val;
                            bd.corridor += weight * wp_w * val;
                            let s_grad = weight * wp_w * der;
                            add(&mut grad_c, 0, &b0, s_grad * n[0]);
                            add(&mut grad_c, 1, &b0, s_grad * n[1]);
                            let dpsi = n[0] * dq_dpsi[0] + n[1] * dq_dpsi[1];
                            add(&mut grad_c, 2, &b0, s_grad * dpsi);
                            // Time motion of the violation: velocity of the
                            // body point projected on the face normal.
                            let qdot = [
                                v[0] + dq_dpsi[0] * v[2],
                                v[1] + dq_dpsi[1] * v[2],
                            ];
                            point_rate +=
                                wp_w * der * (n[0] * qdot[0] + n[1] * qdot[1]);
                        }
                    }
                }

                // Duration gradient: the quadrature weight stretches with
                // the duration, and the checkpoint itself rides along.
                grad_t[seg] += w_trap * point_cost / k_count as f64;
                grad_t[seg] += weight * point_rate * t_rate;
            }
        }

        let (grad_wp, grad_times) = traj.propagate_gradient(&grad_c, &grad_t);
        for i in 0..m - 1 {
            grad[3 * i] = grad_wp[i][0];
            grad[3 * i + 1] = grad_wp[i][1];
            grad[3 * i + 2] = grad_wp[i][2];
        }
        for i in 0..m {
            let tau = z[3 * (m - 1) + i];
            grad[3 * (m - 1) + i] = grad_times[i] * sigmoid(tau);
        }
        bd.total()
    }
}

fn world_point(p: &[f64; 3], body: &[f64; 2]) -> [f64; 2] {
    let (sin, cos) = p[2].sin_cos();
    [
        p[0] + cos * body[0] - sin * body[1],
        p[1] + sin * body[0] + cos * body[1],
    ]
}

/// Optimize a trajectory through the corridor. Region anchors seed the
/// waypoints and timings; the first and last anchors become the fixed
/// endpoints with the given boundary velocities (yaw rate last).
pub fn optimize(
    grid: &OccupancyGrid,
    shape: &RobotShape,
    regions: &[CorridorRegion],
    start_vel: [f64; 3],
    end_vel: [f64; 3],
    params: &OptimizerParams,
) -> Result<OptimizeReport, OptimizeError> {
    if regions.len() < 2 {
        return Err(OptimizeError::TooFewRegions);
    }
    let m = regions.len() - 1;

    // Unwrap anchor yaws into one continuous channel.
    let mut yaws = Vec::with_capacity(regions.len());
    yaws.push(regions[0].anchor.pose.psi);
    for r in &regions[1..] {
        let prev = *yaws.last().unwrap();
        yaws.push(prev + wrap_angle(r.anchor.pose.psi - prev));
    }

    let start = BoundaryState {
        pos: [regions[0].anchor.pose.x, regions[0].anchor.pose.y, yaws[0]],
        vel: start_vel,
        acc: [0.0; 3],
    };
    let end = BoundaryState {
        pos: [
            regions[m].anchor.pose.x,
            regions[m].anchor.pose.y,
            yaws[m],
        ],
        vel: end_vel,
        acc: [0.0; 3],
    };

    let seed_times: Vec<f64> = (0..m)
        .map(|i| {
            (regions[i + 1].anchor.time - regions[i].anchor.time).max(params.min_duration)
        })
        .collect();
    let k_counts: Vec<usize> = seed_times
        .iter()
        .map(|&t| ((t / params.checkpoint_dt).ceil() as usize).max(2))
        .collect();
    // Durations may shrink to half the seed floor but no further, so the
    // spline system stays well-conditioned under aggressive time descent.
    let t_floor = 0.5 * params.min_duration;

    let mut z = Vec::with_capacity(3 * (m - 1) + m);
    for i in 1..m {
        z.push(regions[i].anchor.pose.x);
        z.push(regions[i].anchor.pose.y);
        z.push(yaws[i]);
    }
    for &t in &seed_times {
        z.push(softplus_inverse(t - t_floor));
    }

    let mut weights = params.weights;
    let mut escalations = 0usize;
    let mut iterations = 0usize;
    let mut evaluations = 0usize;
    let mut diagnostics: Vec<IterationRecord> = Vec::new();
    loop {
        let problem = PenaltyObjective::new(
            shape,
            regions,
            start,
            end,
            k_counts.clone(),
            weights,
            params.limits,
            params.smoothing_mu,
            t_floor,
        )
        .expect("region count checked above");
        let record_offset = diagnostics.len();
        let out = lbfgs::minimize_observed(
            |x, g| problem.evaluate(x, g),
            z.clone(),
            &params.solver,
            |it, x, value, gradient_norm| {
                diagnostics.push(IterationRecord {
                    iteration: record_offset + it,
                    objective: value,
                    gradient_norm,
                    breakdown: problem.breakdown(x),
                });
            },
        );
        iterations += out.iterations;
        evaluations += out.evaluations;

        let (wps, times) = problem.unpack(&out.x);
        let traj = QuinticTrajectory::interpolate(&start, &wps, &end, &times)?;

        // Validate against the raw grid at twice the checkpoint density.
        let step = params.checkpoint_dt / 2.0;
        let total = traj.total_time();
        let samples = (total / step).ceil() as usize;
        let mut contacts = 0usize;
        for k in 0..=samples {
            let t = (k as f64 * step).min(total);
            let s = traj.sample(t);
            let pose = crate::geometry::Pose2::new(s.x, s.y, s.psi);
            if pose_in_collision(grid, shape, &pose) {
                contacts += 1;
            }
        }
        if contacts == 0 {
            return Ok(OptimizeReport {
                trajectory: traj,
                objective: out.value,
                iterations,
                evaluations,
                escalations,
                solver_stop: out.stop,
                diagnostics,
            });
        }
        if escalations >= params.max_escalations {
            return Err(OptimizeError::Unsafe {
                escalations,
                contacts,
            });
        }
        escalations += 1;
        weights.corridor *= params.escalation_factor;
        z = out.x;
    }
}
