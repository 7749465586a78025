//! Piecewise quintic trajectories over three channels (x, y, yaw).
//!
//! A trajectory with M segments is pinned down by boundary position,
//! velocity and acceleration, the M-1 junction positions, and the M
//! segment durations. Requiring continuity of the first four derivatives
//! at every junction closes the system: the spline is the unique minimum
//! jerk-energy curve through those waypoints with those timings, so the
//! junction positions and durations form a complete, unconstrained
//! parameterization that an optimizer can move freely.
//!
//! [`QuinticTrajectory::propagate_gradient`] converts cost gradients taken
//! with respect to the raw polynomial coefficients into gradients with
//! respect to waypoints and durations by one transpose solve against the
//! factored constraint matrix, which keeps the optimizer's per-iteration
//! cost linear in M.

use thiserror::Error;

use crate::banded::{BandedError, BandedMatrix};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("invalid trajectory input: {0}")]
    BadInput(String),
    #[error("constraint system is singular: {0}")]
    Singular(#[from] BandedError),
}

/// Full state of one trajectory endpoint; channel order is x, y, yaw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryState {
    pub pos: [f64; 3],
    pub vel: [f64; 3],
    pub acc: [f64; 3],
}

impl BoundaryState {
    /// Endpoint at rest: zero velocity and acceleration.
    pub fn at_rest(pos: [f64; 3]) -> Self {
        Self {
            pos,
            vel: [0.0; 3],
            acc: [0.0; 3],
        }
    }
}

/// One sampled trajectory state in the order the CSV output uses.
#[derive(Clone, Copy, Debug)]
pub struct TrajPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub ax: f64,
    pub ay: f64,
}

/// Derivative order evaluated by each of the six junction rows, in row
/// order: jerk and snap continuity, waypoint interpolation, then position,
/// velocity and acceleration continuity. Index 2 is the interpolation row.
const JUNCTION_ROW_ORDERS: [usize; 6] = [3, 4, 0, 0, 1, 2];

/// Value of the d-th derivative of the monomial basis [1, t, .., t^5].
fn basis(t: f64, order: usize) -> [f64; 6] {
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

/// C4-continuous piecewise quintic over channels (x, y, yaw).
#[derive(Clone, Debug)]
pub struct QuinticTrajectory {
    times: Vec<f64>,
    cum: Vec<f64>,
    // Per channel: 6 monomial coefficients per segment, low power first.
    coeffs: [Vec<f64>; 3],
    lu: BandedMatrix,
}

impl QuinticTrajectory {
    /// Build the unique C4 spline through `waypoints` with the given
    /// endpoint states and per-segment durations. `waypoints.len()` must be
    /// `times.len() - 1`; every duration must be positive and finite.
    pub fn interpolate(
        start: &BoundaryState,
        waypoints: &[[f64; 3]],
        end: &BoundaryState,
        times: &[f64],
    ) -> Result<Self, TrajectoryError> {
        let m = times.len();
        if m == 0 {
            return Err(TrajectoryError::BadInput("no segments".into()));
        }
        if waypoints.len() + 1 != m {
            return Err(TrajectoryError::BadInput(format!(
                "{} waypoints cannot join {} segments",
                waypoints.len(),
                m
            )));
        }
        for (i, &t) in times.iter().enumerate() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(TrajectoryError::BadInput(format!(
                    "segment {i} duration {t} must be positive and finite"
                )));
            }
        }

        let n = 6 * m;
        let mut mat = BandedMatrix::zero(n, 6, 6);
        let mut rhs: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];

        // Start state rows.
        for d in 0..3 {
            let b = basis(0.0, d);
            for k in 0..6 {
                if b[k] != 0.0 {
                    mat.set(d, k, b[k]);
                }
            }
        }
        for ch in 0..3 {
            rhs[ch][0] = start.pos[ch];
            rhs[ch][1] = start.vel[ch];
            rhs[ch][2] = start.acc[ch];
        }

        // Junction blocks. Row order within a block is chosen so the
        // pivot-free elimination always meets a nonzero diagonal: the
        // high-order continuity rows land their leading basis terms on the
        // diagonal, the interpolation row pivots on t^5, and the low-order
        // continuity rows pivot on the next segment's -β(0) entries.
        // Derivative orders per row: 3, 4, 0 (waypoint), 0, 1, 2.
        for i in 0..m - 1 {
            let t = times[i];
            let row0 = 3 + 6 * i;
            let col_i = 6 * i;
            let col_next = 6 * (i + 1);

            for (slot, d) in JUNCTION_ROW_ORDERS.iter().enumerate() {
                let row = row0 + slot;
                let b_end = basis(t, *d);
                for k in 0..6 {
                    if b_end[k] != 0.0 {
                        mat.set(row, col_i + k, b_end[k]);
                    }
                }
                if slot == 2 {
                    // Interpolation row: right-hand side carries the
                    // waypoint instead of a matching term from the next
                    // segment.
                    for ch in 0..3 {
                        rhs[ch][row] = waypoints[i][ch];
                    }
                } else {
                    let b_zero = basis(0.0, *d);
                    mat.set(row, col_next + *d, -b_zero[*d]);
                }
            }
        }

        // End state rows.
        let t_last = times[m - 1];
        let col_last = 6 * (m - 1);
        for d in 0..3 {
            let row = n - 3 + d;
            let b = basis(t_last, d);
            for k in 0..6 {
                if b[k] != 0.0 {
                    mat.set(row, col_last + k, b[k]);
                }
            }
        }
        for ch in 0..3 {
            rhs[ch][n - 3] = end.pos[ch];
            rhs[ch][n - 2] = end.vel[ch];
            rhs[ch][n - 1] = end.acc[ch];
        }

        mat.factorize()?;
        for ch in 0..3 {
            mat.solve(&mut rhs[ch])?;
        }

        let mut cum = Vec::with_capacity(m + 1);
        cum.push(0.0);
        for &t in times {
            cum.push(cum.last().unwrap() + t);
        }

        Ok(Self {
            times: times.to_vec(),
            cum,
            coeffs: rhs,
            lu: mat,
        })
    }

    pub fn num_segments(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn total_time(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Monomial coefficients of one channel, 6 per segment.
    pub fn coefficients(&self, channel: usize) -> &[f64] {
        &self.coeffs[channel]
    }

    /// Segment index and local time for a global time, clamped to the
    /// trajectory's span.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let m = self.times.len();
        let t = t.clamp(0.0, self.total_time());
        let seg = self.cum.partition_point(|&c| c <= t).saturating_sub(1);
        let seg = seg.min(m - 1);
        (seg, t - self.cum[seg])
    }

    /// Derivative of one channel within a segment at local time `tau`.
    pub fn segment_channel_derivative(
        &self,
        channel: usize,
        segment: usize,
        tau: f64,
        order: usize,
    ) -> f64 {
        let b = basis(tau, order);
        let c = &self.coeffs[channel][6 * segment..6 * segment + 6];
        (0..6).map(|k| b[k] * c[k]).sum()
    }

    /// Derivative of all three channels within a segment.
    pub fn segment_derivative(&self, segment: usize, tau: f64, order: usize) -> [f64; 3] {
        [
            self.segment_channel_derivative(0, segment, tau, order),
            self.segment_channel_derivative(1, segment, tau, order),
            self.segment_channel_derivative(2, segment, tau, order),
        ]
    }

    /// Derivative of all three channels at a global time (clamped).
    pub fn derivative(&self, t: f64, order: usize) -> [f64; 3] {
        let (seg, tau) = self.locate(t);
        self.segment_derivative(seg, tau, order)
    }

    /// Position, velocity and acceleration at a global time.
    pub fn sample(&self, t: f64) -> TrajPoint {
        let p = self.derivative(t, 0);
        let v = self.derivative(t, 1);
        let a = self.derivative(t, 2);
        TrajPoint {
            t,
            x: p[0],
            y: p[1],
            psi: p[2],
            vx: v[0],
            vy: v[1],
            omega: v[2],
            ax: a[0],
            ay: a[1],
        }
    }

    /// Integral of the squared jerk over all channels and segments,
    /// evaluated in closed form from the quintic coefficients.
    pub fn jerk_energy(&self) -> f64 {
        let mut total = 0.0;
        for seg in 0..self.times.len() {
            let t = self.times[seg];
            for ch in 0..3 {
                let c = &self.coeffs[ch][6 * seg..6 * seg + 6];
                total += segment_jerk_energy(c, t);
            }
        }
        total
    }

    /// Gradient of [`jerk_energy`](Self::jerk_energy) with respect to the
    /// raw coefficients (per channel) and its direct dependence on the
    /// durations. Feed both into
    /// [`propagate_gradient`](Self::propagate_gradient) for waypoint and
    /// duration gradients.
    pub fn jerk_energy_gradient(&self) -> ([Vec<f64>; 3], Vec<f64>) {
        let m = self.times.len();
        let mut grad_c: [Vec<f64>; 3] = [vec![0.0; 6 * m], vec![0.0; 6 * m], vec![0.0; 6 * m]];
        let mut grad_t = vec![0.0; m];
        for seg in 0..m {
            let t = self.times[seg];
            for ch in 0..3 {
                let c = &self.coeffs[ch][6 * seg..6 * seg + 6];
                let g = segment_jerk_energy_coeff_grad(c, t);
                for k in 0..6 {
                    grad_c[ch][6 * seg + k] += g[k];
                }
                // d/dT of the integral's upper limit: the integrand at T.
                let jerk_at_t = self.segment_channel_derivative(ch, seg, t, 3);
                grad_t[seg] += jerk_at_t * jerk_at_t;
            }
        }
        (grad_c, grad_t)
    }

    /// Pull a cost gradient back through the spline construction: given
    /// dJ/d(coefficients) and the part of dJ/d(durations) that does not go
    /// through the coefficients, return (dJ/d(waypoints), dJ/d(durations)).
    pub fn propagate_gradient(
        &self,
        grad_coeffs: &[Vec<f64>; 3],
        grad_times_direct: &[f64],
    ) -> (Vec<[f64; 3]>, Vec<f64>) {
        let m = self.times.len();
        assert_eq!(grad_times_direct.len(), m);
        let mut grad_wp = vec![[0.0; 3]; m - 1];
        let mut grad_t = grad_times_direct.to_vec();

        for ch in 0..3 {
            assert_eq!(grad_coeffs[ch].len(), 6 * m);
            let mut lambda = grad_coeffs[ch].clone();
            self.lu
                .solve_transpose(&mut lambda)
                .expect("factored at construction");

            // Waypoint positions sit on the junction interpolation rows'
            // right-hand side, so their gradient is the multiplier there.
            for i in 0..m - 1 {
                grad_wp[i][ch] += lambda[5 + 6 * i];
            }

            // Every row evaluating segment i at its end time T_i shifts
            // when T_i moves; the row value's rate is the next-order
            // derivative of the segment at T_i.
            for i in 0..m {
                let t = self.times[i];
                if i + 1 < m {
                    let base = 3 + 6 * i;
                    for (slot, d) in JUNCTION_ROW_ORDERS.iter().enumerate() {
                        grad_t[i] -= lambda[base + slot]
                            * self.segment_channel_derivative(ch, i, t, d + 1);
                    }
                } else {
                    let base = 6 * m - 3;
                    for d in 0..3 {
                        grad_t[i] -= lambda[base + d]
                            * self.segment_channel_derivative(ch, i, t, d + 1);
                    }
                }
            }
        }
        (grad_wp, grad_t)
    }
}

/// Closed form of the squared-jerk integral of one quintic over [0, T].
fn segment_jerk_energy(c: &[f64], t: f64) -> f64 {
    let (c3, c4, c5) = (c[3], c[4], c[5]);
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    36.0 * c3 * c3 * t
        + 144.0 * c3 * c4 * t2
        + (192.0 * c4 * c4 + 240.0 * c3 * c5) * t3
        + 720.0 * c4 * c5 * t4
        + 720.0 * c5 * c5 * t5
}

fn segment_jerk_energy_coeff_grad(c: &[f64], t: f64) -> [f64; 6] {
    let (c3, c4, c5) = (c[3], c[4], c[5]);
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    [
        0.0,
        0.0,
        0.0,
        72.0 * c3 * t + 144.0 * c4 * t2 + 240.0 * c5 * t3,
        144.0 * c3 * t2 + 384.0 * c4 * t3 + 720.0 * c5 * t4,
        240.0 * c3 * t3 + 720.0 * c4 * t4 + 1440.0 * c5 * t5,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_instance(
        rng: &mut impl Rng,
        m: usize,
    ) -> (BoundaryState, Vec<[f64; 3]>, BoundaryState, Vec<f64>) {
        let rand3 = |rng: &mut dyn rand::RngCore, s: f64| {
            [
                rng.gen_range(-s..s),
                rng.gen_range(-s..s),
                rng.gen_range(-s..s),
            ]
        };
        let start = BoundaryState {
            pos: rand3(rng, 3.0),
            vel: rand3(rng, 1.0),
            acc: rand3(rng, 1.0),
        };
        let end = BoundaryState {
            pos: rand3(rng, 3.0),
            vel: rand3(rng, 1.0),
            acc: rand3(rng, 1.0),
        };
        let waypoints: Vec<[f64; 3]> = (0..m - 1).map(|_| rand3(rng, 3.0)).collect();
        let times: Vec<f64> = (0..m).map(|_| rng.gen_range(0.4..2.0)).collect();
        (start, waypoints, end, times)
    }

    #[test]
    fn rest_to_rest_unit_segment_is_the_classic_quintic() {
        let start = BoundaryState::at_rest([0.0, 0.0, 0.0]);
        let end = BoundaryState::at_rest([1.0, -2.0, 0.5]);
        let traj = QuinticTrajectory::interpolate(&start, &[], &end, &[1.0]).unwrap();
        // Each channel is d * (10 t^3 - 15 t^4 + 6 t^5).
        for (ch, d) in [(0usize, 1.0f64), (1, -2.0), (2, 0.5)] {
            let c = traj.coefficients(ch);
            let expect = [0.0, 0.0, 0.0, 10.0 * d, -15.0 * d, 6.0 * d];
            for k in 0..6 {
                assert!(
                    (c[k] - expect[k]).abs() < 1e-9,
                    "channel {ch} coeff {k}: {} vs {}",
                    c[k],
                    expect[k]
                );
            }
        }
        // Unit displacement costs exactly 720 in squared jerk.
        let d2 = 1.0f64 + 4.0 + 0.25;
        assert!((traj.jerk_energy() - 720.0 * d2).abs() < 1e-9 * 720.0 * d2);
    }

    #[test]
    fn boundary_and_waypoints_are_interpolated() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let m = rng.gen_range(1..8);
            let (start, wps, end, times) = random_instance(&mut rng, m);
            let traj = QuinticTrajectory::interpolate(&start, &wps, &end, &times).unwrap();
            let total = traj.total_time();
            for ch in 0..3 {
                assert!((traj.derivative(0.0, 0)[ch] - start.pos[ch]).abs() < 1e-9);
                assert!((traj.derivative(0.0, 1)[ch] - start.vel[ch]).abs() < 1e-9);
                assert!((traj.derivative(0.0, 2)[ch] - start.acc[ch]).abs() < 1e-9);
                assert!((traj.derivative(total, 0)[ch] - end.pos[ch]).abs() < 1e-9);
                assert!((traj.derivative(total, 1)[ch] - end.vel[ch]).abs() < 1e-9);
                assert!((traj.derivative(total, 2)[ch] - end.acc[ch]).abs() < 1e-9);
            }
            let mut t_acc = 0.0;
            for (i, wp) in wps.iter().enumerate() {
                t_acc += times[i];
                let p = traj.derivative(t_acc, 0);
                for ch in 0..3 {
                    assert!(
                        (p[ch] - wp[ch]).abs() < 1e-9,
                        "waypoint {i} channel {ch}: {} vs {}",
                        p[ch],
                        wp[ch]
                    );
                }
            }
        }
    }

    #[test]
    fn junctions_are_c4_continuous() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        for _ in 0..20 {
            let m = rng.gen_range(2..8);
            let (start, wps, end, times) = random_instance(&mut rng, m);
            let traj = QuinticTrajectory::interpolate(&start, &wps, &end, &times).unwrap();
            for i in 0..m - 1 {
                for order in 0..=4 {
                    let left = traj.segment_derivative(i, times[i], order);
                    let right = traj.segment_derivative(i + 1, 0.0, order);
                    for ch in 0..3 {
                        let scale = 1.0 + left[ch].abs().max(right[ch].abs());
                        assert!(
                            (left[ch] - right[ch]).abs() < 1e-9 * scale,
                            "junction {i} order {order} channel {ch}: {} vs {}",
                            left[ch],
                            right[ch]
                        );
                    }
                }
            }
        }
    }

    /// Composite Simpson quadrature of the squared jerk, segment by
    /// segment; the independent reference for the closed form.
    fn quadrature_jerk_energy(traj: &QuinticTrajectory, nodes: usize) -> f64 {
        let mut total = 0.0;
        for seg in 0..traj.num_segments() {
            let t = traj.times()[seg];
            let h = t / nodes as f64;
            let f = |tau: f64| -> f64 {
                let j = traj.segment_derivative(seg, tau, 3);
                j[0] * j[0] + j[1] * j[1] + j[2] * j[2]
            };
            let mut s = f(0.0) + f(t);
            for k in 1..nodes {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                s += w * f(k as f64 * h);
            }
            total += s * h / 3.0;
        }
        total
    }

    #[test]
    fn jerk_energy_matches_quadrature() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let m = rng.gen_range(1..7);
            let (start, wps, end, times) = random_instance(&mut rng, m);
            let traj = QuinticTrajectory::interpolate(&start, &wps, &end, &times).unwrap();
            let closed = traj.jerk_energy();
            let quad = quadrature_jerk_energy(&traj, 2000);
            assert!(
                (closed - quad).abs() < 1e-8 * (1.0 + closed.abs()),
                "{closed} vs {quad}"
            );
        }
    }

    #[test]
    fn gradient_propagation_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(24);
        let energy = |start: &BoundaryState,
                      wps: &[[f64; 3]],
                      end: &BoundaryState,
                      times: &[f64]|
         -> f64 {
            QuinticTrajectory::interpolate(start, wps, end, times)
                .unwrap()
                .jerk_energy()
        };
        for _ in 0..5 {
            let m = rng.gen_range(2..6);
            let (start, wps, end, times) = random_instance(&mut rng, m);
            let traj = QuinticTrajectory::interpolate(&start, &wps, &end, &times).unwrap();
            let (gc, gt_direct) = traj.jerk_energy_gradient();
            let (grad_wp, grad_t) = traj.propagate_gradient(&gc, &gt_direct);

            let h = 1e-6;
            for i in 0..m - 1 {
                for ch in 0..3 {
                    let mut hi = wps.clone();
                    let mut lo = wps.clone();
                    hi[i][ch] += h;
                    lo[i][ch] -= h;
                    let fd = (energy(&start, &hi, &end, &times)
                        - energy(&start, &lo, &end, &times))
                        / (2.0 * h);
                    let scale = 1.0 + fd.abs();
                    assert!(
                        (grad_wp[i][ch] - fd).abs() < 1e-5 * scale,
                        "waypoint {i} ch {ch}: analytic {} fd {}",
                        grad_wp[i][ch],
                        fd
                    );
                }
            }
            for i in 0..m {
                let mut hi = times.clone();
                let mut lo = times.clone();
                hi[i] += h;
                lo[i] -= h;
                let fd =
                    (energy(&start, &wps, &end, &hi) - energy(&start, &wps, &end, &lo))
                        / (2.0 * h);
                let scale = 1.0 + fd.abs();
                assert!(
                    (grad_t[i] - fd).abs() < 1e-5 * scale,
                    "duration {i}: analytic {} fd {}",
                    grad_t[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn sampling_clamps_to_span() {
        let start = BoundaryState::at_rest([0.0, 0.0, 0.0]);
        let end = BoundaryState::at_rest([1.0, 1.0, 1.0]);
        let traj = QuinticTrajectory::interpolate(&start, &[], &end, &[2.0]).unwrap();
        let before = traj.sample(-1.0);
        let after = traj.sample(5.0);
        assert!((before.x - 0.0).abs() < 1e-12);
        assert!((after.x - 1.0).abs() < 1e-9);
        assert!((after.t - 5.0).abs() < 1e-12, "sample keeps the asked time");
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let s = BoundaryState::at_rest([0.0; 3]);
        assert!(QuinticTrajectory::interpolate(&s, &[], &s, &[]).is_err());
        assert!(QuinticTrajectory::interpolate(&s, &[[0.0; 3]], &s, &[1.0]).is_err());
        assert!(QuinticTrajectory::interpolate(&s, &[], &s, &[0.0]).is_err());
        assert!(QuinticTrajectory::interpolate(&s, &[], &s, &[-1.0]).is_err());
        assert!(QuinticTrajectory::interpolate(&s, &[], &s, &[f64::NAN]).is_err());
    }
}
