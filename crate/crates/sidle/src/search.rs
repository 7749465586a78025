//! Kinodynamic path search with whole-body collision checking.
//!
//! States carry planar position, yaw, and planar velocity; controls are
//! planar acceleration plus a yaw rate, held constant over a primitive.
//! Expanding a state integrates the point-mass dynamics in closed form and
//! rejects any primitive whose swept rectangle footprint touches an
//! occupied cell, so the returned path is feasible for the full body, not
//! an inflated disc.
//!
//! The heuristic is the exact optimal cost of the relaxed problem that
//! drops collision, input bounds, and yaw: a free-space point mass steered
//! from the state to the goal under minimum control effort plus time. That
//! cost never exceeds the true remaining cost, and it is consistent, so
//! nodes pop in non-decreasing f-order.

use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::collision::pose_in_collision;
use crate::geometry::{wrap_angle, Pose2, RobotShape};
use crate::gridmap::OccupancyGrid;

/// Velocity, acceleration, and yaw-rate bounds shared by the search and
/// the trajectory optimizer.
#[derive(Clone, Copy, Debug)]
pub struct DynamicLimits {
    pub v_max: f64,
    pub a_max: f64,
    pub yaw_rate_max: f64,
}

impl Default for DynamicLimits {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            a_max: 2.0,
            yaw_rate_max: 1.0,
        }
    }
}

/// Search-space state: planar pose plus planar velocity. Yaw rate is not
/// part of the state; yaw integrates the commanded rate directly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchState {
    pub pos: [f64; 2],
    pub yaw: f64,
    pub vel: [f64; 2],
}

impl SearchState {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            pos: [x, y],
            yaw,
            vel: [0.0, 0.0],
        }
    }

    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.pos[0], self.pos[1], self.yaw)
    }
}

/// Constant control held over one primitive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlInput {
    pub acc: [f64; 2],
    pub yaw_rate: f64,
}

impl ControlInput {
    fn effort(&self) -> f64 {
        self.acc[0] * self.acc[0] + self.acc[1] * self.acc[1] + self.yaw_rate * self.yaw_rate
    }
}

#[derive(Clone, Debug)]
pub struct SearchParams {
    pub limits: DynamicLimits,
    /// Longest primitive duration; shorter multiples of it are also tried.
    pub tau: f64,
    /// Number of primitive durations: k * tau / duration_samples.
    pub duration_samples: usize,
    /// Inputs per axis are the 2r+1 values -max ..= max in steps of max/r.
    pub input_radius: usize,
    /// Weight of elapsed time in the cost.
    pub rho: f64,
    /// Weight of the velocity-heading alignment term.
    pub lambda_align: f64,
    /// Speed below which the alignment term is dropped.
    pub align_speed_floor: f64,
    /// Whole-body checks per primitive.
    pub checks_per_primitive: usize,
    /// Hard cap on node expansions.
    pub node_budget: usize,
    /// Position bin size for duplicate-state pruning.
    pub prune_pos_bin: f64,
    /// Yaw bin size for duplicate-state pruning.
    pub prune_yaw_bin: f64,
    /// Goal is reached when the prune bins match and the velocity error is
    /// at most this.
    pub goal_vel_tol: f64,
    /// Try the one-shot smooth connection whenever the popped node is
    /// within this distance of the goal...
    pub connect_radius: f64,
    /// ...and additionally on every n-th expansion regardless of distance.
    pub connect_every: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            limits: DynamicLimits::default(),
            tau: 0.5,
            duration_samples: 2,
            input_radius: 1,
            rho: 1.0,
            lambda_align: 1.0,
            align_speed_floor: 0.05,
            checks_per_primitive: 10,
            node_budget: 300_000,
            prune_pos_bin: 0.2,
            prune_yaw_bin: 10.0_f64.to_radians(),
            goal_vel_tol: 0.2,
            connect_radius: 3.0,
            connect_every: 64,
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("start pose overlaps an obstacle or leaves the map")]
    StartInCollision,
    #[error("no collision-free path exists at this discretization")]
    NoPath,
    #[error("node budget of {budget} expansions exhausted")]
    BudgetExceeded { budget: usize },
}

/// One pose along the found path, with its arrival time and velocity.
#[derive(Clone, Copy, Debug)]
pub struct PathSample {
    pub t: f64,
    pub pose: Pose2,
    pub vel: [f64; 2],
}

/// A found path: every sample was whole-body collision checked.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub samples: Vec<PathSample>,
    /// Accumulated edge costs, one per primitive plus one for the final
    /// connection when used. Sums to `cost`.
    pub leg_costs: Vec<f64>,
    pub cost: f64,
    pub expansions: usize,
    pub used_smooth_connection: bool,
}

/// Closed-form propagation of the point-mass-plus-yaw dynamics under a
/// constant input over `tau` seconds.
pub fn propagate(state: &SearchState, input: &ControlInput, tau: f64) -> SearchState {
    SearchState {
        pos: [
            state.pos[0] + state.vel[0] * tau + 0.5 * input.acc[0] * tau * tau,
            state.pos[1] + state.vel[1] * tau + 0.5 * input.acc[1] * tau * tau,
        ],
        yaw: wrap_angle(state.yaw + input.yaw_rate * tau),
        vel: [
            state.vel[0] + input.acc[0] * tau,
            state.vel[1] + input.acc[1] * tau,
        ],
    }
}

/// Cost of one primitive: control effort plus elapsed time, plus a penalty
/// on the angle between the end velocity and the end heading. The penalty
/// is skipped when the end speed is too small for its direction to mean
/// anything.
pub fn edge_cost(input: &ControlInput, tau: f64, end: &SearchState, params: &SearchParams) -> f64 {
    let mut cost = (input.effort() + params.rho) * tau;
    let speed = (end.vel[0] * end.vel[0] + end.vel[1] * end.vel[1]).sqrt();
    if speed >= params.align_speed_floor {
        let misalign = wrap_angle(end.vel[1].atan2(end.vel[0]) - end.yaw);
        cost += params.lambda_align * misalign * misalign;
    }
    cost
}

/// Minimum over T > 0 of the relaxed connection cost
/// A/T^3 + B/T^2 + C/T + rho T (point mass, no input bounds, no yaw, no
/// obstacles), returned as (cost, minimizing T). Identical states cost 0.
pub fn optimal_connection(from: &SearchState, to: &SearchState, rho: f64) -> (f64, f64) {
    let mut a_sum = 0.0;
    let mut b_sum = 0.0;
    let mut c_sum = 0.0;
    for ax in 0..2 {
        let d = to.pos[ax] - from.pos[ax];
        let v0 = from.vel[ax];
        let v1 = to.vel[ax];
        a_sum += d * d;
        b_sum += d * (v0 + v1);
        c_sum += v0 * v0 + v0 * v1 + v1 * v1;
    }
    let big_a = 12.0 * a_sum;
    let big_b = -12.0 * b_sum;
    let big_c = 4.0 * c_sum;
    if big_a + big_c < 1e-24 {
        return (0.0, 0.0);
    }
    let j = |t: f64| -> f64 { big_a / (t * t * t) + big_b / (t * t) + big_c / t + rho * t };

    // Coarse log-spaced scan, then golden-section refinement around the
    // best bracket. The cost is smooth and coercive at both ends, so the
    // scan cannot strand the refinement in a spurious well.
    let (t_lo, t_hi) = (1e-3f64, 1e3f64);
    let n = 48;
    let mut best_i = 0;
    let mut best_j = f64::INFINITY;
    let mut ts = [0.0f64; 48];
    for (i, slot) in ts.iter_mut().enumerate() {
        let f = i as f64 / (n - 1) as f64;
        let t = t_lo * (t_hi / t_lo).powf(f);
        *slot = t;
        let ji = j(t);
        if ji < best_j {
            best_j = ji;
            best_i = i;
        }
    }
    let mut lo = ts[best_i.saturating_sub(1)];
    let mut hi = ts[(best_i + 1).min(n - 1)];
    let inv_phi = 0.618_033_988_749_894_8;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut j1 = j(x1);
    let mut j2 = j(x2);
    for _ in 0..90 {
        if j1 < j2 {
            hi = x2;
            x2 = x1;
            j2 = j1;
            x1 = hi - inv_phi * (hi - lo);
            j1 = j(x1);
        } else {
            lo = x1;
            x1 = x2;
            j1 = j2;
            x2 = lo + inv_phi * (hi - lo);
            j2 = j(x2);
        }
    }
    let t_best = 0.5 * (lo + hi);
    (j(t_best).min(best_j), t_best)
}

/// Admissible, consistent cost-to-go estimate.
pub fn heuristic(state: &SearchState, goal: &SearchState, rho: f64) -> f64 {
    optimal_connection(state, goal, rho).0
}

struct Node {
    state: SearchState,
    g: f64,
    t: f64,
    parent: Option<usize>,
    arriving_input: Option<(ControlInput, f64)>,
}

struct OpenEntry {
    f: f64,
    seq: u64,
    node: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.f == other.f && self.seq == other.seq
    }
}
impl Eq for OpenEntry {}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap pops the maximum; invert so the smallest f (then the
        // earliest push) comes out first, which also fixes a total order
        // for byte-identical reruns.
        other
            .f
            .partial_cmp(&self.f)
            .expect("f is never NaN")
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Cubic per-axis connection from a state exactly onto the goal state.
struct SmoothConnection {
    duration: f64,
    /// Per planar axis: jerk alpha and initial acceleration beta of
    /// x(t) = x0 + v0 t + beta t^2 / 2 + alpha t^3 / 6.
    alpha: [f64; 2],
    beta: [f64; 2],
    yaw_rate: f64,
}

impl SmoothConnection {
    fn state_at(&self, from: &SearchState, t: f64) -> SearchState {
        let mut pos = [0.0; 2];
        let mut vel = [0.0; 2];
        for ax in 0..2 {
            pos[ax] = from.pos[ax]
                + from.vel[ax] * t
                + 0.5 * self.beta[ax] * t * t
                + self.alpha[ax] * t * t * t / 6.0;
            vel[ax] = from.vel[ax] + self.beta[ax] * t + 0.5 * self.alpha[ax] * t * t;
        }
        SearchState {
            pos,
            yaw: wrap_angle(from.yaw + self.yaw_rate * t),
            vel,
        }
    }

    fn cost(&self, params: &SearchParams, goal: &SearchState) -> f64 {
        let t = self.duration;
        let mut effort = self.yaw_rate * self.yaw_rate * t;
        for ax in 0..2 {
            let (al, be) = (self.alpha[ax], self.beta[ax]);
            effort += be * be * t + al * be * t * t + al * al * t * t * t / 3.0;
        }
        let mut cost = effort + params.rho * t;
        let speed = (goal.vel[0] * goal.vel[0] + goal.vel[1] * goal.vel[1]).sqrt();
        if speed >= params.align_speed_floor {
            let misalign = wrap_angle(goal.vel[1].atan2(goal.vel[0]) - goal.yaw);
            cost += params.lambda_align * misalign * misalign;
        }
        cost
    }
}

/// Largest magnitude of v(t) = v0 + b t + a t^2 / 2 over [0, T].
fn quadratic_extremum(v0: f64, b: f64, a: f64, t_end: f64) -> f64 {
    let mut m = v0.abs().max((v0 + b * t_end + 0.5 * a * t_end * t_end).abs());
    if a.abs() > 1e-12 {
        let t_crit = -b / a;
        if t_crit > 0.0 && t_crit < t_end {
            m = m.max((v0 + b * t_crit + 0.5 * a * t_crit * t_crit).abs());
        }
    }
    m
}

/// Try to steer exactly onto the goal state with one jerk-limited cubic
/// per axis and a constant yaw rate, honoring limits and collisions.
fn try_smooth_connection(
    grid: &OccupancyGrid,
    shape: &RobotShape,
    from: &SearchState,
    goal: &SearchState,
    params: &SearchParams,
) -> Option<SmoothConnection> {
    let (_, t) = optimal_connection(from, goal, params.rho);
    if t < 1e-3 {
        return None;
    }
    let mut alpha = [0.0; 2];
    let mut beta = [0.0; 2];
    for ax in 0..2 {
        let h = goal.pos[ax] - from.pos[ax] - from.vel[ax] * t;
        let dv = goal.vel[ax] - from.vel[ax];
        alpha[ax] = (6.0 * dv * t - 12.0 * h) / (t * t * t);
        beta[ax] = (dv - 0.5 * alpha[ax] * t * t) / t;
    }
    let dyaw = wrap_angle(goal.yaw - from.yaw);
    let yaw_rate = dyaw / t;
    if yaw_rate.abs() > params.limits.yaw_rate_max {
        return None;
    }

    // Conservative limit screen: per-axis extrema, combined by worst case.
    let vx = quadratic_extremum(from.vel[0], beta[0], alpha[0], t);
    let vy = quadratic_extremum(from.vel[1], beta[1], alpha[1], t);
    if vx * vx + vy * vy > params.limits.v_max * params.limits.v_max {
        return None;
    }
    let ax_m = beta[0].abs().max((beta[0] + alpha[0] * t).abs());
    let ay_m = beta[1].abs().max((beta[1] + alpha[1] * t).abs());
    if ax_m * ax_m + ay_m * ay_m > params.limits.a_max * params.limits.a_max {
        return None;
    }

    let conn = SmoothConnection {
        duration: t,
        alpha,
        beta,
        yaw_rate,
    };
    // Pose spacing at most half a cell at the velocity bound.
    let n = ((params.limits.v_max * t) / (0.5 * grid.resolution()))
        .ceil()
        .max(4.0) as usize;
    for k in 0..=n {
        let s = conn.state_at(from, t * k as f64 / n as f64);
        if pose_in_collision(grid, shape, &s.pose()) {
            return None;
        }
    }
    Some(conn)
}

fn prune_cell(state: &SearchState, params: &SearchParams) -> (i64, i64, i64) {
    (
        (state.pos[0] / params.prune_pos_bin).floor() as i64,
        (state.pos[1] / params.prune_pos_bin).floor() as i64,
        (wrap_angle(state.yaw) / params.prune_yaw_bin).floor() as i64,
    )
}

fn vel_close(a: &SearchState, b: &SearchState, tol: f64) -> bool {
    let dv = [a.vel[0] - b.vel[0], a.vel[1] - b.vel[1]];
    dv[0] * dv[0] + dv[1] * dv[1] <= tol * tol
}

fn enumerate_primitives(params: &SearchParams) -> Vec<(ControlInput, f64)> {
    let axis_values = |max: f64| -> Vec<f64> {
        let r = params.input_radius;
        if r == 0 {
            vec![0.0]
        } else {
            (0..=2 * r)
                .map(|k| -max + max * k as f64 / r as f64)
                .collect()
        }
    };
    let accs = axis_values(params.limits.a_max);
    let rates = axis_values(params.limits.yaw_rate_max);
    let mut prims =
        Vec::with_capacity(params.duration_samples * accs.len() * accs.len() * rates.len());
    for k in 1..=params.duration_samples {
        let tau = params.tau * k as f64 / params.duration_samples as f64;
        for &ax in &accs {
            for &ay in &accs {
                for &wz in &rates {
                    prims.push((
                        ControlInput {
                            acc: [ax, ay],
                            yaw_rate: wz,
                        },
                        tau,
                    ));
                }
            }
        }
    }
    prims
}

/// Search for a whole-body collision-free kinodynamic path.
pub fn search(
    grid: &OccupancyGrid,
    shape: &RobotShape,
    start: &SearchState,
    goal: &SearchState,
    params: &SearchParams,
) -> Result<SearchOutcome, SearchError> {
    if pose_in_collision(grid, shape, &start.pose()) {
        return Err(SearchError::StartInCollision);
    }
    // A blocked goal pose can never be reached exactly; fail fast instead
    // of exhausting the reachable set.
    if pose_in_collision(grid, shape, &goal.pose()) {
        return Err(SearchError::NoPath);
    }
    let goal_cell = prune_cell(goal, params);
    if prune_cell(start, params) == goal_cell && vel_close(start, goal, params.goal_vel_tol) {
        return Ok(SearchOutcome {
            samples: vec![PathSample {
                t: 0.0,
                pose: start.pose(),
                vel: start.vel,
            }],
            leg_costs: Vec::new(),
            cost: 0.0,
            expansions: 0,
            used_smooth_connection: false,
        });
    }

    let primitives = enumerate_primitives(params);
    let mut arena: Vec<Node> = vec![Node {
        state: *start,
        g: 0.0,
        t: 0.0,
        parent: None,
        arriving_input: None,
    }];
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    open.push(OpenEntry {
        f: heuristic(start, goal, params.rho),
        seq,
        node: 0,
    });
    let mut pruned: HashMap<(i64, i64, i64), usize> = HashMap::new();
    pruned.insert(prune_cell(start, params), 0);

    let mut expansions = 0usize;

    while let Some(entry) = open.pop() {
        let idx = entry.node;
        let cell = prune_cell(&arena[idx].state, params);
        if pruned.get(&cell) != Some(&idx) {
            continue; // superseded by a cheaper arrival in the same bin
        }
        if expansions >= params.node_budget {
            return Err(SearchError::BudgetExceeded {
                budget: params.node_budget,
            });
        }
        expansions += 1;

        let state = arena[idx].state;
        let near_goal = {
            let dx = state.pos[0] - goal.pos[0];
            let dy = state.pos[1] - goal.pos[1];
            dx * dx + dy * dy <= params.connect_radius * params.connect_radius
        };
        if near_goal || expansions.is_multiple_of(params.connect_every) {
            if let Some(conn) = try_smooth_connection(grid, shape, &state, goal, params) {
                return Ok(finish_with_connection(
                    grid, &arena, idx, conn, goal, params, expansions,
                ));
            }
        }

        for (input, tau) in &primitives {
            let child = propagate(&state, input, *tau);
            let speed2 = child.vel[0] * child.vel[0] + child.vel[1] * child.vel[1];
            if speed2 > params.limits.v_max * params.limits.v_max + 1e-9 {
                continue;
            }
            if primitive_blocked(grid, shape, &state, input, *tau, params.checks_per_primitive) {
                continue;
            }
            let g_child = arena[idx].g + edge_cost(input, *tau, &child, params);

            if prune_cell(&child, params) == goal_cell
                && vel_close(&child, goal, params.goal_vel_tol)
            {
                let node = Node {
                    state: child,
                    g: g_child,
                    t: arena[idx].t + tau,
                    parent: Some(idx),
                    arriving_input: Some((*input, *tau)),
                };
                arena.push(node);
                return Ok(finish_at_node(
                    &arena,
                    arena.len() - 1,
                    params,
                    expansions,
                ));
            }

            let child_cell = prune_cell(&child, params);
            if let Some(&old_idx) = pruned.get(&child_cell) {
                if arena[old_idx].g <= g_child + 1e-12 {
                    continue;
                }
            }
            let child_idx = arena.len();
            arena.push(Node {
                state: child,
                g: g_child,
                t: arena[idx].t + tau,
                parent: Some(idx),
                arriving_input: Some((*input, *tau)),
            });
            pruned.insert(child_cell, child_idx);
            seq += 1;
            open.push(OpenEntry {
                f: g_child + heuristic(&child, goal, params.rho),
                seq,
                node: child_idx,
            });
        }
    }
    Err(SearchError::NoPath)
}

/// Whole-body check of the poses swept by one primitive, including its end
/// pose (the start pose was validated when its node was created).
fn primitive_blocked(
    grid: &OccupancyGrid,
    shape: &RobotShape,
    from: &SearchState,
    input: &ControlInput,
    tau: f64,
    checks: usize,
) -> bool {
    for k in 1..=checks {
        let s = propagate(from, input, tau * k as f64 / checks as f64);
        if pose_in_collision(grid, shape, &s.pose()) {
            return true;
        }
    }
    false
}

fn chain_of(arena: &[Node], last: usize) -> Vec<usize> {
    let mut chain = vec![last];
    let mut cur = last;
    while let Some(p) = arena[cur].parent {
        chain.push(p);
        cur = p;
    }
    chain.reverse();
    chain
}

/// Rebuild the sample list for the node chain ending at `last`, re-sampling
/// each primitive at the poses that were collision checked.
fn samples_along_chain(arena: &[Node], chain: &[usize], params: &SearchParams) -> Vec<PathSample> {
    let mut samples = Vec::new();
    let first = &arena[chain[0]];
    samples.push(PathSample {
        t: first.t,
        pose: first.state.pose(),
        vel: first.state.vel,
    });
    for w in chain.windows(2) {
        let parent = &arena[w[0]];
        let node = &arena[w[1]];
        let (input, tau) = node.arriving_input.expect("non-root node has an edge");
        for k in 1..=params.checks_per_primitive {
            let dt = tau * k as f64 / params.checks_per_primitive as f64;
            let s = propagate(&parent.state, &input, dt);
            samples.push(PathSample {
                t: parent.t + dt,
                pose: s.pose(),
                vel: s.vel,
            });
        }
    }
    samples
}

fn leg_costs_along_chain(arena: &[Node], chain: &[usize]) -> Vec<f64> {
    chain
        .windows(2)
        .map(|w| arena[w[1]].g - arena[w[0]].g)
        .collect()
}

fn finish_at_node(
    arena: &[Node],
    last: usize,
    params: &SearchParams,
    expansions: usize,
) -> SearchOutcome {
    let chain = chain_of(arena, last);
    let samples = samples_along_chain(arena, &chain, params);
    let leg_costs = leg_costs_along_chain(arena, &chain);
    SearchOutcome {
        samples,
        leg_costs,
        cost: arena[last].g,
        expansions,
        used_smooth_connection: false,
    }
}

fn finish_with_connection(
    grid: &OccupancyGrid,
    arena: &[Node],
    last: usize,
    conn: SmoothConnection,
    goal: &SearchState,
    params: &SearchParams,
    expansions: usize,
) -> SearchOutcome {
    let chain = chain_of(arena, last);
    let mut samples = samples_along_chain(arena, &chain, params);
    let mut leg_costs = leg_costs_along_chain(arena, &chain);
    let from = &arena[last].state;
    let t0 = arena[last].t;
    let n = ((params.limits.v_max * conn.duration) / (0.5 * grid.resolution()))
        .ceil()
        .max(4.0) as usize;
    for k in 1..=n {
        let dt = conn.duration * k as f64 / n as f64;
        let s = conn.state_at(from, dt);
        samples.push(PathSample {
            t: t0 + dt,
            pose: s.pose(),
            vel: s.vel,
        });
    }
    // Land exactly on the goal state, replacing the last sample's rounding.
    let end = samples.last_mut().unwrap();
    end.pose = goal.pose();
    end.vel = goal.vel;
    let conn_cost = conn.cost(params, goal);
    leg_costs.push(conn_cost);
    SearchOutcome {
        samples,
        leg_costs,
        cost: arena[last].g + conn_cost,
        expansions,
        used_smooth_connection: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagate_matches_hand_integration() {
        let s = SearchState {
            pos: [0.0, 0.0],
            yaw: 0.0,
            vel: [1.0, 0.0],
        };
        let u = ControlInput {
            acc: [2.0, 0.0],
            yaw_rate: 0.5,
        };
        let out = propagate(&s, &u, 0.5);
        assert!((out.pos[0] - 0.75).abs() < 1e-12);
        assert!((out.pos[1] - 0.0).abs() < 1e-12);
        assert!((out.vel[0] - 2.0).abs() < 1e-12);
        assert!((out.yaw - 0.25).abs() < 1e-12);
    }

    #[test]
    fn propagate_matches_numeric_integration() {
        // Fixed-step RK4 on the same ODE as an independent reference.
        let s = SearchState {
            pos: [0.3, -0.2],
            yaw: 0.4,
            vel: [0.5, -0.1],
        };
        let u = ControlInput {
            acc: [1.3, -0.7],
            yaw_rate: 0.9,
        };
        let tau = 0.47;
        let steps = 4000;
        let h = tau / steps as f64;
        let (mut x, mut y, mut yaw, mut vx, mut vy) =
            (s.pos[0], s.pos[1], s.yaw, s.vel[0], s.vel[1]);
        for _ in 0..steps {
            // derivatives are (vx, vy, wz, ax, ay); acceleration constant,
            // so RK4 on position reduces to the trapezoid-exact update.
            let vx1 = vx + u.acc[0] * h;
            let vy1 = vy + u.acc[1] * h;
            x += 0.5 * (vx + vx1) * h;
            y += 0.5 * (vy + vy1) * h;
            yaw += u.yaw_rate * h;
            vx = vx1;
            vy = vy1;
        }
        let out = propagate(&s, &u, tau);
        assert!((out.pos[0] - x).abs() < 1e-9);
        assert!((out.pos[1] - y).abs() < 1e-9);
        assert!((out.vel[0] - vx).abs() < 1e-9);
        assert!((out.vel[1] - vy).abs() < 1e-9);
        assert!((out.yaw - wrap_angle(yaw)).abs() < 1e-9);
    }

    #[test]
    fn propagate_halves_compose() {
        let s = SearchState {
            pos: [1.0, 2.0],
            yaw: -0.3,
            vel: [-0.4, 0.8],
        };
        let u = ControlInput {
            acc: [0.6, -1.1],
            yaw_rate: -0.4,
        };
        let whole = propagate(&s, &u, 0.5);
        let half = propagate(&propagate(&s, &u, 0.25), &u, 0.25);
        assert!((whole.pos[0] - half.pos[0]).abs() < 1e-12);
        assert!((whole.pos[1] - half.pos[1]).abs() < 1e-12);
        assert!((whole.vel[0] - half.vel[0]).abs() < 1e-12);
        assert!((whole.yaw - half.yaw).abs() < 1e-12);
    }

    #[test]
    fn edge_cost_formula_is_frozen() {
        let params = SearchParams::default();
        let u = ControlInput {
            acc: [2.0, 0.0],
            yaw_rate: 1.0,
        };
        // End state moving +x while facing +x: aligned, no penalty term.
        let aligned = SearchState {
            pos: [0.0, 0.0],
            yaw: 0.0,
            vel: [1.0, 0.0],
        };
        let c = edge_cost(&u, 0.5, &aligned, &params);
        assert!((c - (4.0 + 1.0 + 1.0) * 0.5).abs() < 1e-12);
        // Facing +y while moving +x: quarter-turn misalignment.
        let sideways = SearchState {
            yaw: std::f64::consts::FRAC_PI_2,
            ..aligned
        };
        let c = edge_cost(&u, 0.5, &sideways, &params);
        let expect = 3.0 + 1.0 * (std::f64::consts::FRAC_PI_2).powi(2);
        assert!((c - expect).abs() < 1e-12);
        // Near-zero speed: no alignment term no matter the heading.
        let crawling = SearchState {
            vel: [0.01, 0.0],
            yaw: 2.0,
            ..aligned
        };
        let c = edge_cost(&u, 0.5, &crawling, &params);
        assert!((c - 3.0).abs() < 1e-12);
    }

    #[test]
    fn connection_cost_is_zero_between_identical_states() {
        let s = SearchState {
            pos: [1.0, 2.0],
            yaw: 0.5,
            vel: [0.0, 0.0],
        };
        assert_eq!(heuristic(&s, &s, 1.0), 0.0);
    }

    #[test]
    fn connection_time_matches_dense_scan() {
        // Oracle: brute-force J over a fine T grid.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let from = SearchState {
                pos: [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)],
                yaw: 0.0,
                vel: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            };
            let to = SearchState {
                pos: [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)],
                yaw: 0.0,
                vel: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            };
            let rho = rng.gen_range(0.2..4.0);
            let (cost, t_best) = optimal_connection(&from, &to, rho);

            let mut a_sum = 0.0;
            let mut b_sum = 0.0;
            let mut c_sum = 0.0;
            for ax in 0..2 {
                let d = to.pos[ax] - from.pos[ax];
                a_sum += d * d;
                b_sum += d * (from.vel[ax] + to.vel[ax]);
                c_sum += from.vel[ax] * from.vel[ax]
                    + from.vel[ax] * to.vel[ax]
                    + to.vel[ax] * to.vel[ax];
            }
            let j = |t: f64| {
                12.0 * a_sum / (t * t * t) - 12.0 * b_sum / (t * t) + 4.0 * c_sum / t + rho * t
            };
            let mut scan_best = f64::INFINITY;
            for k in 1..400_000 {
                let t = k as f64 * 1e-4 * 2.5; // up to T = 100
                scan_best = scan_best.min(j(t));
            }
            assert!(
                cost <= scan_best + 1e-6 * (1.0 + scan_best.abs()),
                "cost {cost} above scanned minimum {scan_best}"
            );
            let dj = |t: f64| (j(t + 1e-6) - j(t - 1e-6)) / 2e-6;
            assert!(
                dj(t_best).abs() < 1e-3 * (1.0 + cost),
                "not stationary at returned T"
            );
        }
    }

    fn open_map() -> OccupancyGrid {
        OccupancyGrid::new_free(100, 100, 0.1, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn straight_run_in_open_space() {
        let grid = open_map();
        let shape = RobotShape::new(1.2, 0.6).unwrap();
        let start = SearchState::new(2.0, 5.0, 0.0);
        let goal = SearchState::new(8.0, 5.0, 0.0);
        let params = SearchParams::default();
        let out = search(&grid, &shape, &start, &goal, &params).unwrap();
        assert!(out.samples.len() >= 2);
        assert!(out.cost > 0.0);
        // Every reported sample must be collision free.
        for s in &out.samples {
            assert!(!pose_in_collision(&grid, &shape, &s.pose));
        }
        // Legs sum to the total.
        let sum: f64 = out.leg_costs.iter().sum();
        assert!((sum - out.cost).abs() < 1e-9 * (1.0 + out.cost));
        // Path ends on the goal (smooth connection) or inside its bin.
        let end = out.samples.last().unwrap();
        assert!((end.pose.x - goal.pos[0]).abs() < 0.2 + 1e-9);
        assert!((end.pose.y - goal.pos[1]).abs() < 0.2 + 1e-9);
        // Times strictly increase.
        for w in out.samples.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn start_in_collision_is_reported() {
        let mut grid = open_map();
        grid.fill_rect_world(1.0, 4.0, 3.0, 6.0);
        let shape = RobotShape::new(1.2, 0.6).unwrap();
        let start = SearchState::new(2.0, 5.0, 0.0);
        let goal = SearchState::new(8.0, 5.0, 0.0);
        match search(&grid, &shape, &start, &goal, &SearchParams::default()) {
            Err(SearchError::StartInCollision) => {}
            other => panic!("expected StartInCollision, got {other:?}"),
        }
    }

    #[test]
    fn walled_goal_has_no_path() {
        let mut grid = OccupancyGrid::new_free(60, 60, 0.1, [0.0, 0.0]).unwrap();
        // Box the goal in completely.
        grid.fill_rect_world(3.0, 3.0, 5.0, 3.4);
        grid.fill_rect_world(3.0, 5.6, 5.0, 6.0);
        grid.fill_rect_world(3.0, 3.0, 3.4, 6.0);
        grid.fill_rect_world(4.6, 3.0, 5.0, 6.0);
        let shape = RobotShape::new(0.8, 0.4).unwrap();
        let start = SearchState::new(1.0, 1.0, 0.0);
        let goal = SearchState::new(4.0, 4.5, 0.0);
        match search(&grid, &shape, &start, &goal, &SearchParams::default()) {
            Err(SearchError::NoPath) => {}
            other => panic!("expected NoPath, got {other:?}"),
        }
    }

    #[test]
    fn goal_inside_wall_fails_fast() {
        let mut grid = open_map();
        grid.fill_rect_world(7.0, 4.0, 9.0, 6.0);
        let shape = RobotShape::new(1.2, 0.6).unwrap();
        let start = SearchState::new(2.0, 5.0, 0.0);
        let goal = SearchState::new(8.0, 5.0, 0.0);
        match search(&grid, &shape, &start, &goal, &SearchParams::default()) {
            Err(SearchError::NoPath) => {}
            other => panic!("expected NoPath, got {other:?}"),
        }
    }

    #[test]
    fn tiny_budget_is_reported() {
        let grid = open_map();
        let shape = RobotShape::new(1.2, 0.6).unwrap();
        let start = SearchState::new(2.0, 5.0, 0.0);
        let goal = SearchState::new(8.0, 5.0, 0.0);
        let params = SearchParams {
            node_budget: 2,
            connect_every: usize::MAX,
            connect_radius: 0.0,
            ..SearchParams::default()
        };
        match search(&grid, &shape, &start, &goal, &params) {
            Err(SearchError::BudgetExceeded { budget: 2 }) => {}
            other => panic!("expected BudgetExceeded, got {other:?}"),
        }
    }

    #[test]
    fn start_equal_goal_is_trivial() {
        let grid = open_map();
        let shape = RobotShape::new(1.2, 0.6).unwrap();
        let s = SearchState::new(5.0, 5.0, 0.3);
        let out = search(&grid, &shape, &s, &s, &SearchParams::default()).unwrap();
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.cost, 0.0);
    }

    #[test]
    fn narrow_gap_forces_reorientation() {
        // Vertical slot 0.8 m wide: the 1.2 m long robot only passes
        // aligned with the slot.
        let mut grid = OccupancyGrid::new_free(80, 120, 0.1, [0.0, 0.0]).unwrap();
        grid.fill_rect_world(0.0, 5.6, 3.6, 6.4);
        grid.fill_rect_world(4.4, 5.6, 8.0, 6.4);
        let shape = RobotShape::new(1.2, 0.6).unwrap();
        let start = SearchState::new(4.0, 2.0, 0.0);
        let goal = SearchState::new(4.0, 10.0, 0.0);
        let out = search(&grid, &shape, &start, &goal, &SearchParams::default()).unwrap();
        for s in &out.samples {
            assert!(
                !pose_in_collision(&grid, &shape, &s.pose),
                "collision at t = {}",
                s.t
            );
        }
        // Passing the slot requires a heading well away from horizontal.
        let in_slot: Vec<_> = out
            .samples
            .iter()
            .filter(|s| s.pose.y > 5.6 && s.pose.y < 6.4)
            .collect();
        assert!(!in_slot.is_empty());
        for s in in_slot {
            let tilt = (wrap_angle(s.pose.psi).abs() - std::f64::consts::FRAC_PI_2).abs();
            assert!(
                tilt < 0.8,
                "heading {} too far from vertical inside the slot",
                s.pose.psi
            );
        }
    }

    #[test]
    fn search_is_deterministic() {
        let mut grid = OccupancyGrid::new_free(80, 120, 0.1, [0.0, 0.0]).unwrap();
        grid.fill_rect_world(0.0, 5.6, 3.6, 6.4);
        grid.fill_rect_world(4.4, 5.6, 8.0, 6.4);
        let shape = RobotShape::new(1.2, 0.6).unwrap();
        let start = SearchState::new(4.0, 2.0, 0.0);
        let goal = SearchState::new(4.0, 10.0, 0.0);
        let a = search(&grid, &shape, &start, &goal, &SearchParams::default()).unwrap();
        let b = search(&grid, &shape, &start, &goal, &SearchParams::default()).unwrap();
        assert_eq!(a.expansions, b.expansions);
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.t.to_bits(), y.t.to_bits());
            assert_eq!(x.pose.x.to_bits(), y.pose.x.to_bits());
            assert_eq!(x.pose.y.to_bits(), y.pose.y.to_bits());
            assert_eq!(x.pose.psi.to_bits(), y.pose.psi.to_bits());
        }
    }
}
