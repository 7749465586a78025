//! Limited-memory BFGS with a strong Wolfe line search.
//!
//! Minimizes a smooth unconstrained function given by a value-and-gradient
//! closure. The implementation favors robustness over raw speed: curvature
//! pairs are only kept when they are safely positive, a non-descent
//! direction falls back to steepest descent with a cleared history, and a
//! failed line search retries once from steepest descent before giving up
//! with the best iterate seen.

#[derive(Clone, Debug)]
pub struct SolverParams {
    /// Curvature pairs retained for the two-loop recursion.
    pub history: usize,
    pub max_iterations: usize,
    /// Stop when the gradient norm falls below this times max(1, |f|).
    pub gradient_tol: f64,
    /// Sufficient-decrease constant.
    pub wolfe_c1: f64,
    /// Curvature constant.
    pub wolfe_c2: f64,
    /// Function evaluations allowed in one line search.
    pub max_line_steps: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            history: 8,
            max_iterations: 2000,
            gradient_tol: 1e-5,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_steps: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Gradient norm under tolerance.
    Converged,
    /// Iteration cap reached.
    IterationLimit,
    /// No acceptable step even along steepest descent.
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimize `f`, which writes the gradient into its second argument and
/// returns the value.
pub fn minimize<F>(f: F, x0: Vec<f64>, params: &SolverParams) -> SolveOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    minimize_observed(f, x0, params, |_, _, _, _| {})
}

/// `minimize` with a progress callback, invoked as
/// `observer(iteration, x, value, gradient_norm)` once for the start point
/// and once per accepted step.
pub fn minimize_observed<F, O>(
    mut f: F,
    x0: Vec<f64>,
    params: &SolverParams,
    mut observer: O,
) -> SolveOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    O: FnMut(usize, &[f64], f64, f64),
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut value = f(&x, &mut g);
    let mut evaluations = 1usize;
    observer(0, &x, value, norm(&g));

    let mut best_x = x.clone();
    let mut best_value = value;

    // Oldest-first ring of curvature pairs (step, gradient change).
    let mut hist_s: Vec<Vec<f64>> = Vec::new();
    let mut hist_y: Vec<Vec<f64>> = Vec::new();

    let mut iterations = 0usize;
    let stop = loop {
        let gnorm = norm(&g);
        if gnorm <= params.gradient_tol * value.abs().max(1.0) {
            break StopReason::Converged;
        }
        if iterations >= params.max_iterations {
            break StopReason::IterationLimit;
        }
        iterations += 1;

        // Two-loop recursion for d = -H g.
        let mut d = g.iter().map(|v| -v).collect::<Vec<f64>>();
        if !hist_s.is_empty() {
            let k = hist_s.len();
            let mut alpha = vec![0.0; k];
            for i in (0..k).rev() {
                let rho = 1.0 / dot(&hist_y[i], &hist_s[i]);
                alpha[i] = rho * dot(&hist_s[i], &d);
                for j in 0..n {
                    d[j] -= alpha[i] * hist_y[i][j];
                }
            }
            let last = k - 1;
            let gamma = dot(&hist_s[last], &hist_y[last]) / dot(&hist_y[last], &hist_y[last]);
            for v in d.iter_mut() {
                *v *= gamma;
            }
            for i in 0..k {
                let rho = 1.0 / dot(&hist_y[i], &hist_s[i]);
                let beta = rho * dot(&hist_y[i], &d);
                for j in 0..n {
                    d[j] += hist_s[i][j] * (alpha[i] - beta);
                }
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            // Quasi-Newton direction unusable; restart from scratch.
            hist_s.clear();
            hist_y.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }

        let first_step = if hist_s.is_empty() {
            (1.0 / gnorm.max(1e-12)).min(1.0)
        } else {
            1.0
        };
        let search =
            wolfe_search(&mut f, &x, value, &d, slope, first_step, params, &mut evaluations);
        let (new_value, new_x, new_g) = match search {
            Some(r) => r,
            None => {
                if hist_s.is_empty() {
                    break StopReason::LineSearchFailed;
                }
                // Retry this iteration as plain gradient descent.
                hist_s.clear();
                hist_y.clear();
                iterations -= 1;
                continue;
            }
        };

        let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if hist_s.len() == params.history {
                hist_s.remove(0);
                hist_y.remove(0);
            }
            hist_s.push(s);
            hist_y.push(y);
        }
        x = new_x;
        g = new_g;
        value = new_value;
        observer(iterations, &x, value, norm(&g));
        if value < best_value {
            best_value = value;
            best_x = x.clone();
        }
    };

    if value > best_value {
        // Return the best iterate, re-deriving its gradient norm.
        let mut gb = vec![0.0; n];
        let vb = f(&best_x, &mut gb);
        evaluations += 1;
        return SolveOutcome {
            x: best_x,
            value: vb,
            gradient_norm: norm(&gb),
            iterations,
            evaluations,
            stop,
        };
    }
    SolveOutcome {
        x,
        value,
        gradient_norm: norm(&g),
        iterations,
        evaluations,
        stop,
    }
}

type LineResult = Option<(f64, Vec<f64>, Vec<f64>)>;

/// Bracket-and-zoom strong Wolfe search along `d` from `x`. Returns the
/// accepted point's value, coordinates, and gradient.
#[allow(clippy::too_many_arguments)]
fn wolfe_search<F>(
    f: &mut F,
    x: &[f64],
    value0: f64,
    d: &[f64],
    slope0: f64,
    first_step: f64,
    params: &SolverParams,
    evaluations: &mut usize,
) -> LineResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    debug_assert!(slope0 < 0.0);
    let mut probe = |alpha: f64, g_out: &mut Vec<f64>| -> (f64, f64, Vec<f64>) {
        let xa: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let v = f(&xa, g_out);
        *evaluations += 1;
        (v, dot(g_out, d), xa)
    };

    let mut g_buf = vec![0.0; n];
    let mut alpha_prev = 0.0f64;
    let mut value_prev = value0;
    let mut slope_prev = slope0;
    let mut alpha = first_step;
    let mut steps = 0usize;

    // Invariant for zoom(lo, hi): lo satisfies sufficient decrease, and the
    // descent slope at lo points toward hi.
    let mut bracket: Option<(f64, f64, f64, f64)> = None; // lo, v_lo, slope_lo, hi
    while steps < params.max_line_steps {
        steps += 1;
        let (v, slope, xa) = probe(alpha, &mut g_buf);
        if v > value0 + params.wolfe_c1 * alpha * slope0 || (steps > 1 && v >= value_prev) {
            bracket = Some((alpha_prev, value_prev, slope_prev, alpha));
            break;
        }
        if slope.abs() <= -params.wolfe_c2 * slope0 {
            return Some((v, xa, g_buf));
        }
        if slope >= 0.0 {
            bracket = Some((alpha, v, slope, alpha_prev));
            break;
        }
        alpha_prev = alpha;
        value_prev = v;
        slope_prev = slope;
        alpha *= 2.0;
        if alpha > 1e12 {
            return None;
        }
    }
    let (mut lo, mut v_lo, _slope_lo, mut hi) = bracket?;

    while steps < params.max_line_steps {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() < 1e-16 * lo.abs().max(1.0) {
            return None;
        }
        let (v, slope, xa) = probe(mid, &mut g_buf);
        if v > value0 + params.wolfe_c1 * mid * slope0 || v >= v_lo {
            hi = mid;
        } else {
            if slope.abs() <= -params.wolfe_c2 * slope0 {
                return Some((v, xa, g_buf));
            }
            if slope * (hi - lo) >= 0.0 {
                hi = lo;
            }
            lo = mid;
            v_lo = v;
        }
    }
    None
}
