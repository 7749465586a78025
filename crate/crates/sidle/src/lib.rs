//! Whole-body motion planning for rectangular robots in tight 2-D spaces.
//!
//! The pipeline turns an occupancy grid plus start and goal poses into a
//! smooth, dynamically feasible trajectory for a rectangle that must
//! exploit its own orientation to pass gaps narrower than its length:
//!
//! 1. [`search`] finds a coarse kinodynamic path whose every intermediate
//!    pose is collision-checked with the full rectangle footprint.
//! 2. [`corridor`] grows a sequence of free convex quadrilaterals around
//!    that path, one per sampled anchor pose.
//! 3. [`trajectory`] represents the motion as piecewise quintic
//!    polynomials in position and yaw, pinned to the corridor junctions.
//! 4. [`optimizer`] reshapes waypoints and segment times to minimize jerk
//!    plus penalty terms that keep every body point inside its corridor
//!    polygon and the dynamics within limits.
//!
//! [`scenario`] wires the stages together behind a single [`scenario::run`]
//! call, which the command-line tool wraps.

// Numeric kernels index several arrays with one loop variable; iterator
// rewrites obscure them. Negated comparisons keep NaN on the error path.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod collision;
pub mod corridor;
pub mod geometry;
pub mod gridmap;
pub mod lbfgs;
pub mod metrics;
pub mod optimizer;
pub mod scenario;
pub mod search;
pub mod svg;
pub mod trajectory;

#[cfg(doctest)]
mod doctest;
