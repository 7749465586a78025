//! Whole-body collision test: an oriented rectangle against the occupancy
//! grid, with no footprint inflation.
//!
//! Correctness argument for the scanline pattern: a grid cell overlapping
//! the rectangle either meets the rectangle's boundary (then one of the
//! four traversed edge segments passes through it) or lies strictly inside
//! (then it contains a full cell-sized square whose projection onto the
//! body width axis is at least one cell wide, which is wider than the
//! scanline spacing, so a scanline crosses it). Either way the cell gets
//! visited, so a pose is only ever reported free when every overlapped
//! cell is free.

use crate::geometry::{obb_vertices, Pose2, RobotShape};
use crate::gridmap::OccupancyGrid;

/// Scanline spacing as a fraction of the grid resolution. Must stay below
/// 1.0 for the coverage argument above to hold.
const SCANLINE_SPACING_FACTOR: f64 = 0.9;

/// True iff the robot rectangle at `pose` overlaps any occupied cell or
/// leaves the mapped area.
pub fn pose_in_collision(grid: &OccupancyGrid, shape: &RobotShape, pose: &Pose2) -> bool {
    let verts = obb_vertices(shape, pose);

    // Fast accept: nothing occupied anywhere under the bounding box.
    let (mut xmin, mut ymin) = (f64::INFINITY, f64::INFINITY);
    let (mut xmax, mut ymax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in &verts {
        xmin = xmin.min(v[0]);
        ymin = ymin.min(v[1]);
        xmax = xmax.max(v[0]);
        ymax = ymax.max(v[1]);
    }
    let (i0, j0) = grid.world_to_cell([xmin, ymin]);
    let (i1, j1) = grid.world_to_cell([xmax, ymax]);
    if !grid.region_has_occupied(i0, j0, i1, j1) {
        return false;
    }

    for k in 0..4 {
        if grid.segment_hits_obstacle(verts[k], verts[(k + 1) % 4]) {
            return true;
        }
    }

    let half_len = shape.length() / 2.0;
    let half_wid = shape.width() / 2.0;
    let strips = (shape.width() / (SCANLINE_SPACING_FACTOR * grid.resolution()))
        .ceil()
        .max(1.0) as usize;
    for k in 1..strips {
        let y = -half_wid + k as f64 * shape.width() / strips as f64;
        let a = pose.transform([-half_len, y]);
        let b = pose.transform([half_len, y]);
        if grid.segment_hits_obstacle(a, b) {
            return true;
        }
    }
    false
}
