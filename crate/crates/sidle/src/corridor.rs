//! Safe flight corridors: one free convex quadrilateral per path anchor.
//!
//! Each anchor's region starts as the robot rectangle at the anchor pose
//! and inflates face by face, round robin, in steps of one grid cell. A
//! face stops for good the first time its next strip would touch an
//! occupied cell or leave the map, so the final region is a rectangle in
//! the anchor's body frame that provably contains only free cells: every
//! strip was vetted by supercover segment checks along its outer edge and
//! its midline, whose spacing (half a cell) is below the smallest
//! projection width of a cell, and the perpendicular faces' later strips
//! cover the growing corners.

use thiserror::Error;

use crate::geometry::{ConvexPolygon, PolygonError, Pose2, RobotShape};
use crate::gridmap::OccupancyGrid;
use crate::search::PathSample;

#[derive(Debug, Error)]
pub enum CorridorError {
    #[error("anchor {index} at ({x:.3}, {y:.3}) overlaps an obstacle")]
    BlockedAnchor { index: usize, x: f64, y: f64 },
    #[error("degenerate corridor polygon: {0}")]
    Polygon(#[from] PolygonError),
    #[error("corridor needs at least one anchor")]
    Empty,
}

#[derive(Clone, Debug)]
pub struct CorridorParams {
    /// Arc-length spacing between anchors picked from the path.
    pub anchor_spacing: f64,
    /// Furthest any face may move out from the seed rectangle.
    pub max_expand: f64,
}

impl Default for CorridorParams {
    fn default() -> Self {
        Self {
            anchor_spacing: 0.5,
            max_expand: 2.0,
        }
    }
}

/// A pose along the path around which one corridor region is grown.
#[derive(Clone, Copy, Debug)]
pub struct Anchor {
    pub pose: Pose2,
    /// Arrival time along the source path; consecutive differences seed
    /// the trajectory segment durations.
    pub time: f64,
}

/// One convex free region, tied to the anchor it grew from.
#[derive(Clone, Debug)]
pub struct CorridorRegion {
    pub anchor: Anchor,
    pub polygon: ConvexPolygon,
    /// Face offsets beyond the robot rectangle, body frame:
    /// +x (front), +y (left), -x (back), -y (right).
    pub expansion: [f64; 4],
}

/// Pick anchors along the path at the requested arc-length spacing. The
/// first and last samples are always kept.
pub fn select_anchors(samples: &[PathSample], spacing: f64) -> Vec<Anchor> {
    assert!(spacing > 0.0);
    let mut anchors = Vec::new();
    if samples.is_empty() {
        return anchors;
    }
    anchors.push(Anchor {
        pose: samples[0].pose,
        time: samples[0].t,
    });
    let mut since_last = 0.0;
    for w in samples.windows(2) {
        let dx = w[1].pose.x - w[0].pose.x;
        let dy = w[1].pose.y - w[0].pose.y;
        since_last += (dx * dx + dy * dy).sqrt();
        if since_last >= spacing {
            anchors.push(Anchor {
                pose: w[1].pose,
                time: w[1].t,
            });
            since_last = 0.0;
        }
    }
    let last = samples.last().unwrap();
    if (anchors.last().unwrap().time - last.t).abs() > 1e-12 {
        // Replace a too-close trailing anchor rather than stacking two
        // nearly coincident regions, but never drop the start anchor.
        if anchors.len() > 1 && since_last < 0.5 * spacing {
            anchors.pop();
        }
        anchors.push(Anchor {
            pose: last.pose,
            time: last.t,
        });
    }
    anchors
}

/// Grow one free rectangle around an anchor pose. Returns the face
/// expansions; the caller builds the polygon.
fn expand_rectangle(
    grid: &OccupancyGrid,
    shape: &RobotShape,
    pose: &Pose2,
    max_expand: f64,
) -> [f64; 4] {
    let step = grid.resolution();
    let half_len = shape.length() / 2.0;
    let half_wid = shape.width() / 2.0;
    let mut offsets = [0.0f64; 4];
    let mut open = [true; 4];

    // Body-frame extents of the current rectangle.
    let extent = |offsets: &[f64; 4]| -> [f64; 4] {
        [
            half_len + offsets[0],  // +x
            half_wid + offsets[1],  // +y
            -half_len - offsets[2], // -x
            -half_wid - offsets[3], // -y
        ]
    };

    while open.iter().any(|&o| o) {
        for face in 0..4 {
            if !open[face] {
                continue;
            }
            if offsets[face] + step > max_expand + 1e-12 {
                open[face] = false;
                continue;
            }
            let e = extent(&offsets);
            // Outer edge and midline of the strip swept by this step, both
            // spanning the rectangle's full current cross extent.
            let lines = match face {
                0 => [e[0] + step, e[0] + 0.5 * step],
                1 => [e[1] + step, e[1] + 0.5 * step],
                2 => [e[2] - step, e[2] - 0.5 * step],
                _ => [e[3] - step, e[3] - 0.5 * step],
            };
            let along_x = face == 1 || face == 3;
            let mut blocked = false;
            for &line_pos in &lines {
                let (a, b) = if along_x {
                    ([e[2], line_pos], [e[0], line_pos])
                } else {
                    ([line_pos, e[3]], [line_pos, e[1]])
                };
                if grid.segment_hits_obstacle(pose.transform(a), pose.transform(b)) {
                    blocked = true;
                    break;
                }
            }
            if blocked {
                open[face] = false;
            } else {
                offsets[face] += step;
            }
        }
    }
    offsets
}

fn region_polygon(
    shape: &RobotShape,
    pose: &Pose2,
    expansion: &[f64; 4],
) -> Result<ConvexPolygon, PolygonError> {
    let half_len = shape.length() / 2.0;
    let half_wid = shape.width() / 2.0;
    let (sin, cos) = pose.psi.sin_cos();
    let faces: [([f64; 2], [f64; 2]); 4] = [
        ([cos, sin], [half_len + expansion[0], 0.0]),
        ([-sin, cos], [0.0, half_wid + expansion[1]]),
        ([-cos, -sin], [-half_len - expansion[2], 0.0]),
        ([sin, -cos], [0.0, -half_wid - expansion[3]]),
    ];
    let rows = faces
        .iter()
        .map(|(normal, body_point)| {
            let p = pose.transform(*body_point);
            (*normal, normal[0] * p[0] + normal[1] * p[1])
        })
        .collect();
    ConvexPolygon::new(rows)
}

/// Grow one region per anchor. Every anchor's seed rectangle must already
/// be collision free.
pub fn grow_corridor(
    grid: &OccupancyGrid,
    shape: &RobotShape,
    anchors: &[Anchor],
    params: &CorridorParams,
) -> Result<Vec<CorridorRegion>, CorridorError> {
    if anchors.is_empty() {
        return Err(CorridorError::Empty);
    }
    let mut regions = Vec::with_capacity(anchors.len());
    for (index, anchor) in anchors.iter().enumerate() {
        if crate::collision::pose_in_collision(grid, shape, &anchor.pose) {
            return Err(CorridorError::BlockedAnchor {
                index,
                x: anchor.pose.x,
                y: anchor.pose.y,
            });
        }
        let expansion = expand_rectangle(grid, shape, &anchor.pose, params.max_expand);
        let polygon = region_polygon(shape, &anchor.pose, &expansion)?;
        regions.push(CorridorRegion {
            anchor: *anchor,
            polygon,
            expansion,
        });
    }
    Ok(regions)
}
