//! Shared oracles and generators for the integration suites.

use rand::Rng;

use sidle::corridor::{Anchor, CorridorRegion};
use sidle::geometry::{ConvexPolygon, Pose2, RobotShape};
use sidle::gridmap::OccupancyGrid;
use sidle::trajectory::{BoundaryState, QuinticTrajectory};

/// Ground-truth collision test: rasterize the rectangle interior on a
/// sub-cell lattice and look every point up in the grid. Step is a fraction
/// of the cell size, so no free verdict can hide an occupied cell bigger
/// than the lattice spacing.
pub fn rasterized_in_collision(
    grid: &OccupancyGrid,
    shape: &RobotShape,
    pose: &Pose2,
    step: f64,
) -> bool {
    let (sin, cos) = pose.psi.sin_cos();
    let hl = shape.length() / 2.0;
    let hw = shape.width() / 2.0;
    let nx = (shape.length() / step).ceil() as usize;
    let ny = (shape.width() / step).ceil() as usize;
    for i in 0..=nx {
        let bx = -hl + shape.length() * i as f64 / nx as f64;
        for j in 0..=ny {
            let by = -hw + shape.width() * j as f64 / ny as f64;
            let p = [
                pose.x + cos * bx - sin * by,
                pose.y + sin * bx + cos * by,
            ];
            if grid.is_point_occupied(p) {
                return true;
            }
        }
    }
    false
}

/// Random map with a mix of single cells and small rectangular blobs.
pub fn random_map<R: Rng>(rng: &mut R, cells: usize, res: f64) -> OccupancyGrid {
    let mut grid = OccupancyGrid::new_free(cells, cells, res, [0.0, 0.0]).unwrap();
    let singles = rng.gen_range(10..40);
    for _ in 0..singles {
        let i = rng.gen_range(0..cells) as i64;
        let j = rng.gen_range(0..cells) as i64;
        grid.set_occupied(i, j, true);
    }
    let blobs = rng.gen_range(1..4);
    let extent = cells as f64 * res;
    for _ in 0..blobs {
        let x0 = rng.gen_range(0.0..extent * 0.8);
        let y0 = rng.gen_range(0.0..extent * 0.8);
        let w = rng.gen_range(res..extent * 0.2);
        let h = rng.gen_range(res..extent * 0.2);
        grid.fill_rect_world(x0, y0, x0 + w, y0 + h);
    }
    grid
}

/// Random multi-segment quintic with nonzero boundary motion.
pub fn random_quintic<R: Rng>(rng: &mut R) -> QuinticTrajectory {
    let segments = rng.gen_range(1..=4usize);
    let rand3 = |rng: &mut R, scale: f64| -> [f64; 3] {
        [
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        ]
    };
    let start = BoundaryState {
        pos: rand3(rng, 3.0),
        vel: rand3(rng, 0.8),
        acc: rand3(rng, 0.5),
    };
    let end = BoundaryState {
        pos: rand3(rng, 3.0),
        vel: rand3(rng, 0.8),
        acc: rand3(rng, 0.5),
    };
    let waypoints: Vec<[f64; 3]> = (0..segments - 1).map(|_| rand3(rng, 3.0)).collect();
    let times: Vec<f64> = (0..segments)
        .map(|_| rng.gen_range(0.8..2.5))
        .collect();
    QuinticTrajectory::interpolate(&start, &waypoints, &end, &times).unwrap()
}

/// Rectangle-shaped convex region centered on a pose, inflated by `margin`
/// beyond the robot footprint.
pub fn boxy_region(shape: &RobotShape, pose: Pose2, time: f64, margin: f64) -> CorridorRegion {
    let (sin, cos) = pose.psi.sin_cos();
    let hl = shape.length() / 2.0 + margin;
    let hw = shape.width() / 2.0 + margin;
    let c = [pose.x, pose.y];
    let axes = [[cos, sin], [-sin, cos]];
    let rows = vec![
        ([axes[0][0], axes[0][1]], axes[0][0] * c[0] + axes[0][1] * c[1] + hl),
        ([-axes[0][0], -axes[0][1]], -(axes[0][0] * c[0] + axes[0][1] * c[1]) + hl),
        ([axes[1][0], axes[1][1]], axes[1][0] * c[0] + axes[1][1] * c[1] + hw),
        ([-axes[1][0], -axes[1][1]], -(axes[1][0] * c[0] + axes[1][1] * c[1]) + hw),
    ];
    CorridorRegion {
        anchor: Anchor { pose, time },
        polygon: ConvexPolygon::new(rows).unwrap(),
        expansion: [margin; 4],
    }
}

/// Random chain of overlapping boxy regions for objective probing: a
/// wandering heading with gentle pose increments keeps consecutive regions
/// intersecting.
pub fn random_region_chain<R: Rng>(
    rng: &mut R,
    shape: &RobotShape,
    segments: usize,
) -> Vec<CorridorRegion> {
    let mut regions = Vec::with_capacity(segments + 1);
    let mut pose = Pose2::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-0.5..0.5),
    );
    let mut t = 0.0;
    for _ in 0..=segments {
        let margin = rng.gen_range(0.15..0.5);
        regions.push(boxy_region(shape, pose, t, margin));
        let step = rng.gen_range(0.3..0.7);
        pose = Pose2::new(
            pose.x + step * pose.psi.cos(),
            pose.y + step * pose.psi.sin(),
            pose.psi + rng.gen_range(-0.3..0.3),
        );
        t += rng.gen_range(0.5..1.2);
    }
    regions
}
