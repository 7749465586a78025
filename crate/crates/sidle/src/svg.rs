//! SVG rendering of maps, paths, corridors, and trajectories.
//!
//! Output is a standalone document. All layers share one world-to-page
//! affine map that preserves aspect ratio and flips y so the world's +y
//! points up the page.

use std::fmt::Write;

use crate::corridor::CorridorRegion;
use crate::geometry::{obb_vertices, Pose2, RobotShape};
use crate::gridmap::OccupancyGrid;
use crate::search::PathSample;
use crate::trajectory::QuinticTrajectory;

#[derive(Clone, Copy, Debug)]
pub struct RenderOptions {
    /// Page width in pixels; height follows from the world aspect ratio.
    pub page_width: f64,
    /// Spacing of robot footprints along the trajectory, seconds.
    pub footprint_interval: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            page_width: 800.0,
            footprint_interval: 0.5,
        }
    }
}

/// World-to-page affine: uniform scale, y flipped, fixed pixel margin.
#[derive(Clone, Copy, Debug)]
struct PageMap {
    x0: f64,
    y1: f64,
    scale: f64,
    margin: f64,
}

impl PageMap {
    fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.x0) * self.scale + self.margin,
            (self.y1 - p[1]) * self.scale + self.margin,
        ]
    }
}

fn world_extent(
    grid: Option<&OccupancyGrid>,
    path: Option<&[PathSample]>,
    corridor: Option<&[CorridorRegion]>,
    traj: Option<&QuinticTrajectory>,
) -> ([f64; 2], [f64; 2]) {
    if let Some(g) = grid {
        let b = g.world_bounds();
        return ([b[0], b[1]], [b[2], b[3]]);
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut take = |p: [f64; 2]| {
        lo[0] = lo[0].min(p[0]);
        lo[1] = lo[1].min(p[1]);
        hi[0] = hi[0].max(p[0]);
        hi[1] = hi[1].max(p[1]);
    };
    if let Some(samples) = path {
        for s in samples {
            take([s.pose.x, s.pose.y]);
        }
    }
    if let Some(regions) = corridor {
        for r in regions {
            for v in r.polygon.vertices() {
                take(v);
            }
        }
    }
    if let Some(t) = traj {
        let total = t.total_time();
        for k in 0..=100 {
            let p = t.derivative(total * k as f64 / 100.0, 0);
            take([p[0], p[1]]);
        }
    }
    if lo[0] > hi[0] {
        return ([0.0, 0.0], [1.0, 1.0]);
    }
    (lo, hi)
}

fn polygon_points(map: &PageMap, vertices: &[[f64; 2]]) -> String {
    let mut s = String::new();
    for (i, &v) in vertices.iter().enumerate() {
        let p = map.apply(v);
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.3},{:.3}", p[0], p[1]);
    }
    s
}

/// Render any subset of layers to a complete SVG document. Footprints are
/// drawn when both a trajectory and a shape are given, one every
/// `footprint_interval` seconds starting at t = 0.
pub fn render_svg(
    grid: Option<&OccupancyGrid>,
    path: Option<&[PathSample]>,
    corridor: Option<&[CorridorRegion]>,
    traj: Option<&QuinticTrajectory>,
    shape: Option<&RobotShape>,
    opts: &RenderOptions,
) -> String {
    let (lo, hi) = world_extent(grid, path, corridor, traj);
    let extent = [(hi[0] - lo[0]).max(1e-9), (hi[1] - lo[1]).max(1e-9)];
    let margin = 10.0;
    let scale = (opts.page_width - 2.0 * margin).max(1.0) / extent[0];
    let map = PageMap {
        x0: lo[0],
        y1: hi[1],
        scale,
        margin,
    };
    let page = [
        extent[0] * scale + 2.0 * margin,
        extent[1] * scale + 2.0 * margin,
    ];

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.3} {:.3}">"#,
        page[0], page[1], page[0], page[1]
    );
    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{:.3}" height="{:.3}" fill="#ffffff" stroke="#333333" stroke-width="1"/>"##,
        page[0], page[1]
    );

    if let Some(g) = grid {
        let _ = writeln!(out, r##"<g fill="#45484d">"##);
        let res = g.resolution();
        let origin = g.origin();
        // Merge horizontal runs of occupied cells into single rects.
        for row in 0..g.height_cells() {
            let mut col = 0;
            while col < g.width_cells() {
                if !g.is_cell_occupied(col as i64, row as i64) {
                    col += 1;
                    continue;
                }
                let run_start = col;
                while col < g.width_cells() && g.is_cell_occupied(col as i64, row as i64)
                {
                    col += 1;
                }
                let x = origin[0] + run_start as f64 * res;
                let y_top = origin[1] + (row + 1) as f64 * res;
                let p = map.apply([x, y_top]);
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}"/>"#,
                    p[0],
                    p[1],
                    (col - run_start) as f64 * res * scale,
                    res * scale
                );
            }
        }
        let _ = writeln!(out, "</g>");
    }

    if let Some(regions) = corridor {
        let _ = writeln!(
            out,
            r##"<g fill="#4aa3ff" fill-opacity="0.15" stroke="#4aa3ff" stroke-width="1"><!-- corridor -->"##
        );
        for r in regions {
            let _ = writeln!(
                out,
                r#"<polygon points="{}"/>"#,
                polygon_points(&map, &r.polygon.vertices())
            );
        }
        let _ = writeln!(out, "</g>");
    }

    if let Some(samples) = path {
        let pts: Vec<[f64; 2]> = samples.iter().map(|s| [s.pose.x, s.pose.y]).collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#888888" stroke-width="1.5" stroke-dasharray="6 4"/><!-- search path -->"##,
            polygon_points(&map, &pts)
        );
    }

    if let Some(t) = traj {
        let total = t.total_time();
        let n = 400;
        let pts: Vec<[f64; 2]> = (0..=n)
            .map(|k| {
                let p = t.derivative(total * k as f64 / n as f64, 0);
                [p[0], p[1]]
            })
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#d64545" stroke-width="2"/><!-- trajectory -->"##,
            polygon_points(&map, &pts)
        );
        if let Some(sh) = shape {
            let count = (total / opts.footprint_interval).floor() as usize + 1;
            let _ = writeln!(
                out,
                r##"<g fill="none" stroke="#2c8a43" stroke-width="1.2"><!-- footprints -->"##
            );
            for k in 0..count {
                let s = t.sample(k as f64 * opts.footprint_interval);
                let pose = Pose2::new(s.x, s.y, s.psi);
                let corners = obb_vertices(sh, &pose);
                let _ = writeln!(
                    out,
                    r#"<polygon points="{}"/>"#,
                    polygon_points(&map, &corners)
                );
            }
            let _ = writeln!(out, "</g>");
        }
    }

    out.push_str("</svg>\n");
    out
}
