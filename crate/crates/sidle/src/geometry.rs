//! Planar poses, the rectangular robot footprint, and convex polygons in
//! half-plane (H-) representation.
//!
//! Everything downstream reasons about the robot as an oriented bounding
//! box: a `length x width` rectangle centered on the pose and rotated by
//! yaw. Corridor polygons and collision penalties both consume the world
//! points produced here.

use thiserror::Error;

/// Angle wrapped into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// A planar pose: position in meters, yaw in radians.
///
/// Yaw is stored unwrapped (any real value). Comparisons that care about
/// equivalence modulo `2*pi` must wrap explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self { x, y, psi }
    }

    /// Rotate a body-frame point by yaw and translate to the world frame.
    pub fn transform(&self, body: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.psi.sin_cos();
        [
            c * body[0] - s * body[1] + self.x,
            s * body[0] + c * body[1] + self.y,
        ]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("shape dimensions must be positive, got {length} x {width}")]
    NonPositive { length: f64, width: f64 },
    #[error("length {length} must be >= width {width} (long dimension first)")]
    LengthShorterThanWidth { length: f64, width: f64 },
    #[error("edge_samples_per_side must be >= 2, got {0}")]
    TooFewSamples(usize),
}

/// Rectangular robot footprint.
///
/// `length` is the long dimension, `width` the short one; the body frame
/// has +x along the length. Body vertices are `(+-length/2, +-width/2)`.
#[derive(Debug, Clone)]
pub struct RobotShape {
    length: f64,
    width: f64,
    edge_samples_per_side: usize,
    body_samples: Vec<[f64; 2]>,
}

/// Default number of boundary samples per OBB side (corners shared).
pub const DEFAULT_EDGE_SAMPLES_PER_SIDE: usize = 5;

impl RobotShape {
    pub fn new(length: f64, width: f64) -> Result<Self, ShapeError> {
        Self::with_edge_samples(length, width, DEFAULT_EDGE_SAMPLES_PER_SIDE)
    }

    pub fn with_edge_samples(
        length: f64,
        width: f64,
        edge_samples_per_side: usize,
    ) -> Result<Self, ShapeError> {
        if !(length > 0.0) || !(width > 0.0) {
            return Err(ShapeError::NonPositive { length, width });
        }
        if length < width {
            return Err(ShapeError::LengthShorterThanWidth { length, width });
        }
        if edge_samples_per_side < 2 {
            return Err(ShapeError::TooFewSamples(edge_samples_per_side));
        }
        let body_samples = body_edge_samples(length, width, edge_samples_per_side);
        Ok(Self {
            length,
            width,
            edge_samples_per_side,
            body_samples,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn edge_samples_per_side(&self) -> usize {
        self.edge_samples_per_side
    }

    /// Body-frame OBB vertices, counterclockwise from `(+length/2, +width/2)`.
    pub fn body_vertices(&self) -> [[f64; 2]; 4] {
        let hl = 0.5 * self.length;
        let hw = 0.5 * self.width;
        [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]]
    }

    /// Body-frame boundary samples: `4 * (edge_samples_per_side - 1)` points,
    /// corners included exactly once.
    pub fn body_edge_samples(&self) -> &[[f64; 2]] {
        &self.body_samples
    }

    /// Half diagonal: radius of the circumscribed circle around the OBB.
    pub fn circumradius(&self) -> f64 {
        0.5 * (self.length * self.length + self.width * self.width).sqrt()
    }
}

fn body_edge_samples(length: f64, width: f64, per_side: usize) -> Vec<[f64; 2]> {
    let hl = 0.5 * length;
    let hw = 0.5 * width;
    let verts = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
    let mut out = Vec::with_capacity(4 * (per_side - 1));
    for e in 0..4 {
        let a = verts[e];
        let b = verts[(e + 1) % 4];
        // Skip the segment endpoint; it opens the next edge.
        for k in 0..per_side - 1 {
            let t = k as f64 / (per_side - 1) as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// World-frame vertices of the robot OBB at a pose, counterclockwise
/// starting from the body vertex `(+length/2, +width/2)`.
pub fn obb_vertices(shape: &RobotShape, pose: &Pose2) -> [[f64; 2]; 4] {
    let body = shape.body_vertices();
    [
        pose.transform(body[0]),
        pose.transform(body[1]),
        pose.transform(body[2]),
        pose.transform(body[3]),
    ]
}

/// World-frame boundary samples of the robot OBB at a pose.
pub fn edge_sample_points(shape: &RobotShape, pose: &Pose2) -> Vec<[f64; 2]> {
    shape
        .body_edge_samples()
        .iter()
        .map(|&p| pose.transform(p))
        .collect()
}

/// Slack applied to half-plane containment tests.
pub const CONTAINMENT_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PolygonError {
    #[error("polygon needs at least 3 half-planes, got {0}")]
    TooFewFaces(usize),
    #[error("face {0} has a zero-length normal")]
    ZeroNormal(usize),
}

/// Convex polygon as an intersection of half-planes `A q <= b`.
///
/// Normals are unit length and outward, so `A q - b` measures signed
/// distance (meters) past each face.
#[derive(Debug, Clone)]
pub struct ConvexPolygon {
    normals: Vec<[f64; 2]>,
    offsets: Vec<f64>,
}

impl ConvexPolygon {
    /// Build from `(normal, offset)` rows; normals are renormalized and the
    /// offsets rescaled to match.
    pub fn new(rows: Vec<([f64; 2], f64)>) -> Result<Self, PolygonError> {
        if rows.len() < 3 {
            return Err(PolygonError::TooFewFaces(rows.len()));
        }
        let mut normals = Vec::with_capacity(rows.len());
        let mut offsets = Vec::with_capacity(rows.len());
        for (i, (n, b)) in rows.into_iter().enumerate() {
            let len = (n[0] * n[0] + n[1] * n[1]).sqrt();
            if len < 1e-12 {
                return Err(PolygonError::ZeroNormal(i));
            }
            normals.push([n[0] / len, n[1] / len]);
            offsets.push(b / len);
        }
        Ok(Self { normals, offsets })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn axis_aligned(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            normals: vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
            offsets: vec![x1, y1, -x0, -y0],
        }
    }

    pub fn num_faces(&self) -> usize {
        self.normals.len()
    }

    pub fn normals(&self) -> &[[f64; 2]] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `A q - b` per face; positive entries measure penetration depth past
    /// that face in meters.
    pub fn violation_rows(&self, q: [f64; 2]) -> Vec<f64> {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, b)| n[0] * q[0] + n[1] * q[1] - b)
            .collect()
    }

    /// Largest face violation; `<= 0` means contained.
    pub fn max_violation(&self, q: [f64; 2]) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, b)| n[0] * q[0] + n[1] * q[1] - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Closed containment: `A q <= b` componentwise with a 1e-9 slack.
    pub fn contains(&self, q: [f64; 2]) -> bool {
        self.max_violation(q) <= CONTAINMENT_TOL
    }

    /// Vertices of the polygon, counterclockwise.
    ///
    /// Faces are sorted by normal angle and consecutive face lines
    /// intersected; assumes a bounded polygon with no redundant faces,
    /// which holds for the corridor rectangles this crate builds.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        let mut order: Vec<usize> = (0..self.normals.len()).collect();
        order.sort_by(|&i, &j| {
            let ai = self.normals[i][1].atan2(self.normals[i][0]);
            let aj = self.normals[j][1].atan2(self.normals[j][0]);
            ai.partial_cmp(&aj).unwrap()
        });
        let n = order.len();
        let mut verts = Vec::with_capacity(n);
        for k in 0..n {
            let i = order[k];
            let j = order[(k + 1) % n];
            let (a1, b1) = (self.normals[i], self.offsets[i]);
            let (a2, b2) = (self.normals[j], self.offsets[j]);
            let det = a1[0] * a2[1] - a1[1] * a2[0];
            if det.abs() < 1e-12 {
                continue;
            }
            verts.push([
                (b1 * a2[1] - b2 * a1[1]) / det,
                (a1[0] * b2 - a2[0] * b1) / det,
            ]);
        }
        verts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn obb_vertices_identity_pose() {
        let shape = RobotShape::new(0.4, 0.15).unwrap();
        let v = obb_vertices(&shape, &Pose2::new(0.0, 0.0, 0.0));
        assert_relative_eq!(v[0][0], 0.2);
        assert_relative_eq!(v[0][1], 0.075);
        assert_relative_eq!(v[1][0], -0.2);
        assert_relative_eq!(v[1][1], 0.075);
        assert_relative_eq!(v[2][0], -0.2);
        assert_relative_eq!(v[2][1], -0.075);
        assert_relative_eq!(v[3][0], 0.2);
        assert_relative_eq!(v[3][1], -0.075);
    }

    #[test]
    fn obb_vertices_quarter_turn() {
        let shape = RobotShape::new(0.4, 0.15).unwrap();
        let v = obb_vertices(&shape, &Pose2::new(1.0, 2.0, std::f64::consts::FRAC_PI_2));
        assert_relative_eq!(v[0][0], 0.925, epsilon = 1e-12);
        assert_relative_eq!(v[0][1], 2.2, epsilon = 1e-12);
    }

    #[test]
    fn obb_vertices_full_turn_matches_identity() {
        let shape = RobotShape::new(0.4, 0.15).unwrap();
        let a = obb_vertices(&shape, &Pose2::new(0.0, 0.0, 0.0));
        let b = obb_vertices(&shape, &Pose2::new(0.0, 0.0, 2.0 * std::f64::consts::PI));
        for k in 0..4 {
            assert_relative_eq!(a[k][0], b[k][0], epsilon = 1e-12);
            assert_relative_eq!(a[k][1], b[k][1], epsilon = 1e-12);
        }
    }

    #[test]
    fn edge_samples_two_per_side_are_corners() {
        let shape = RobotShape::with_edge_samples(0.4, 0.15, 2).unwrap();
        let pts = edge_sample_points(&shape, &Pose2::new(0.0, 0.0, 0.0));
        assert_eq!(pts.len(), 4);
        let verts = obb_vertices(&shape, &Pose2::new(0.0, 0.0, 0.0));
        for v in verts.iter() {
            assert!(pts
                .iter()
                .any(|p| (p[0] - v[0]).abs() < 1e-12 && (p[1] - v[1]).abs() < 1e-12));
        }
    }

    #[test]
    fn edge_samples_three_per_side_add_midpoints() {
        let shape = RobotShape::with_edge_samples(0.4, 0.15, 3).unwrap();
        let pts = edge_sample_points(&shape, &Pose2::new(0.0, 0.0, 0.0));
        assert_eq!(pts.len(), 8);
        for expect in [[0.0, 0.075], [0.0, -0.075], [0.2, 0.0], [-0.2, 0.0]] {
            assert!(
                pts.iter()
                    .any(|p| (p[0] - expect[0]).abs() < 1e-12 && (p[1] - expect[1]).abs() < 1e-12),
                "missing midpoint {expect:?}"
            );
        }
    }

    #[test]
    fn edge_sample_count_formula() {
        for per_side in 2..8 {
            let shape = RobotShape::with_edge_samples(0.5, 0.2, per_side).unwrap();
            assert_eq!(shape.body_edge_samples().len(), 4 * (per_side - 1));
        }
    }

    #[test]
    fn shape_validation() {
        assert!(RobotShape::new(0.0, 0.1).is_err());
        assert!(RobotShape::new(0.4, -0.1).is_err());
        assert!(RobotShape::new(0.1, 0.4).is_err());
        assert!(RobotShape::with_edge_samples(0.4, 0.1, 1).is_err());
    }

    #[test]
    fn polygon_contains_unit_square() {
        let poly = ConvexPolygon::axis_aligned(0.0, 0.0, 1.0, 1.0);
        assert!(poly.contains([0.5, 0.5]));
        assert!(!poly.contains([1.5, 0.5]));
        // Points exactly on an edge belong to the closed polygon.
        assert!(poly.contains([1.0, 0.5]));
    }

    #[test]
    fn violation_rows_measure_penetration() {
        let poly = ConvexPolygon::axis_aligned(0.0, 0.0, 1.0, 1.0);
        let rows = poly.violation_rows([1.1, 0.5]);
        assert_relative_eq!(rows[0], 0.1, epsilon = 1e-12);
        assert!(rows[1] < 0.0 && rows[2] < 0.0 && rows[3] < 0.0);

        let inside = poly.violation_rows([0.25, 0.25]);
        assert!(inside.iter().all(|&r| r <= 0.0));
    }

    #[test]
    fn violation_rows_shift_with_offsets() {
        let poly = ConvexPolygon::axis_aligned(0.0, 0.0, 1.0, 1.0);
        let delta = 0.3;
        let grown = ConvexPolygon::new(
            poly.normals()
                .iter()
                .zip(poly.offsets())
                .map(|(&n, &b)| (n, b + delta))
                .collect(),
        )
        .unwrap();
        let q = [0.7, 0.4];
        let r0 = poly.violation_rows(q);
        let r1 = grown.violation_rows(q);
        for (a, b) in r0.iter().zip(&r1) {
            assert_relative_eq!(a - delta, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn contains_iff_max_violation_nonpositive() {
        let poly = ConvexPolygon::axis_aligned(-1.0, -2.0, 3.0, 0.5);
        for q in [[0.0, 0.0], [3.2, 0.0], [-1.0, -2.0], [2.9, 0.49]] {
            assert_eq!(poly.contains(q), poly.max_violation(q) <= CONTAINMENT_TOL);
        }
    }

    #[test]
    fn obb_diagonal_and_centroid_invariants() {
        let shape = RobotShape::new(1.2, 0.6).unwrap();
        let diag = (1.2f64 * 1.2 + 0.6 * 0.6).sqrt();
        for &(x, y, psi) in &[(0.0, 0.0, 0.0), (1.0, -2.0, 0.7), (5.0, 3.0, -2.9)] {
            let v = obb_vertices(&shape, &Pose2::new(x, y, psi));
            let d02 = ((v[0][0] - v[2][0]).powi(2) + (v[0][1] - v[2][1]).powi(2)).sqrt();
            let d13 = ((v[1][0] - v[3][0]).powi(2) + (v[1][1] - v[3][1]).powi(2)).sqrt();
            assert_relative_eq!(d02, diag, epsilon = 1e-12);
            assert_relative_eq!(d13, diag, epsilon = 1e-12);
            let cx = v.iter().map(|p| p[0]).sum::<f64>() / 4.0;
            let cy = v.iter().map(|p| p[1]).sum::<f64>() / 4.0;
            assert_relative_eq!(cx, x, epsilon = 1e-12);
            assert_relative_eq!(cy, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn rectangle_vertices_roundtrip() {
        let poly = ConvexPolygon::axis_aligned(0.0, 0.0, 2.0, 1.0);
        let verts = poly.vertices();
        assert_eq!(verts.len(), 4);
        for v in &verts {
            assert!(poly.contains(*v));
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(0.0), 0.0);
        assert_relative_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI);
        assert_relative_eq!(
            wrap_angle(-std::f64::consts::PI),
            std::f64::consts::PI,
            epsilon = 1e-12
        );
        for k in -6..6 {
            let a = 0.37 + k as f64 * 2.0 * std::f64::consts::PI;
            assert_relative_eq!(wrap_angle(a), 0.37, epsilon = 1e-9);
        }
    }
}
