//! Parametric Brep data model.
//!
//! Surfaces and curves are stored in their own local frame: analytic kinds are
//! parameterized about the frame origin, Bézier control points are given in
//! frame coordinates. Faces reference a surface and carry UV trimming loops,
//! topological edges reference a curve and the two faces they bound.

mod json;
mod transform;
mod validate;

pub use json::{parse_brep, parse_unchecked, to_json, ParseError};
pub use validate::{validate, IssueKind, Severity, ValidationIssue, ValidationReport};
pub(crate) use validate::point_segment_distance;

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// A point in a surface's parameter plane.
pub type Uv = [f64; 2];

/// Orthonormal placement of a surface or curve. The third axis is `x × y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub origin: Vec3,
    pub x_axis: Vec3,
    pub y_axis: Vec3,
}

impl Frame {
    pub fn identity() -> Self {
        Self {
            origin: Vec3::zeros(),
            x_axis: Vec3::x(),
            y_axis: Vec3::y(),
        }
    }

    pub fn new(origin: Vec3, x_axis: Vec3, y_axis: Vec3) -> Self {
        Self {
            origin,
            x_axis,
            y_axis,
        }
    }

    pub fn z_axis(&self) -> Vec3 {
        self.x_axis.cross(&self.y_axis)
    }

    pub fn vector_to_world(&self, v: &Vec3) -> Vec3 {
        self.x_axis * v.x + self.y_axis * v.y + self.z_axis() * v.z
    }

    pub fn point_to_world(&self, p: &Vec3) -> Vec3 {
        self.origin + self.vector_to_world(p)
    }

    /// Largest deviation from orthonormality over the three axis pairs and norms.
    pub fn orthonormality_error(&self) -> f64 {
        let z = self.z_axis();
        [
            (self.x_axis.norm() - 1.0).abs(),
            (self.y_axis.norm() - 1.0).abs(),
            (z.norm() - 1.0).abs(),
            self.x_axis.dot(&self.y_axis).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Tensor-product Bézier patch. Control point `(i, j)` lives at index
/// `i * (degree_v + 1) + j`, with `i` running along u.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierPatch {
    pub degree_u: usize,
    pub degree_v: usize,
    pub control_points: Vec<Vec3>,
}

impl BezierPatch {
    pub fn expected_len(&self) -> usize {
        (self.degree_u + 1) * (self.degree_v + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceKind {
    /// `(u, v) ↦ u·x + v·y`.
    Plane,
    /// `(u, v) ↦ r(cos u·x + sin u·y) + v·z`.
    Cylinder { radius: f64 },
    /// Radius `radius` at `v = 0`; `v` runs along the slant line.
    /// `(u, v) ↦ (r + v sin α)(cos u·x + sin u·y) + v cos α·z`.
    Cone { radius: f64, half_angle: f64 },
    /// Longitude `u`, latitude `v`.
    Sphere { radius: f64 },
    /// `(u, v) ↦ (R + r cos v)(cos u·x + sin u·y) + r sin v·z`.
    Torus { major_radius: f64, minor_radius: f64 },
    /// The natural rectangle maps affinely onto `[0, 1]²`.
    BezierPatch(BezierPatch),
}

impl SurfaceKind {
    /// Face type code `t` written into face tensors.
    pub fn type_code(&self) -> i32 {
        match self {
            SurfaceKind::Plane => 0,
            SurfaceKind::Cylinder { .. } => 1,
            SurfaceKind::Cone { .. } => 2,
            SurfaceKind::Sphere { .. } => 3,
            SurfaceKind::Torus { .. } => 4,
            SurfaceKind::BezierPatch(_) => 5,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SurfaceKind::Plane => "plane",
            SurfaceKind::Cylinder { .. } => "cylinder",
            SurfaceKind::Cone { .. } => "cone",
            SurfaceKind::Sphere { .. } => "sphere",
            SurfaceKind::Torus { .. } => "torus",
            SurfaceKind::BezierPatch(_) => "bezier_patch",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub kind: SurfaceKind,
    pub frame: Frame,
    pub u_range: [f64; 2],
    pub v_range: [f64; 2],
}

impl Surface {
    pub fn natural_rect(&self) -> UvRect {
        UvRect {
            u_min: self.u_range[0],
            u_max: self.u_range[1],
            v_min: self.v_range[0],
            v_max: self.v_range[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveKind {
    /// `t ↦ t·x`.
    Line,
    /// `t ↦ r(cos t·x + sin t·y)`.
    CircleArc { radius: f64 },
    /// `t ↦ a cos t·x + b sin t·y`.
    EllipseArc { semi_major: f64, semi_minor: f64 },
    /// Control points in frame coordinates; the curve interval maps onto `[0, 1]`.
    Bezier { control_points: Vec<Vec3> },
}

impl CurveKind {
    /// Edge type code `c` written into edge tensors.
    pub fn type_code(&self) -> i32 {
        match self {
            CurveKind::Line => 0,
            CurveKind::CircleArc { .. } => 1,
            CurveKind::EllipseArc { .. } => 2,
            CurveKind::Bezier { .. } => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CurveKind::Line => "line",
            CurveKind::CircleArc { .. } => "circle_arc",
            CurveKind::EllipseArc { .. } => "ellipse_arc",
            CurveKind::Bezier { .. } => "bezier",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub kind: CurveKind,
    pub frame: Frame,
    pub t_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub surface: usize,
    /// When false the face normal is the negated surface normal.
    pub same_sense: bool,
    /// First loop is the outer boundary, the rest are holes.
    pub loops: Vec<Vec<Uv>>,
    pub type_code: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoEdge {
    pub curve: usize,
    pub t_range: [f64; 2],
    pub faces: [usize; 2],
    pub type_code: i32,
}

impl TopoEdge {
    pub fn is_seam(&self) -> bool {
        self.faces[0] == self.faces[1]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BrepModel {
    pub name: String,
    pub surfaces: Vec<Surface>,
    pub curves: Vec<Curve>,
    pub faces: Vec<Face>,
    pub edges: Vec<TopoEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvRect {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl UvRect {
    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, other: &UvRect) -> bool {
        other.u_min >= self.u_min
            && other.u_max <= self.u_max
            && other.v_min >= self.v_min
            && other.v_max <= self.v_max
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{entity} index {index} out of range (model has {len})")]
pub struct IndexError {
    pub entity: &'static str,
    pub index: usize,
    pub len: usize,
}

impl BrepModel {
    pub fn face(&self, index: usize) -> Result<&Face, IndexError> {
        self.faces.get(index).ok_or(IndexError {
            entity: "face",
            index,
            len: self.faces.len(),
        })
    }

    pub fn edge(&self, index: usize) -> Result<&TopoEdge, IndexError> {
        self.edges.get(index).ok_or(IndexError {
            entity: "edge",
            index,
            len: self.edges.len(),
        })
    }

    pub fn face_surface(&self, index: usize) -> Result<&Surface, IndexError> {
        let face = self.face(index)?;
        self.surfaces.get(face.surface).ok_or(IndexError {
            entity: "surface",
            index: face.surface,
            len: self.surfaces.len(),
        })
    }

    pub fn edge_curve(&self, index: usize) -> Result<&Curve, IndexError> {
        let edge = self.edge(index)?;
        self.curves.get(edge.curve).ok_or(IndexError {
            entity: "curve",
            index: edge.curve,
            len: self.curves.len(),
        })
    }

    /// The UV sampling rectangle of a face: the bounding box of its outer loop
    /// clipped to the surface's natural rectangle.
    pub fn face_uv_domain(&self, index: usize) -> Result<UvRect, IndexError> {
        let face = self.face(index)?;
        let natural = self.face_surface(index)?.natural_rect();
        let Some(outer) = face.loops.first().filter(|l| !l.is_empty()) else {
            return Ok(natural);
        };
        let mut rect = UvRect {
            u_min: f64::INFINITY,
            u_max: f64::NEG_INFINITY,
            v_min: f64::INFINITY,
            v_max: f64::NEG_INFINITY,
        };
        for &[u, v] in outer {
            rect.u_min = rect.u_min.min(u);
            rect.u_max = rect.u_max.max(u);
            rect.v_min = rect.v_min.min(v);
            rect.v_max = rect.v_max.max(v);
        }
        Ok(UvRect {
            u_min: rect.u_min.max(natural.u_min),
            u_max: rect.u_max.min(natural.u_max),
            v_min: rect.v_min.max(natural.v_min),
            v_max: rect.v_max.min(natural.v_max),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use std::f64::consts::PI;

    #[test]
    fn square_face_domain_is_unit_square() {
        let cube = synth::unit_cube();
        let rect = cube.face_uv_domain(0).unwrap();
        assert_eq!(
            rect,
            UvRect {
                u_min: 0.0,
                u_max: 1.0,
                v_min: 0.0,
                v_max: 1.0
            }
        );
    }

    #[test]
    fn cylinder_side_domain_spans_full_turn() {
        let cyl = synth::closed_cylinder(1.0, 2.0);
        let rect = cyl.face_uv_domain(0).unwrap();
        assert_eq!(rect.u_min, 0.0);
        assert_eq!(rect.u_max, 2.0 * PI);
        assert_eq!((rect.v_min, rect.v_max), (0.0, 2.0));
    }

    #[test]
    fn half_disc_loop_domain_is_vertex_bounding_box() {
        let mut cyl = synth::closed_cylinder(1.0, 2.0);
        // Outer loop covering only u in [0, pi].
        let loop_: Vec<Uv> = vec![[0.0, 0.0], [PI / 2.0, 0.0], [PI, 0.0], [PI, 2.0], [0.0, 2.0]];
        let expected = loop_.iter().fold(
            (f64::MAX, f64::MIN, f64::MAX, f64::MIN),
            |(a, b, c, d), p| (a.min(p[0]), b.max(p[0]), c.min(p[1]), d.max(p[1])),
        );
        cyl.faces[0].loops = vec![loop_];
        let rect = cyl.face_uv_domain(0).unwrap();
        assert_eq!(
            (rect.u_min, rect.u_max, rect.v_min, rect.v_max),
            expected
        );
        assert_eq!(rect.u_max, PI);
    }

    #[test]
    fn domain_is_clipped_to_natural_rect() {
        let mut cube = synth::unit_cube();
        cube.faces[0].loops = vec![vec![[-0.5, -0.5], [1.5, -0.5], [1.5, 1.5], [-0.5, 1.5]]];
        let natural = cube.surfaces[cube.faces[0].surface].natural_rect();
        let rect = cube.face_uv_domain(0).unwrap();
        assert!(natural.contains(&rect));
    }

    #[test]
    fn invalid_face_index_is_reported() {
        let cube = synth::unit_cube();
        let err = cube.face_uv_domain(6).unwrap_err();
        assert_eq!(err.index, 6);
        assert_eq!(err.len, 6);
    }

    #[test]
    fn frame_axes_complete_right_handed() {
        let f = Frame::identity();
        assert_eq!(f.z_axis(), Vec3::z());
        assert_eq!(f.orthonormality_error(), 0.0);
    }
}
