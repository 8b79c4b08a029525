//! Differential geometry of parametric surfaces and curves: jets, normals,
//! mean curvature, trimmed face areas, edge lengths and UV visibility.

mod curve;
mod surface;
mod trim;

pub use curve::{curve_derivative, eval_curve, unit_tangent};
pub use surface::{
    mean_curvature, surface_jet, surface_point, unit_normal, SurfaceJet, SurfacePoint,
};
pub use trim::{point_in_face, point_in_loops};

pub(crate) use curve::local_curve;
pub(crate) use surface::local_jet;

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::model::{BrepModel, IndexError};

/// Default Gauss–Legendre order per axis for face areas and edge lengths.
pub const DEFAULT_QUADRATURE: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("parameters ({u}, {v}) outside the surface domain")]
    OutOfDomain { u: f64, v: f64 },
    #[error("curve parameter {t} outside the curve interval")]
    ParameterOutOfRange { t: f64 },
    #[error("degenerate parameterization at ({u}, {v}): |Su x Sv| <= 1e-12")]
    DegenerateNormal { u: f64, v: f64 },
    #[error("degenerate curve derivative at t = {t}")]
    DegenerateTangent { t: f64 },
    #[error("quadrature order {0} below 2")]
    InvalidQuadrature(usize),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGeometrySummary {
    pub face: usize,
    /// Trimmed area, squared model units.
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGeometrySummary {
    pub edge: usize,
    /// Arc length over the edge interval, model units.
    pub length: f64,
}

fn rule(order: usize) -> Result<GaussLegendre, GeomError> {
    if order < 2 {
        return Err(GeomError::InvalidQuadrature(order));
    }
    Ok(GaussLegendre::new(
        NonZeroUsize::new(order).expect("order >= 2"),
    ))
}

/// Trimmed face area: tensor-product Gauss–Legendre over the face's UV
/// bounding rectangle of `√(EG − F²)` times the visibility indicator.
pub fn face_area(
    model: &BrepModel,
    face: usize,
    quadrature_per_axis: usize,
) -> Result<FaceGeometrySummary, GeomError> {
    let quad = rule(quadrature_per_axis)?;
    let f = model.face(face)?;
    let surface = model.face_surface(face)?;
    let rect = model.face_uv_domain(face)?;
    let (hu, hv) = (0.5 * rect.width(), 0.5 * rect.height());
    let (cu, cv) = (rect.u_min + hu, rect.v_min + hv);
    let nodes = quad.as_node_weight_pairs();

    let mut area = 0.0;
    for &(xv, wv) in nodes {
        let v = cv + hv * xv;
        let mut row = 0.0;
        for &(xu, wu) in nodes {
            let u = cu + hu * xu;
            if point_in_face(f, u, v) {
                row += wu * local_jet(surface, u, v).area_element();
            }
        }
        area += wv * row;
    }
    Ok(FaceGeometrySummary {
        face,
        area: area * hu * hv,
    })
}

/// Edge arc length `∫|C′(t)| dt` by Gauss–Legendre over the edge interval.
pub fn edge_length(
    model: &BrepModel,
    edge: usize,
    quadrature: usize,
) -> Result<EdgeGeometrySummary, GeomError> {
    let quad = rule(quadrature)?;
    let e = model.edge(edge)?;
    let curve = model.edge_curve(edge)?;
    let [t0, t1] = e.t_range;
    let length = quad.integrate(t0, t1, |t| local_curve(curve, t).1.norm());
    Ok(EdgeGeometrySummary { edge, length })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use std::f64::consts::PI;

    #[test]
    fn unit_square_area() {
        let cube = synth::unit_cube();
        let a = face_area(&cube, 0, 32).unwrap().area;
        assert!((a - 1.0).abs() <= 1e-6, "{a}");
    }

    #[test]
    fn full_sphere_area() {
        let sphere = synth::unit_sphere();
        let a = face_area(&sphere, 0, 64).unwrap().area;
        assert!(((a - 4.0 * PI) / (4.0 * PI)).abs() <= 1e-3, "{a}");
    }

    /// Independent oracle for the holed plate: the visible set is a product
    /// region, so the quadrature reduces to 1D weight sums.
    fn holed_square_oracle(order: usize) -> f64 {
        let quad = GaussLegendre::new(NonZeroUsize::new(order).unwrap());
        let inner: f64 = quad
            .as_node_weight_pairs()
            .iter()
            .filter(|(x, _)| (0.25..=0.75).contains(&(0.5 + 0.5 * x)))
            .map(|(_, w)| 0.5 * w)
            .sum();
        1.0 - inner * inner
    }

    #[test]
    fn holed_square_area() {
        let plate = synth::annular_plate();
        for order in [16, 32, 64, 96] {
            let a = face_area(&plate, 0, order).unwrap().area;
            assert!((a - holed_square_oracle(order)).abs() <= 1e-12, "{order}: {a}");
        }
        // The indicator jumps between grid nodes, so the error is of the order
        // of the node spacing: 0.0107 at 64 points, 0.0023 at 96.
        let a64 = face_area(&plate, 0, 64).unwrap().area;
        assert!((a64 - 0.75).abs() <= 1.1e-2, "{a64}");
        let a96 = face_area(&plate, 0, 96).unwrap().area;
        assert!((a96 - 0.75).abs() <= 3e-3, "{a96}");
    }

    #[test]
    fn straight_edge_length() {
        let cube = synth::unit_cube().scaled(3.0);
        let l = edge_length(&cube, 0, 32).unwrap().length;
        assert!((l - 3.0).abs() <= 1e-12, "{l}");
    }

    #[test]
    fn full_circle_length() {
        let cyl = synth::closed_cylinder(1.0, 1.0);
        let l = edge_length(&cyl, 0, 32).unwrap().length;
        assert!((l - 2.0 * PI).abs() <= 1e-9, "{l}");
    }

    #[test]
    fn quadrature_order_below_two_is_rejected() {
        let cube = synth::unit_cube();
        assert_eq!(
            face_area(&cube, 0, 1).unwrap_err(),
            GeomError::InvalidQuadrature(1)
        );
        assert_eq!(
            edge_length(&cube, 0, 0).unwrap_err(),
            GeomError::InvalidQuadrature(0)
        );
    }

    #[test]
    fn invalid_indices_are_reported() {
        let cube = synth::unit_cube();
        assert!(matches!(face_area(&cube, 6, 8), Err(GeomError::Index(_))));
        assert!(matches!(edge_length(&cube, 12, 8), Err(GeomError::Index(_))));
    }
}
