use super::surface::{bezier_derivatives, DEGENERATE_NORMAL};
use super::GeomError;
use crate::model::{Curve, CurveKind, Vec3};

const DOMAIN_SLACK: f64 = 1e-9;

fn check_parameter(curve: &Curve, t: f64) -> Result<(), GeomError> {
    let [t0, t1] = curve.t_range;
    if t >= t0 - DOMAIN_SLACK && t <= t1 + DOMAIN_SLACK {
        Ok(())
    } else {
        Err(GeomError::ParameterOutOfRange { t })
    }
}

/// Point and first derivative in frame coordinates, no range check.
pub(crate) fn local_curve(curve: &Curve, t: f64) -> (Vec3, Vec3) {
    match &curve.kind {
        CurveKind::Line => (Vec3::new(t, 0.0, 0.0), Vec3::x()),
        &CurveKind::CircleArc { radius: r } => {
            let (s, c) = t.sin_cos();
            (Vec3::new(r * c, r * s, 0.0), Vec3::new(-r * s, r * c, 0.0))
        }
        &CurveKind::EllipseArc {
            semi_major: a,
            semi_minor: b,
        } => {
            let (s, c) = t.sin_cos();
            (Vec3::new(a * c, b * s, 0.0), Vec3::new(-a * s, b * c, 0.0))
        }
        CurveKind::Bezier { control_points } => {
            let [t0, t1] = curve.t_range;
            let h = t1 - t0;
            let (p, d, _) = bezier_derivatives(control_points, (t - t0) / h);
            (p, d / h)
        }
    }
}

pub fn eval_curve(curve: &Curve, t: f64) -> Result<Vec3, GeomError> {
    check_parameter(curve, t)?;
    Ok(curve.frame.point_to_world(&local_curve(curve, t).0))
}

pub fn curve_derivative(curve: &Curve, t: f64) -> Result<Vec3, GeomError> {
    check_parameter(curve, t)?;
    Ok(curve.frame.vector_to_world(&local_curve(curve, t).1))
}

/// `C′(t)/|C′(t)|` in world space.
pub fn unit_tangent(curve: &Curve, t: f64) -> Result<Vec3, GeomError> {
    check_parameter(curve, t)?;
    let d = local_curve(curve, t).1;
    let len = d.norm();
    if !(len > DEGENERATE_NORMAL) {
        return Err(GeomError::DegenerateTangent { t });
    }
    Ok(curve.frame.vector_to_world(&(d / len)))
}
