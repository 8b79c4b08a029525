//! Surface jets, unit normals and mean curvature.
//!
//! Jets are evaluated in the surface's local frame and only the point and
//! normal are mapped to world space, so every frame-invariant quantity (the
//! fundamental forms, `H`, the area element) is bitwise independent of where
//! the surface is placed.

use super::GeomError;
use crate::model::{BezierPatch, Surface, SurfaceKind, Vec3};

const DOMAIN_SLACK: f64 = 1e-9;
pub(crate) const DEGENERATE_NORMAL: f64 = 1e-12;

/// Point with first and second partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceJet {
    pub point: Vec3,
    pub du: Vec3,
    pub dv: Vec3,
    pub duu: Vec3,
    pub duv: Vec3,
    pub dvv: Vec3,
}

impl SurfaceJet {
    /// First fundamental form `(E, F, G)`.
    pub fn first_form(&self) -> (f64, f64, f64) {
        (self.du.dot(&self.du), self.du.dot(&self.dv), self.dv.dot(&self.dv))
    }

    /// `√(EG − F²)`.
    pub fn area_element(&self) -> f64 {
        let (e, f, g) = self.first_form();
        (e * g - f * f).max(0.0).sqrt()
    }

    /// `(Su × Sv)/|Su × Sv|`, negated when `same_sense` is false.
    pub fn normal(&self, same_sense: bool) -> Option<Vec3> {
        let c = self.du.cross(&self.dv);
        let len = c.norm();
        if !(len > DEGENERATE_NORMAL) {
            return None;
        }
        let n = c / len;
        Some(if same_sense { n } else { -n })
    }

    /// `H = (eG − 2fF + gE) / (2(EG − F²))` with the second form taken
    /// against `normal`.
    pub fn mean_curvature(&self, normal: &Vec3) -> f64 {
        let (e1, f1, g1) = self.first_form();
        let e2 = self.duu.dot(normal);
        let f2 = self.duv.dot(normal);
        let g2 = self.dvv.dot(normal);
        (e2 * g1 - 2.0 * f2 * f1 + g2 * e1) / (2.0 * (e1 * g1 - f1 * f1))
    }
}

/// World-space sample: point, sense-adjusted unit normal and mean curvature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub point: Vec3,
    pub normal: Vec3,
    pub mean_curvature: f64,
}

fn check_domain(surface: &Surface, u: f64, v: f64) -> Result<(), GeomError> {
    let [u0, u1] = surface.u_range;
    let [v0, v1] = surface.v_range;
    let inside = u >= u0 - DOMAIN_SLACK
        && u <= u1 + DOMAIN_SLACK
        && v >= v0 - DOMAIN_SLACK
        && v <= v1 + DOMAIN_SLACK;
    if inside {
        Ok(())
    } else {
        Err(GeomError::OutOfDomain { u, v })
    }
}

/// World-space jet at `(u, v)`.
pub fn surface_jet(surface: &Surface, u: f64, v: f64) -> Result<SurfaceJet, GeomError> {
    check_domain(surface, u, v)?;
    let j = local_jet(surface, u, v);
    let f = &surface.frame;
    Ok(SurfaceJet {
        point: f.point_to_world(&j.point),
        du: f.vector_to_world(&j.du),
        dv: f.vector_to_world(&j.dv),
        duu: f.vector_to_world(&j.duu),
        duv: f.vector_to_world(&j.duv),
        dvv: f.vector_to_world(&j.dvv),
    })
}

pub fn unit_normal(surface: &Surface, same_sense: bool, u: f64, v: f64) -> Result<Vec3, GeomError> {
    surface_point(surface, same_sense, u, v).map(|p| p.normal)
}

pub fn mean_curvature(
    surface: &Surface,
    same_sense: bool,
    u: f64,
    v: f64,
) -> Result<f64, GeomError> {
    surface_point(surface, same_sense, u, v).map(|p| p.mean_curvature)
}

pub fn surface_point(
    surface: &Surface,
    same_sense: bool,
    u: f64,
    v: f64,
) -> Result<SurfacePoint, GeomError> {
    check_domain(surface, u, v)?;
    let j = local_jet(surface, u, v);
    let n = j
        .normal(same_sense)
        .ok_or(GeomError::DegenerateNormal { u, v })?;
    Ok(SurfacePoint {
        point: surface.frame.point_to_world(&j.point),
        normal: surface.frame.vector_to_world(&n),
        mean_curvature: j.mean_curvature(&n),
    })
}

/// Jet in frame coordinates, no domain check.
pub(crate) fn local_jet(surface: &Surface, u: f64, v: f64) -> SurfaceJet {
    let zero = Vec3::zeros();
    let (su, cu) = u.sin_cos();
    let (sv, cv) = v.sin_cos();
    match &surface.kind {
        SurfaceKind::Plane => SurfaceJet {
            point: Vec3::new(u, v, 0.0),
            du: Vec3::x(),
            dv: Vec3::y(),
            duu: zero,
            duv: zero,
            dvv: zero,
        },
        &SurfaceKind::Cylinder { radius: r } => SurfaceJet {
            point: Vec3::new(r * cu, r * su, v),
            du: Vec3::new(-r * su, r * cu, 0.0),
            dv: Vec3::z(),
            duu: Vec3::new(-r * cu, -r * su, 0.0),
            duv: zero,
            dvv: zero,
        },
        &SurfaceKind::Cone { radius, half_angle } => {
            let (sa, ca) = half_angle.sin_cos();
            let rho = radius + v * sa;
            SurfaceJet {
                point: Vec3::new(rho * cu, rho * su, v * ca),
                du: Vec3::new(-rho * su, rho * cu, 0.0),
                dv: Vec3::new(sa * cu, sa * su, ca),
                duu: Vec3::new(-rho * cu, -rho * su, 0.0),
                duv: Vec3::new(-sa * su, sa * cu, 0.0),
                dvv: zero,
            }
        }
        &SurfaceKind::Sphere { radius: r } => SurfaceJet {
            point: Vec3::new(r * cv * cu, r * cv * su, r * sv),
            du: Vec3::new(-r * cv * su, r * cv * cu, 0.0),
            dv: Vec3::new(-r * sv * cu, -r * sv * su, r * cv),
            duu: Vec3::new(-r * cv * cu, -r * cv * su, 0.0),
            duv: Vec3::new(r * sv * su, -r * sv * cu, 0.0),
            dvv: Vec3::new(-r * cv * cu, -r * cv * su, -r * sv),
        },
        &SurfaceKind::Torus {
            major_radius: big,
            minor_radius: r,
        } => {
            let rho = big + r * cv;
            SurfaceJet {
                point: Vec3::new(rho * cu, rho * su, r * sv),
                du: Vec3::new(-rho * su, rho * cu, 0.0),
                dv: Vec3::new(-r * sv * cu, -r * sv * su, r * cv),
                duu: Vec3::new(-rho * cu, -rho * su, 0.0),
                duv: Vec3::new(r * sv * su, -r * sv * cu, 0.0),
                dvv: Vec3::new(-r * cv * cu, -r * cv * su, -r * sv),
            }
        }
        SurfaceKind::BezierPatch(patch) => bezier_patch_jet(patch, surface, u, v),
    }
}

/// De Casteljau evaluation of a Bézier polygon at `t ∈ [0, 1]`.
pub(crate) fn de_casteljau(points: &[Vec3], t: f64) -> Vec3 {
    if points.is_empty() {
        return Vec3::zeros();
    }
    let mut work = points.to_vec();
    for level in (1..work.len()).rev() {
        for i in 0..level {
            work[i] = work[i] * (1.0 - t) + work[i + 1] * t;
        }
    }
    work[0]
}

/// Control polygon of the derivative curve (the hodograph), degree `n − 1`.
pub(crate) fn hodograph(points: &[Vec3]) -> Vec<Vec3> {
    let n = points.len().saturating_sub(1) as f64;
    points.windows(2).map(|w| (w[1] - w[0]) * n).collect()
}

/// Value, first and second derivative of a Bézier curve at `t ∈ [0, 1]`.
pub(crate) fn bezier_derivatives(points: &[Vec3], t: f64) -> (Vec3, Vec3, Vec3) {
    let d1 = hodograph(points);
    let d2 = hodograph(&d1);
    (de_casteljau(points, t), de_casteljau(&d1, t), de_casteljau(&d2, t))
}

fn bezier_patch_jet(patch: &BezierPatch, surface: &Surface, u: f64, v: f64) -> SurfaceJet {
    let [u0, u1] = surface.u_range;
    let [v0, v1] = surface.v_range;
    let (hu, hv) = (u1 - u0, v1 - v0);
    let s = (u - u0) / hu;
    let w = (v - v0) / hv;
    let cols = patch.degree_v + 1;

    // Collapse along v first: each u-row of the net becomes value, ∂v, ∂vv.
    let mut rows = Vec::with_capacity(patch.degree_u + 1);
    let mut rows_v = Vec::with_capacity(patch.degree_u + 1);
    let mut rows_vv = Vec::with_capacity(patch.degree_u + 1);
    for row in patch.control_points.chunks(cols) {
        let (p, pv, pvv) = bezier_derivatives(row, w);
        rows.push(p);
        rows_v.push(pv);
        rows_vv.push(pvv);
    }
    let (point, d_s, d_ss) = bezier_derivatives(&rows, s);
    let (d_w, d_sw, _) = bezier_derivatives(&rows_v, s);
    let d_ww = de_casteljau(&rows_vv, s);

    SurfaceJet {
        point,
        du: d_s / hu,
        dv: d_w / hv,
        duu: d_ss / (hu * hu),
        duv: d_sw / (hu * hv),
        dvv: d_ww / (hv * hv),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Frame, Surface};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn surf(kind: SurfaceKind, u: [f64; 2], v: [f64; 2]) -> Surface {
        Surface {
            kind,
            frame: Frame::identity(),
            u_range: u,
            v_range: v,
        }
    }

    #[test]
    fn plane_has_zero_second_partials() {
        let s = surf(SurfaceKind::Plane, [-3.0, 3.0], [-3.0, 3.0]);
        for (u, v) in [(0.0, 0.0), (1.3, -2.7), (-3.0, 3.0)] {
            let j = surface_jet(&s, u, v).unwrap();
            assert_eq!(j.duu, Vec3::zeros());
            assert_eq!(j.duv, Vec3::zeros());
            assert_eq!(j.dvv, Vec3::zeros());
            assert_eq!(mean_curvature(&s, true, u, v).unwrap(), 0.0);
        }
    }

    #[test]
    fn sphere_equator_lies_on_sphere_with_unit_area_element() {
        let s = surf(SurfaceKind::Sphere { radius: 1.0 }, [0.0, 2.0 * PI], [-FRAC_PI_2, FRAC_PI_2]);
        let j = surface_jet(&s, 0.0, 0.0).unwrap();
        assert!((j.point.norm() - 1.0).abs() < 1e-15);
        assert!((j.du.cross(&j.dv).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bilinear_planar_patch_matches_plane() {
        let patch = BezierPatch {
            degree_u: 1,
            degree_v: 1,
            control_points: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
            ],
        };
        let bez = surf(SurfaceKind::BezierPatch(patch), [0.0, 1.0], [0.0, 1.0]);
        let plane = surf(SurfaceKind::Plane, [0.0, 1.0], [0.0, 1.0]);
        for (u, v) in [(0.0, 0.0), (0.25, 0.75), (0.5, 0.5), (1.0, 0.3)] {
            let a = surface_jet(&bez, u, v).unwrap();
            let b = surface_jet(&plane, u, v).unwrap();
            for (x, y) in [
                (a.point, b.point),
                (a.du, b.du),
                (a.dv, b.dv),
                (a.duu, b.duu),
                (a.duv, b.duv),
                (a.dvv, b.dvv),
            ] {
                assert!((x - y).norm() <= 1e-12, "{x:?} vs {y:?}");
            }
        }
    }

    #[test]
    fn plane_normal_follows_sense() {
        let s = surf(SurfaceKind::Plane, [0.0, 1.0], [0.0, 1.0]);
        assert_eq!(unit_normal(&s, true, 0.5, 0.5).unwrap(), Vec3::z());
        assert_eq!(unit_normal(&s, false, 0.5, 0.5).unwrap(), -Vec3::z());
    }

    #[test]
    fn cylinder_normal_points_radially_outward() {
        let s = surf(SurfaceKind::Cylinder { radius: 1.0 }, [0.0, 2.0 * PI], [0.0, 1.0]);
        let n = unit_normal(&s, true, 0.0, 0.5).unwrap();
        assert!((n - Vec3::x()).norm() < 1e-15);
    }

    #[test]
    fn closed_form_mean_curvatures() {
        let sphere = surf(SurfaceKind::Sphere { radius: 2.5 }, [0.0, 2.0 * PI], [-1.5, 1.5]);
        let h = mean_curvature(&sphere, true, 0.7, 0.4).unwrap();
        assert!((h.abs() - 1.0 / 2.5).abs() <= 1e-9);

        let cyl = surf(SurfaceKind::Cylinder { radius: 2.0 }, [0.0, 2.0 * PI], [0.0, 1.0]);
        let h = mean_curvature(&cyl, true, 1.1, 0.2).unwrap();
        assert!((h.abs() - 0.25).abs() <= 1e-9);

        let torus = surf(
            SurfaceKind::Torus {
                major_radius: 2.0,
                minor_radius: 0.5,
            },
            [0.0, 2.0 * PI],
            [-PI, PI],
        );
        let h = mean_curvature(&torus, true, 0.0, 0.0).unwrap();
        assert!((h.abs() - 1.2).abs() <= 1e-8, "{h}");
    }

    #[test]
    fn flipping_sense_negates_normal_and_curvature_exactly() {
        let torus = surf(
            SurfaceKind::Torus {
                major_radius: 3.0,
                minor_radius: 1.0,
            },
            [0.0, 2.0 * PI],
            [-PI, PI],
        );
        let a = surface_point(&torus, true, 0.4, 2.0).unwrap();
        let b = surface_point(&torus, false, 0.4, 2.0).unwrap();
        assert_eq!(a.normal, -b.normal);
        assert_eq!(a.mean_curvature, -b.mean_curvature);
    }

    #[test]
    fn sphere_pole_is_degenerate() {
        let s = surf(SurfaceKind::Sphere { radius: 1.0 }, [0.0, 2.0 * PI], [-FRAC_PI_2, FRAC_PI_2]);
        assert!(matches!(
            unit_normal(&s, true, 0.3, FRAC_PI_2),
            Err(GeomError::DegenerateNormal { .. })
        ));
    }

    #[test]
    fn out_of_domain_parameters_are_rejected() {
        let s = surf(SurfaceKind::Plane, [0.0, 1.0], [0.0, 1.0]);
        assert!(surface_jet(&s, 1.0 + 1e-10, 0.5).is_ok());
        assert!(matches!(
            surface_jet(&s, 1.1, 0.5),
            Err(GeomError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn hodograph_of_line_is_constant_chord() {
        let pts = [Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0)];
        let (p, d1, d2) = bezier_derivatives(&pts, 0.25);
        assert_eq!(p, Vec3::new(0.25, 0.5, 0.75));
        assert_eq!(d1, Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(d2, Vec3::zeros());
    }
}
