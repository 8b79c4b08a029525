use nalgebra::Rotation3;

use super::{BrepModel, CurveKind, Frame, SurfaceKind, Vec3};

impl Frame {
    fn moved(&self, rotation: &Rotation3<f64>, translation: &Vec3) -> Frame {
        Frame {
            origin: rotation * self.origin + translation,
            x_axis: rotation * self.x_axis,
            y_axis: rotation * self.y_axis,
        }
    }
}

impl BrepModel {
    /// Apply `p ↦ R p + t` by moving every surface and curve frame. Parameter
    /// ranges, loops and Bézier control points stay in frame coordinates.
    pub fn rigidly_transformed(&self, rotation: &Rotation3<f64>, translation: &Vec3) -> BrepModel {
        let mut out = self.clone();
        for s in &mut out.surfaces {
            s.frame = s.frame.moved(rotation, translation);
        }
        for c in &mut out.curves {
            c.frame = c.frame.moved(rotation, translation);
        }
        out
    }

    /// Uniform scale about the world origin by `s > 0`. Length-valued
    /// parameters scale; angle-valued ones (cylinder/cone u, sphere and torus
    /// angles, circle/ellipse t) do not.
    pub fn scaled(&self, s: f64) -> BrepModel {
        let mut out = self.clone();
        // Which UV coordinates carry length: (u, v).
        let mut uv_scale = Vec::with_capacity(out.surfaces.len());
        for surf in &mut out.surfaces {
            surf.frame.origin *= s;
            let (su, sv) = match &mut surf.kind {
                SurfaceKind::Plane => (s, s),
                SurfaceKind::Cylinder { radius } => {
                    *radius *= s;
                    (1.0, s)
                }
                SurfaceKind::Cone { radius, .. } => {
                    *radius *= s;
                    (1.0, s)
                }
                SurfaceKind::Sphere { radius } => {
                    *radius *= s;
                    (1.0, 1.0)
                }
                SurfaceKind::Torus {
                    major_radius,
                    minor_radius,
                } => {
                    *major_radius *= s;
                    *minor_radius *= s;
                    (1.0, 1.0)
                }
                SurfaceKind::BezierPatch(patch) => {
                    patch.control_points.iter_mut().for_each(|p| *p *= s);
                    (1.0, 1.0)
                }
            };
            surf.u_range = surf.u_range.map(|x| x * su);
            surf.v_range = surf.v_range.map(|x| x * sv);
            uv_scale.push((su, sv));
        }
        let mut t_scale = Vec::with_capacity(out.curves.len());
        for c in &mut out.curves {
            c.frame.origin *= s;
            let st = match &mut c.kind {
                CurveKind::Line => s,
                CurveKind::CircleArc { radius } => {
                    *radius *= s;
                    1.0
                }
                CurveKind::EllipseArc {
                    semi_major,
                    semi_minor,
                } => {
                    *semi_major *= s;
                    *semi_minor *= s;
                    1.0
                }
                CurveKind::Bezier { control_points } => {
                    control_points.iter_mut().for_each(|p| *p *= s);
                    1.0
                }
            };
            c.t_range = c.t_range.map(|x| x * st);
            t_scale.push(st);
        }
        for f in &mut out.faces {
            let (su, sv) = uv_scale[f.surface];
            for l in &mut f.loops {
                for p in l.iter_mut() {
                    *p = [p[0] * su, p[1] * sv];
                }
            }
        }
        for e in &mut out.edges {
            let st = t_scale[e.curve];
            e.t_range = e.t_range.map(|x| x * st);
        }
        out
    }

    /// Relabel faces so that old face `i` becomes face `perm[i]`. Edge
    /// incidences follow; edge order is unchanged.
    pub fn with_permuted_faces(&self, perm: &[usize]) -> BrepModel {
        assert_eq!(perm.len(), self.faces.len(), "permutation length");
        let mut faces = vec![None; self.faces.len()];
        for (old, &new) in perm.iter().enumerate() {
            assert!(faces[new].is_none(), "not a permutation");
            faces[new] = Some(self.faces[old].clone());
        }
        let mut out = self.clone();
        out.faces = faces.into_iter().map(|f| f.expect("permutation")).collect();
        for e in &mut out.edges {
            e.faces = e.faces.map(|f| perm[f]);
        }
        out
    }
}
