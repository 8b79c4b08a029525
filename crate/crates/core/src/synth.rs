//! Reference models with known topology and a randomized model generator.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Rotation3, UnitQuaternion};
use rand::Rng;

use crate::model::{
    BezierPatch, BrepModel, Curve, CurveKind, Face, Frame, Surface, SurfaceKind, TopoEdge, Uv,
    Vec3,
};

fn axis(i: usize) -> Vec3 {
    match i % 3 {
        0 => Vec3::x(),
        1 => Vec3::y(),
        _ => Vec3::z(),
    }
}

fn rect_loop(u: [f64; 2], v: [f64; 2]) -> Vec<Uv> {
    vec![[u[0], v[0]], [u[1], v[0]], [u[1], v[1]], [u[0], v[1]]]
}

fn face_on(surface: usize, kind: &SurfaceKind, same_sense: bool, loops: Vec<Vec<Uv>>) -> Face {
    Face {
        surface,
        same_sense,
        loops,
        type_code: kind.type_code(),
    }
}

fn edge_on(curve: &Curve, index: usize, faces: [usize; 2]) -> TopoEdge {
    TopoEdge {
        curve: index,
        t_range: curve.t_range,
        faces,
        type_code: curve.kind.type_code(),
    }
}

/// Push a surface and a face on it; returns the face index.
fn add_face(
    m: &mut BrepModel,
    surface: Surface,
    same_sense: bool,
    loops: Option<Vec<Vec<Uv>>>,
) -> usize {
    let loops = loops.unwrap_or_else(|| vec![rect_loop(surface.u_range, surface.v_range)]);
    let face = face_on(m.surfaces.len(), &surface.kind, same_sense, loops);
    m.surfaces.push(surface);
    m.faces.push(face);
    m.faces.len() - 1
}

fn add_edge(m: &mut BrepModel, curve: Curve, faces: [usize; 2]) -> usize {
    let edge = edge_on(&curve, m.curves.len(), faces);
    m.curves.push(curve);
    m.edges.push(edge);
    m.edges.len() - 1
}

/// Axis-aligned cube `[0,1]³` with outward normals. Face `2a + c` is the
/// face perpendicular to axis `a` at coordinate `c`.
pub fn unit_cube() -> BrepModel {
    let mut m = BrepModel {
        name: "unit_cube".into(),
        ..Default::default()
    };
    for a in 0..3 {
        for c in 0..2 {
            let surface = Surface {
                kind: SurfaceKind::Plane,
                frame: Frame::new(axis(a) * c as f64, axis(a + 1), axis(a + 2)),
                u_range: [0.0, 1.0],
                v_range: [0.0, 1.0],
            };
            add_face(&mut m, surface, c == 1, None);
        }
    }
    for d in 0..3 {
        let (p, q) = ((d + 1) % 3, (d + 2) % 3);
        for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let origin = axis(p) * a as f64 + axis(q) * b as f64;
            let curve = Curve {
                kind: CurveKind::Line,
                frame: Frame::new(origin, axis(d), axis(p)),
                t_range: [0.0, 1.0],
            };
            add_edge(&mut m, curve, [2 * p + a, 2 * q + b]);
        }
    }
    m
}

/// Capped cylinder about +Z: side face 0, bottom cap 1, top cap 2. Edges:
/// bottom circle, top circle, then the seam line of the side face.
pub fn closed_cylinder(radius: f64, height: f64) -> BrepModel {
    let mut m = BrepModel {
        name: "closed_cylinder".into(),
        ..Default::default()
    };
    let side_kind = SurfaceKind::Cylinder { radius };
    add_face(
        &mut m,
        Surface {
            kind: side_kind,
            frame: Frame::identity(),
            u_range: [0.0, TAU],
            v_range: [0.0, height],
        },
        true,
        None,
    );
    let disc: Vec<Uv> = (0..64)
        .map(|k| {
            let (s, c) = (TAU * k as f64 / 64.0).sin_cos();
            [radius * c, radius * s]
        })
        .collect();
    for (z, same_sense) in [(0.0, false), (height, true)] {
        add_face(
            &mut m,
            Surface {
                kind: SurfaceKind::Plane,
                frame: Frame::new(Vec3::new(0.0, 0.0, z), Vec3::x(), Vec3::y()),
                u_range: [-radius, radius],
                v_range: [-radius, radius],
            },
            same_sense,
            Some(vec![disc.clone()]),
        );
    }
    for (z, cap) in [(0.0, 1), (height, 2)] {
        let curve = Curve {
            kind: CurveKind::CircleArc { radius },
            frame: Frame::new(Vec3::new(0.0, 0.0, z), Vec3::x(), Vec3::y()),
            t_range: [0.0, TAU],
        };
        add_edge(&mut m, curve, [0, cap]);
    }
    let seam = Curve {
        kind: CurveKind::Line,
        frame: Frame::new(Vec3::new(radius, 0.0, 0.0), Vec3::z(), Vec3::x()),
        t_range: [0.0, height],
    };
    add_edge(&mut m, seam, [0, 0]);
    m
}

/// Unit square plate with a centered square hole of side 0.5.
pub fn annular_plate() -> BrepModel {
    let mut m = BrepModel {
        name: "annular_plate".into(),
        ..Default::default()
    };
    let mut hole = rect_loop([0.25, 0.75], [0.25, 0.75]);
    hole.reverse();
    add_face(
        &mut m,
        Surface {
            kind: SurfaceKind::Plane,
            frame: Frame::identity(),
            u_range: [0.0, 1.0],
            v_range: [0.0, 1.0],
        },
        true,
        Some(vec![rect_loop([0.0, 1.0], [0.0, 1.0]), hole]),
    );
    m
}

/// Untrimmed unit sphere, a single face spanning pole to pole.
pub fn unit_sphere() -> BrepModel {
    let mut m = BrepModel {
        name: "unit_sphere".into(),
        ..Default::default()
    };
    add_face(
        &mut m,
        Surface {
            kind: SurfaceKind::Sphere { radius: 1.0 },
            frame: Frame::identity(),
            u_range: [0.0, TAU],
            v_range: [-FRAC_PI_2, FRAC_PI_2],
        },
        true,
        None,
    );
    m
}

pub fn torus(major_radius: f64, minor_radius: f64) -> BrepModel {
    let mut m = BrepModel {
        name: "torus".into(),
        ..Default::default()
    };
    add_face(
        &mut m,
        Surface {
            kind: SurfaceKind::Torus {
                major_radius,
                minor_radius,
            },
            frame: Frame::identity(),
            u_range: [0.0, TAU],
            v_range: [-PI, PI],
        },
        true,
        None,
    );
    m
}

/// Bicubic patch with a bump, untrimmed.
pub fn bezier_sheet() -> BrepModel {
    let mut m = BrepModel {
        name: "bezier_sheet".into(),
        ..Default::default()
    };
    let mut control_points = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let bump = if (1..3).contains(&i) && (1..3).contains(&j) { 0.5 } else { 0.0 };
            control_points.push(Vec3::new(i as f64 / 3.0, j as f64 / 3.0, bump));
        }
    }
    add_face(
        &mut m,
        Surface {
            kind: SurfaceKind::BezierPatch(BezierPatch {
                degree_u: 3,
                degree_v: 3,
                control_points,
            }),
            frame: Frame::identity(),
            u_range: [0.0, 1.0],
            v_range: [0.0, 1.0],
        },
        true,
        None,
    );
    m
}

/// Single planar unit square, no edges.
pub fn single_face() -> BrepModel {
    let mut m = unit_cube();
    m.name = "single_face".into();
    m.surfaces.truncate(1);
    m.faces.truncate(1);
    m.curves.clear();
    m.edges.clear();
    m
}

/// Disjoint union; indices of later models are offset.
pub fn merge(name: &str, models: &[BrepModel]) -> BrepModel {
    let mut out = BrepModel {
        name: name.into(),
        ..Default::default()
    };
    for m in models {
        let (s0, c0, f0) = (out.surfaces.len(), out.curves.len(), out.faces.len());
        out.surfaces.extend(m.surfaces.iter().cloned());
        out.curves.extend(m.curves.iter().cloned());
        out.faces.extend(m.faces.iter().map(|f| Face {
            surface: f.surface + s0,
            ..f.clone()
        }));
        out.edges.extend(m.edges.iter().map(|e| TopoEdge {
            curve: e.curve + c0,
            faces: e.faces.map(|i| i + f0),
            ..e.clone()
        }));
    }
    out
}

/// Two unit cubes, the second translated by `(3, 0, 0)`.
pub fn two_cubes() -> BrepModel {
    let cube = unit_cube();
    let moved = cube.rigidly_transformed(&Rotation3::identity(), &Vec3::new(3.0, 0.0, 0.0));
    merge("two_cubes", &[cube, moved])
}

#[derive(Debug, Clone)]
pub struct RandomModelOptions {
    pub max_faces: usize,
    pub max_edges: usize,
    pub trim_probability: f64,
    pub hole_probability: f64,
    pub seam_probability: f64,
    /// Restrict face surfaces to one kind code (see [`SurfaceKind::type_code`]).
    pub surface_kind: Option<i32>,
}

impl Default for RandomModelOptions {
    fn default() -> Self {
        Self {
            max_faces: 6,
            max_edges: 8,
            trim_probability: 0.5,
            hole_probability: 0.3,
            seam_probability: 0.15,
            surface_kind: None,
        }
    }
}

pub fn random_frame<R: Rng + ?Sized>(rng: &mut R, spread: f64) -> Frame {
    let q = UnitQuaternion::from_euler_angles(
        rng.random_range(-PI..PI),
        rng.random_range(-FRAC_PI_2..FRAC_PI_2),
        rng.random_range(-PI..PI),
    );
    let origin = Vec3::new(
        rng.random_range(-spread..=spread),
        rng.random_range(-spread..=spread),
        rng.random_range(-spread..=spread),
    );
    Frame::new(origin, q * Vec3::x(), q * Vec3::y())
}

/// Random surface of the given kind code with a well-conditioned natural rectangle.
pub fn random_surface<R: Rng + ?Sized>(rng: &mut R, kind_code: i32, frame: Frame) -> Surface {
    let span = |rng: &mut R, lo: f64, hi: f64| {
        let start = rng.random_range(lo..hi);
        let len = rng.random_range(0.5..(hi - lo).min(3.0));
        [start, start + len]
    };
    let (kind, u_range, v_range) = match kind_code {
        0 => (SurfaceKind::Plane, span(rng, -2.0, 2.0), span(rng, -2.0, 2.0)),
        1 => (
            SurfaceKind::Cylinder {
                radius: rng.random_range(0.3..2.0),
            },
            span(rng, 0.0, PI),
            span(rng, -1.0, 2.0),
        ),
        2 => (
            SurfaceKind::Cone {
                radius: rng.random_range(0.5..2.0),
                half_angle: rng.random_range(0.2..1.2),
            },
            span(rng, 0.0, PI),
            [0.0, rng.random_range(0.5..2.0)],
        ),
        3 => {
            let v0 = rng.random_range(-1.3..0.3);
            (
                SurfaceKind::Sphere {
                    radius: rng.random_range(0.5..2.0),
                },
                span(rng, 0.0, PI),
                [v0, v0 + rng.random_range(0.4..1.0)],
            )
        }
        4 => {
            let big = rng.random_range(1.5..3.0);
            (
                SurfaceKind::Torus {
                    major_radius: big,
                    minor_radius: rng.random_range(0.2..0.9),
                },
                span(rng, 0.0, PI),
                span(rng, -PI, PI),
            )
        }
        _ => {
            let degree_u = rng.random_range(1..=3usize);
            let degree_v = rng.random_range(1..=3usize);
            let (w, h) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
            let mut pts = Vec::new();
            for i in 0..=degree_u {
                for j in 0..=degree_v {
                    pts.push(Vec3::new(
                        w * i as f64 / degree_u as f64,
                        h * j as f64 / degree_v as f64,
                        rng.random_range(-0.3..0.3),
                    ));
                }
            }
            (
                SurfaceKind::BezierPatch(BezierPatch {
                    degree_u,
                    degree_v,
                    control_points: pts,
                }),
                [0.0, 1.0],
                [0.0, 1.0],
            )
        }
    };
    Surface {
        kind,
        frame,
        u_range,
        v_range,
    }
}

/// Star-shaped polygon about the rectangle center; `radii` are fractions of
/// the half-spans.
fn star_loop<R: Rng + ?Sized>(rng: &mut R, u: [f64; 2], v: [f64; 2], radii: (f64, f64)) -> Vec<Uv> {
    let k = rng.random_range(5..=12usize);
    let (cu, cv) = (0.5 * (u[0] + u[1]), 0.5 * (v[0] + v[1]));
    let (hu, hv) = (0.5 * (u[1] - u[0]), 0.5 * (v[1] - v[0]));
    (0..k)
        .map(|i| {
            let theta = TAU * (i as f64 + rng.random_range(-0.2..0.2)) / k as f64;
            let r = rng.random_range(radii.0..radii.1);
            [cu + r * hu * theta.cos(), cv + r * hv * theta.sin()]
        })
        .collect()
}

pub fn random_curve<R: Rng + ?Sized>(rng: &mut R) -> Curve {
    let frame = random_frame(rng, 2.0);
    match rng.random_range(0..4) {
        0 => Curve {
            kind: CurveKind::Line,
            frame,
            t_range: [0.0, rng.random_range(0.2..3.0)],
        },
        1 => {
            let t0 = rng.random_range(0.0..PI);
            Curve {
                kind: CurveKind::CircleArc {
                    radius: rng.random_range(0.2..2.0),
                },
                frame,
                t_range: [t0, t0 + rng.random_range(0.3..PI)],
            }
        }
        2 => {
            let t0 = rng.random_range(0.0..PI);
            Curve {
                kind: CurveKind::EllipseArc {
                    semi_major: rng.random_range(0.5..2.0),
                    semi_minor: rng.random_range(0.2..0.5),
                },
                frame,
                t_range: [t0, t0 + rng.random_range(0.3..PI)],
            }
        }
        _ => {
            let n = rng.random_range(2..=4usize);
            // Monotone in x so the derivative never vanishes.
            let control_points = (0..n)
                .map(|i| {
                    Vec3::new(
                        i as f64 + rng.random_range(0.0..0.5),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            Curve {
                kind: CurveKind::Bezier { control_points },
                frame,
                t_range: [0.0, 1.0],
            }
        }
    }
}

/// Random valid model mixing every surface and curve kind, with random
/// star-shaped trims, holes and seam edges.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, opts: &RandomModelOptions) -> BrepModel {
    let mut m = BrepModel {
        name: format!("random_{:08x}", rng.random::<u32>()),
        ..Default::default()
    };
    let nf = rng.random_range(1..=opts.max_faces.max(1));
    for _ in 0..nf {
        let kind = opts.surface_kind.unwrap_or_else(|| rng.random_range(0..6));
        let frame = random_frame(rng, 2.0);
        let surface = random_surface(rng, kind, frame);
        let (u, v) = (surface.u_range, surface.v_range);
        let mut loops = if rng.random_bool(opts.trim_probability) {
            vec![star_loop(rng, u, v, (0.6, 1.0))]
        } else {
            vec![rect_loop(u, v)]
        };
        if rng.random_bool(opts.hole_probability) {
            let mut hole = star_loop(rng, u, v, (0.1, 0.25));
            hole.reverse();
            loops.push(hole);
        }
        let same_sense = rng.random_bool(0.5);
        add_face(&mut m, surface, same_sense, Some(loops));
    }
    let ne = rng.random_range(0..=opts.max_edges);
    for _ in 0..ne {
        let a = rng.random_range(0..nf);
        let b = if nf == 1 || rng.random_bool(opts.seam_probability) {
            a
        } else {
            (a + rng.random_range(1..nf)) % nf
        };
        let curve = random_curve(rng);
        add_edge(&mut m, curve, [a, b]);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cube_edges_join_adjacent_faces() {
        let cube = unit_cube();
        for e in &cube.edges {
            // Adjacent faces are perpendicular to different axes.
            assert_ne!(e.faces[0] / 2, e.faces[1] / 2);
        }
        let mut pairs: Vec<_> = cube.edges.iter().map(|e| {
            let mut f = e.faces;
            f.sort();
            f
        }).collect();
        pairs.sort();
        pairs.dedup();
        assert_eq!(pairs.len(), 12);
    }

    #[test]
    fn cube_normals_point_outward() {
        let cube = unit_cube();
        for (i, f) in cube.faces.iter().enumerate() {
            let s = &cube.surfaces[f.surface];
            let n = crate::diffgeo::unit_normal(s, f.same_sense, 0.5, 0.5).unwrap();
            let center = crate::diffgeo::surface_jet(s, 0.5, 0.5).unwrap().point;
            let outward = center - Vec3::new(0.5, 0.5, 0.5);
            assert!(n.dot(&outward) > 0.0, "face {i}");
        }
    }

    #[test]
    fn random_models_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let m = random_model(&mut rng, &RandomModelOptions::default());
            let report = validate(&m);
            assert!(report.is_valid(), "{:?}", report.errors().collect::<Vec<_>>());
        }
    }

    #[test]
    fn merged_model_is_disjoint_union() {
        let m = two_cubes();
        assert_eq!(m.faces.len(), 12);
        assert_eq!(m.edges.len(), 24);
        assert!(m.edges[12..].iter().all(|e| e.faces.iter().all(|&f| f >= 6)));
        assert!(validate(&m).is_empty());
    }
}
