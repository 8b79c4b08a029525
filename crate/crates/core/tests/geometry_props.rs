//! Property tests for the data model, differential geometry and sampling.

use std::sync::Arc;

use nalgebra::Rotation3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use brepgraph::diffgeo::{point_in_loops, surface_jet, surface_point, SurfaceJet};
use brepgraph::model::{parse_brep, to_json, validate, IssueKind, Severity, Vec3};
use brepgraph::sampler::{
    edge_col, edge_resolution, face_col, face_resolution, sample_model, SamplerConfig,
};
use brepgraph::synth::{random_frame, random_model, random_surface, RandomModelOptions};

fn model_from_seed(seed: u64) -> brepgraph::BrepModel {
    random_model(&mut ChaCha8Rng::seed_from_u64(seed), &RandomModelOptions::default())
}

/// Central-difference jet of the world-space point map.
fn fd_jet(s: &brepgraph::model::Surface, u: f64, v: f64, h: f64) -> SurfaceJet {
    let p = |du: f64, dv: f64| surface_jet(s, u + du, v + dv).unwrap().point;
    let c = p(0.0, 0.0);
    SurfaceJet {
        point: c,
        du: (p(h, 0.0) - p(-h, 0.0)) / (2.0 * h),
        dv: (p(0.0, h) - p(0.0, -h)) / (2.0 * h),
        duu: (p(h, 0.0) - 2.0 * c + p(-h, 0.0)) / (h * h),
        dvv: (p(0.0, h) - 2.0 * c + p(0.0, -h)) / (h * h),
        duv: (p(h, h) - p(h, -h) - p(-h, h) + p(-h, -h)) / (4.0 * h * h),
    }
}

fn close(a: &Vec3, b: &Vec3, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip_is_exact(seed in any::<u64>()) {
        let m = model_from_seed(seed);
        let text = to_json(&m);
        let back = parse_brep(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(to_json(&back), text);
    }

    #[test]
    fn parsed_documents_have_no_validation_errors(seed in any::<u64>()) {
        let m = parse_brep(&to_json(&model_from_seed(seed))).unwrap();
        let report = validate(&m);
        prop_assert!(report.is_valid());
        // Only seam edges may be reported, and only as warnings.
        for issue in &report.issues {
            prop_assert_eq!(issue.severity, Severity::Warning);
            prop_assert_eq!(issue.kind, IssueKind::SeamEdge);
        }
    }

    #[test]
    fn face_domain_lies_in_natural_rectangle(seed in any::<u64>()) {
        let m = model_from_seed(seed);
        for i in 0..m.faces.len() {
            let domain = m.face_uv_domain(i).unwrap();
            prop_assert!(m.face_surface(i).unwrap().natural_rect().contains(&domain));
        }
    }

    #[test]
    fn normals_are_unit_and_flip_with_sense(
        seed in any::<u64>(),
        kind in 0i32..6,
        su in 0.0f64..1.0,
        sv in 0.0f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = random_frame(&mut rng, 2.0);
        let s = random_surface(&mut rng, kind, frame);
        let u = s.u_range[0] + su * (s.u_range[1] - s.u_range[0]);
        let v = s.v_range[0] + sv * (s.v_range[1] - s.v_range[0]);
        let Ok(fwd) = surface_point(&s, true, u, v) else {
            return Ok(());
        };
        let rev = surface_point(&s, false, u, v).unwrap();
        prop_assert!((fwd.normal.norm() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(rev.normal, -fwd.normal);
        prop_assert_eq!(rev.mean_curvature, -fwd.mean_curvature);
    }

    #[test]
    fn closed_form_curvature_matches_finite_differences(
        seed in any::<u64>(),
        kind in 0i32..6,
        su in 0.01f64..0.99,
        sv in 0.01f64..0.99,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = random_frame(&mut rng, 2.0);
        let s = random_surface(&mut rng, kind, frame);
        let u = s.u_range[0] + su * (s.u_range[1] - s.u_range[0]);
        let v = s.v_range[0] + sv * (s.v_range[1] - s.v_range[0]);
        let exact = surface_point(&s, true, u, v).unwrap();
        let jet = fd_jet(&s, u, v, 1e-5);
        let n = jet.normal(true).unwrap();
        prop_assert!((n - exact.normal).norm() <= 1e-6);
        let h = jet.mean_curvature(&n);
        prop_assert!((h - exact.mean_curvature).abs() <= 1e-4, "{} vs {}", h, exact.mean_curvature);
    }

    #[test]
    fn visibility_ignores_loop_start_and_orientation(
        seed in any::<u64>(),
        shift in 0usize..12,
        pu in -1.2f64..1.2,
        pv in -1.2f64..1.2,
    ) {
        let m = random_model(
            &mut ChaCha8Rng::seed_from_u64(seed),
            &RandomModelOptions { trim_probability: 1.0, hole_probability: 0.7, ..Default::default() },
        );
        let face = &m.faces[0];
        let d = m.face_uv_domain(0).unwrap();
        let p = [
            0.5 * (d.u_min + d.u_max) + 0.5 * pu * d.width(),
            0.5 * (d.v_min + d.v_max) + 0.5 * pv * d.height(),
        ];
        let inside = point_in_loops(&face.loops, p);
        let rotated: Vec<_> = face
            .loops
            .iter()
            .map(|l| {
                let mut l = l.clone();
                let k = shift % l.len();
                l.rotate_left(k);
                l
            })
            .collect();
        let reversed: Vec<_> = face
            .loops
            .iter()
            .map(|l| l.iter().rev().copied().collect())
            .collect();
        prop_assert_eq!(point_in_loops(&rotated, p), inside);
        prop_assert_eq!(point_in_loops(&reversed, p), inside);
    }

    #[test]
    fn resolutions_are_monotone_and_clamped(
        lo in 0.01f64..10.0,
        span in 0.0f64..100.0,
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
        n_min in 1usize..64,
        extra in 0usize..64,
    ) {
        let hi = lo + span;
        let (a, b) = (lo + t1.min(t2) * span, lo + t1.max(t2) * span);
        let cfg = SamplerConfig {
            n_min_face: n_min,
            n_max_face: n_min + extra,
            m_min_edge: n_min,
            m_max_edge: n_min + extra,
            ..SamplerConfig::default()
        };
        let (fa, fb) = (
            face_resolution(a, lo, hi, &cfg).unwrap(),
            face_resolution(b, lo, hi, &cfg).unwrap(),
        );
        let (ea, eb) = (
            edge_resolution(a, lo, hi, &cfg).unwrap(),
            edge_resolution(b, lo, hi, &cfg).unwrap(),
        );
        prop_assert!(fa <= fb && ea <= eb);
        for n in [fa, fb, ea, eb] {
            prop_assert!((16..=32).contains(&n));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rigid_motion_moves_positions_and_keeps_invariants(
        seed in any::<u64>(),
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in -3.0f64..3.0,
        shift in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let m = model_from_seed(seed);
        let rot = Rotation3::new(Vec3::from(axis).normalize() * angle);
        let t = Vec3::from(shift);
        let moved = m.rigidly_transformed(&rot, &t);
        let cfg = SamplerConfig::default();
        let a = sample_model(Arc::new(m), &cfg).unwrap();
        let b = sample_model(Arc::new(moved), &cfg).unwrap();

        for (fa, fb) in a.faces.iter().zip(&b.faces) {
            prop_assert_eq!(fa.resolution, fb.resolution);
            for (ra, rb) in fa.tensor.rows.rows().into_iter().zip(fb.tensor.rows.rows()) {
                let p = |r: &ndarray::ArrayView1<f64>, c: usize| Vec3::new(r[c], r[c + 1], r[c + 2]);
                prop_assert!(close(&p(&rb, face_col::P), &(rot * p(&ra, face_col::P) + t), 1e-9));
                prop_assert!(close(&p(&rb, face_col::N), &(rot * p(&ra, face_col::N)), 1e-9));
                for c in [face_col::H, face_col::V, face_col::T, face_col::A] {
                    prop_assert_eq!(ra[c].to_bits(), rb[c].to_bits());
                }
            }
        }
        for (ea, eb) in a.edges.iter().zip(&b.edges) {
            prop_assert_eq!(ea.resolution, eb.resolution);
            for (ra, rb) in ea.tensor.rows.rows().into_iter().zip(eb.tensor.rows.rows()) {
                let p = |r: &ndarray::ArrayView1<f64>, c: usize| Vec3::new(r[c], r[c + 1], r[c + 2]);
                prop_assert!(close(&p(&rb, edge_col::Q), &(rot * p(&ra, edge_col::Q) + t), 1e-9));
                prop_assert!(close(&p(&rb, edge_col::TANGENT), &(rot * p(&ra, edge_col::TANGENT)), 1e-9));
                for c in [edge_col::C, edge_col::B] {
                    prop_assert_eq!(ra[c].to_bits(), rb[c].to_bits());
                }
            }
        }
    }

    #[test]
    fn uniform_scale_keeps_ratios_and_scales_curvature(seed in any::<u64>(), s in 0.1f64..10.0) {
        let m = model_from_seed(seed);
        let scaled = m.scaled(s);
        let cfg = SamplerConfig::default();
        let a = sample_model(Arc::new(m), &cfg).unwrap();
        let b = sample_model(Arc::new(scaled), &cfg).unwrap();
        let rel = |x: f64, y: f64, tol: f64| (x - y).abs() <= tol * x.abs().max(1.0);

        for (fa, fb) in a.faces.iter().zip(&b.faces) {
            prop_assert_eq!(fa.resolution, fb.resolution);
            for (ra, rb) in fa.tensor.rows.rows().into_iter().zip(fb.tensor.rows.rows()) {
                prop_assert!(rel(ra[face_col::A], rb[face_col::A], 1e-12));
                prop_assert!(rel(ra[face_col::H], s * rb[face_col::H], 1e-9));
            }
        }
        for (ea, eb) in a.edges.iter().zip(&b.edges) {
            prop_assert_eq!(ea.resolution, eb.resolution);
            for (ra, rb) in ea.tensor.rows.rows().into_iter().zip(eb.tensor.rows.rows()) {
                prop_assert!(rel(ra[edge_col::B], rb[edge_col::B], 1e-12));
            }
        }
    }
}
