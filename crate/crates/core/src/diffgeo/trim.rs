//! Visibility of UV points against a face's trimming loops.

use crate::model::{point_segment_distance, Face, Uv};

const BOUNDARY_TOL: f64 = 1e-9;

/// Even–odd test over all loops of the face. Points within `1e-9` of any
/// loop segment count as inside.
pub fn point_in_face(face: &Face, u: f64, v: f64) -> bool {
    point_in_loops(&face.loops, [u, v])
}

pub fn point_in_loops(loops: &[Vec<Uv>], p: Uv) -> bool {
    let mut inside = false;
    for l in loops {
        let n = l.len();
        for i in 0..n {
            let (a, b) = (l[i], l[(i + 1) % n]);
            if point_segment_distance(p, a, b) <= BOUNDARY_TOL {
                return true;
            }
            if crosses_ray(p, a, b) {
                inside = !inside;
            }
        }
    }
    inside
}

/// Whether segment `ab` crosses the ray from `p` towards +u. Endpoints are
/// put in a canonical order first so the answer does not depend on the
/// segment's direction.
fn crosses_ray(p: Uv, a: Uv, b: Uv) -> bool {
    let (lo, hi) = if (a[1], a[0]) <= (b[1], b[0]) { (a, b) } else { (b, a) };
    // Half-open in v so a vertex exactly on the ray is counted once.
    if !(lo[1] <= p[1] && p[1] < hi[1]) {
        return false;
    }
    let x = lo[0] + (p[1] - lo[1]) * (hi[0] - lo[0]) / (hi[1] - lo[1]);
    p[0] < x
}
