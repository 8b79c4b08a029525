//! Adaptive UV sampling of faces and edges into fixed-width attribute tensors.
//!
//! Face grids are `N_S × N_S` with `N_S` interpolated linearly from the face's
//! area between the smallest and largest face of the model; edge sample counts
//! follow the same rule on arc length.

use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffgeo::{
    edge_length, face_area, local_curve, local_jet, point_in_face, EdgeGeometrySummary,
    FaceGeometrySummary, GeomError, DEFAULT_QUADRATURE,
};
use crate::model::{BrepModel, IndexError, UvRect};

pub const FACE_COLUMNS: usize = 10;
pub const EDGE_COLUMNS: usize = 8;

/// Face tensor columns.
pub mod face_col {
    pub const P: usize = 0;
    pub const N: usize = 3;
    pub const H: usize = 6;
    pub const V: usize = 7;
    pub const T: usize = 8;
    pub const A: usize = 9;
}

/// Edge tensor columns.
pub mod edge_col {
    pub const Q: usize = 0;
    pub const TANGENT: usize = 3;
    pub const C: usize = 6;
    pub const B: usize = 7;
}

/// Fraction of the domain span by which pole samples are moved inward.
const POLE_NUDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SampleError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("value {value} outside [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },
    #[error("resolution {0} below 2")]
    InvalidResolution(usize),
    #[error("face {0} has a zero-width UV domain")]
    DegenerateDomain(usize),
    #[error("edge {0} has a zero-length interval")]
    DegenerateInterval(usize),
    #[error("model has no positive face area")]
    NoArea,
    #[error("face {face}")]
    Face { face: usize, source: GeomError },
    #[error("edge {edge}")]
    Edge { edge: usize, source: GeomError },
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_min_face: usize,
    pub n_max_face: usize,
    pub m_min_edge: usize,
    pub m_max_edge: usize,
    pub clamp_lo: usize,
    pub clamp_hi: usize,
    pub area_quadrature: usize,
    pub length_quadrature: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_min_face: 16,
            n_max_face: 32,
            m_min_edge: 16,
            m_max_edge: 32,
            clamp_lo: 16,
            clamp_hi: 32,
            area_quadrature: DEFAULT_QUADRATURE,
            length_quadrature: DEFAULT_QUADRATURE,
        }
    }
}

impl SamplerConfig {
    pub fn check(&self) -> Result<(), SampleError> {
        let bad = |m: &str| Err(SampleError::InvalidConfig(m.into()));
        if !(0 < self.n_min_face && self.n_min_face <= self.n_max_face) {
            return bad("need 0 < n_min_face <= n_max_face");
        }
        if !(0 < self.m_min_edge && self.m_min_edge <= self.m_max_edge) {
            return bad("need 0 < m_min_edge <= m_max_edge");
        }
        if self.clamp_lo > self.clamp_hi {
            return bad("need clamp_lo <= clamp_hi");
        }
        if self.clamp_lo < 2 {
            return bad("clamp_lo must be at least 2");
        }
        if self.area_quadrature < 2 || self.length_quadrature < 2 {
            return bad("quadrature orders must be at least 2");
        }
        Ok(())
    }
}

fn interpolate_resolution(
    x: f64,
    lo: f64,
    hi: f64,
    n_min: usize,
    n_max: usize,
    clamp: (usize, usize),
) -> Result<usize, SampleError> {
    if !(lo <= x && x <= hi) {
        return Err(SampleError::OutOfRange {
            value: x,
            min: lo,
            max: hi,
        });
    }
    let ratio = if hi == lo { 1.0 } else { (x - lo) / (hi - lo) };
    let n = (n_min as f64 + ratio * (n_max as f64 - n_min as f64)).round() as usize;
    Ok(n.clamp(clamp.0, clamp.1))
}

/// Per-axis face grid resolution from the face area.
pub fn face_resolution(
    area: f64,
    area_min: f64,
    area_max: f64,
    cfg: &SamplerConfig,
) -> Result<usize, SampleError> {
    interpolate_resolution(
        area,
        area_min,
        area_max,
        cfg.n_min_face,
        cfg.n_max_face,
        (cfg.clamp_lo, cfg.clamp_hi),
    )
}

/// Edge sample count from the edge length.
pub fn edge_resolution(
    length: f64,
    length_min: f64,
    length_max: f64,
    cfg: &SamplerConfig,
) -> Result<usize, SampleError> {
    interpolate_resolution(
        length,
        length_min,
        length_max,
        cfg.m_min_edge,
        cfg.m_max_edge,
        (cfg.clamp_lo, cfg.clamp_hi),
    )
}

/// `g_u·g_v × 10` face samples, rows v-major: row `l·g_u + k` holds grid
/// point `(u_k, v_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceTensor {
    pub face: usize,
    pub g_u: usize,
    pub g_v: usize,
    pub rows: Array2<f64>,
}

/// `M × 8` edge samples ordered by increasing parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTensor {
    pub edge: usize,
    pub rows: Array2<f64>,
}

fn grid(lo: f64, hi: f64, n: usize, k: usize) -> f64 {
    if k + 1 == n {
        hi
    } else {
        lo + (hi - lo) * (k as f64 / (n - 1) as f64)
    }
}

fn nudge(x: f64, lo: f64, hi: f64) -> f64 {
    let step = POLE_NUDGE * (hi - lo);
    if x < 0.5 * (lo + hi) {
        x + step
    } else {
        x - step
    }
}

/// Sample a face on an `n × n` grid over its UV domain. `area_max` is the
/// model-wide largest face area used for the `a` column.
pub fn sample_face(
    model: &BrepModel,
    face: usize,
    n: usize,
    area: f64,
    area_max: f64,
) -> Result<FaceTensor, SampleError> {
    if n < 2 {
        return Err(SampleError::InvalidResolution(n));
    }
    let f = model.face(face)?;
    let surface = model.face_surface(face)?;
    let UvRect {
        u_min,
        u_max,
        v_min,
        v_max,
    } = model.face_uv_domain(face)?;
    if !(u_max > u_min && v_max > v_min) {
        return Err(SampleError::DegenerateDomain(face));
    }
    let t = f.type_code as f64;
    let a = area / area_max;
    let mut rows = Array2::zeros((n * n, FACE_COLUMNS));
    for l in 0..n {
        let v = grid(v_min, v_max, n, l);
        for k in 0..n {
            let u = grid(u_min, u_max, n, k);
            let mut jet = local_jet(surface, u, v);
            let normal = match jet.normal(f.same_sense) {
                Some(nrm) => nrm,
                None => {
                    let (un, vn) = (nudge(u, u_min, u_max), nudge(v, v_min, v_max));
                    jet = local_jet(surface, un, vn);
                    jet.normal(f.same_sense).ok_or(SampleError::Face {
                        face,
                        source: GeomError::DegenerateNormal { u, v },
                    })?
                }
            };
            let h = jet.mean_curvature(&normal);
            let p = surface.frame.point_to_world(&jet.point);
            let nw = surface.frame.vector_to_world(&normal);
            let visible = if point_in_face(f, u, v) { 1.0 } else { 0.0 };
            let mut row = rows.row_mut(l * n + k);
            for d in 0..3 {
                row[face_col::P + d] = p[d];
                row[face_col::N + d] = nw[d];
            }
            row[face_col::H] = h;
            row[face_col::V] = visible;
            row[face_col::T] = t;
            row[face_col::A] = a;
        }
    }
    Ok(FaceTensor {
        face,
        g_u: n,
        g_v: n,
        rows,
    })
}

/// Sample an edge at `m` parameter-uniform points over its interval.
pub fn sample_edge(
    model: &BrepModel,
    edge: usize,
    m: usize,
    length: f64,
    length_max: f64,
) -> Result<EdgeTensor, SampleError> {
    if m < 2 {
        return Err(SampleError::InvalidResolution(m));
    }
    let e = model.edge(edge)?;
    let curve = model.edge_curve(edge)?;
    let [t0, t1] = e.t_range;
    if !(t1 > t0) {
        return Err(SampleError::DegenerateInterval(edge));
    }
    let c = e.type_code as f64;
    let b = length / length_max;
    let mut rows = Array2::zeros((m, EDGE_COLUMNS));
    for i in 0..m {
        let t = grid(t0, t1, m, i);
        let (q, d) = local_curve(curve, t);
        let speed = d.norm();
        if !(speed > 1e-12) {
            return Err(SampleError::Edge {
                edge,
                source: GeomError::DegenerateTangent { t },
            });
        }
        let q = curve.frame.point_to_world(&q);
        let tan = curve.frame.vector_to_world(&(d / speed));
        let mut row = rows.row_mut(i);
        for k in 0..3 {
            row[edge_col::Q + k] = q[k];
            row[edge_col::TANGENT + k] = tan[k];
        }
        row[edge_col::C] = c;
        row[edge_col::B] = b;
    }
    Ok(EdgeTensor { edge, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFace {
    pub summary: FaceGeometrySummary,
    pub resolution: usize,
    pub tensor: FaceTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledEdge {
    pub summary: EdgeGeometrySummary,
    pub resolution: usize,
    pub tensor: EdgeTensor,
}

#[derive(Debug, Clone)]
pub struct SampledModel {
    pub model: Arc<BrepModel>,
    pub config: SamplerConfig,
    pub faces: Vec<SampledFace>,
    pub edges: Vec<SampledEdge>,
    pub area_min: f64,
    pub area_max: f64,
    /// Zero when the model has no edges, as are `length_max`.
    pub length_min: f64,
    pub length_max: f64,
}

fn extrema(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    })
}

/// Sample every face and edge of a validated model. Summaries and tensors are
/// computed in parallel per entity; the result does not depend on thread count.
pub fn sample_model(
    model: Arc<BrepModel>,
    cfg: &SamplerConfig,
) -> Result<SampledModel, SampleError> {
    cfg.check()?;
    let m = model.as_ref();
    let areas: Vec<FaceGeometrySummary> = (0..m.faces.len())
        .into_par_iter()
        .map(|i| face_area(m, i, cfg.area_quadrature).map_err(|source| SampleError::Face { face: i, source }))
        .collect::<Result<_, _>>()?;
    let lengths: Vec<EdgeGeometrySummary> = (0..m.edges.len())
        .into_par_iter()
        .map(|i| edge_length(m, i, cfg.length_quadrature).map_err(|source| SampleError::Edge { edge: i, source }))
        .collect::<Result<_, _>>()?;

    let (area_min, area_max) = extrema(areas.iter().map(|s| s.area));
    if !(area_max > 0.0) {
        return Err(SampleError::NoArea);
    }
    let (length_min, length_max) = if lengths.is_empty() {
        (0.0, 0.0)
    } else {
        extrema(lengths.iter().map(|s| s.length))
    };

    let faces = areas
        .into_par_iter()
        .map(|summary| {
            let n = face_resolution(summary.area, area_min, area_max, cfg)?;
            let tensor = sample_face(m, summary.face, n, summary.area, area_max)?;
            Ok(SampledFace {
                summary,
                resolution: n,
                tensor,
            })
        })
        .collect::<Result<Vec<_>, SampleError>>()?;
    let edges = lengths
        .into_par_iter()
        .map(|summary| {
            let k = edge_resolution(summary.length, length_min, length_max, cfg)?;
            let tensor = sample_edge(m, summary.edge, k, summary.length, length_max)?;
            Ok(SampledEdge {
                summary,
                resolution: k,
                tensor,
            })
        })
        .collect::<Result<Vec<_>, SampleError>>()?;

    Ok(SampledModel {
        model,
        config: *cfg,
        faces,
        edges,
        area_min,
        area_max,
        length_min,
        length_max,
    })
}
