//! Forward pass of the hierarchical graph encoder.
//!
//! Each face node gets a 128-wide token `[F_t ‖ F_e ‖ F_f]`:
//!
//! - `F_f` (32): attention over the face's sample rows, then a mean.
//! - `F_e` (32): neighbor descriptors transformed by kernels generated from
//!   the shared edges' samples, averaged over incoming arcs.
//! - `F_t` (64): convolutional seeds from the point grids and edge polylines,
//!   propagated by two edge-featured graph-attention layers.
//!
//! Tokens are pooled into `h_cls` by attention, projected to the contrastive
//! width `D`, and separately projected to a 128 × 1408 query-interface input.
//! All arithmetic is `f64` and single-threaded, so outputs are bitwise
//! reproducible for a given seed and graph.

mod branches;
mod heads;
mod params;

pub use branches::{
    arc_feature, edge_branch, edge_kernel, face_branch, face_descriptor, node_seed, topo_branch,
};
pub use heads::{cross_attend, global_pool, mean_valid_rows, project_clip, project_qformer, CrossAttention};
pub use params::{
    init_bound, init_encoder, EdgeBranchParams, EncoderParams, FaceBranchParams, GatLayer, Linear,
    TopoBranchParams, CONV_HIDDEN,
};

use ndarray::{concatenate, Array1, Array2, Axis};

use crate::graph::BrepGraph;

pub const D_FACE: usize = 32;
pub const D_EDGE: usize = 32;
pub const D_TOPO: usize = 64;
pub const D_TOKEN: usize = D_TOPO + D_EDGE + D_FACE;
pub const D_QF: usize = 1408;
pub const T_MAX: usize = 128;
pub const DEFAULT_D: usize = 768;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncodeError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("face tensor of face {0} has no rows")]
    EmptyFaceTensor(usize),
    #[error("projection width D must be at least 1")]
    ZeroProjectionWidth,
    #[error("query-interface input has no valid rows")]
    NoValidTokens,
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// `n × 128` node tokens in graph node order.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTokens {
    pub h: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalToken {
    pub h_cls: Array1<f64>,
    pub alpha: Array1<f64>,
}

/// `T_MAX × 1408` rows; rows at or beyond `valid_len` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QFormerInput {
    pub x: Array2<f64>,
    pub valid_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub tokens: NodeTokens,
    pub global: GlobalToken,
    pub z_brep: Array1<f64>,
    pub qformer: QFormerInput,
}

/// In-place softmax with max subtraction.
pub(crate) fn softmax(x: &mut [f64]) {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

/// Concatenate the three branch outputs per node as `[F_t ‖ F_e ‖ F_f]`.
pub fn node_tokens(graph: &BrepGraph, p: &EncoderParams) -> Result<NodeTokens, EncodeError> {
    if graph.nodes.is_empty() {
        return Err(EncodeError::EmptyGraph);
    }
    let f_f = graph
        .nodes
        .iter()
        .map(|n| face_branch(&n.tensor, &p.face))
        .collect::<Result<Vec<_>, _>>()?;
    let f_e = edge_branch(graph, &p.edge);
    let f_t = topo_branch(graph, &p.topo);
    let mut h = Array2::zeros((graph.nodes.len(), D_TOKEN));
    for (i, mut row) in h.rows_mut().into_iter().enumerate() {
        let token = concatenate(Axis(0), &[f_t[i].view(), f_e[i].view(), f_f[i].view()])
            .expect("1-d parts");
        row.assign(&token);
    }
    Ok(NodeTokens { h })
}

pub fn encode(graph: &BrepGraph, p: &EncoderParams) -> Result<EncoderOutput, EncodeError> {
    let tokens = node_tokens(graph, p)?;
    let global = global_pool(&tokens, p)?;
    let z_brep = project_clip(global.h_cls.view(), p);
    let qformer = project_qformer(&tokens, p);
    Ok(EncoderOutput {
        tokens,
        global,
        z_brep,
        qformer,
    })
}
