//! Brep-to-graph preprocessing and the numeric kernels that consume its output.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`model`]: the parametric Brep data model and its JSON exchange format.
//! - [`diffgeo`]: surface/curve evaluation, normals, mean curvature, areas, lengths, trimming.
//! - [`sampler`]: area/length adaptive UV sampling into per-face and per-edge attribute tensors.
//! - [`graph`]: the face-adjacency graph over sampled faces and edges.
//! - [`encoder`]: deterministic forward pass of the hierarchical face/edge/topology encoder.
//! - [`align`]: symmetric contrastive loss with closed-form gradients and a finite-difference checker.
//! - [`mqe`]: residual mixture of query experts with a sparse top-G router.
//! - [`dataset`]: manifest + binary shard containers.
//!
//! [`synth`] builds reference and randomized models for tests and demos.

// Range checks are written `!(x > t)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod dataset;
pub mod diffgeo;
pub mod encoder;
pub mod graph;
pub mod model;
pub mod mqe;
pub mod sampler;
pub mod synth;

pub use model::{parse_brep, validate, BrepModel};
