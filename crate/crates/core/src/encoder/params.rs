use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EncodeError, D_EDGE, D_FACE, D_QF, D_TOKEN, D_TOPO};
use crate::sampler::{EDGE_COLUMNS, FACE_COLUMNS};

/// Largest `f32` not above `1/√fan_in`, so every drawn weight survives an
/// `f32` round trip and still respects the bound.
pub fn init_bound(fan_in: usize) -> f32 {
    let exact = 1.0 / (fan_in as f64).sqrt();
    let b = exact as f32;
    if b as f64 > exact {
        f32::from_bits(b.to_bits() - 1)
    } else {
        b
    }
}

fn uniform<R: Rng>(rng: &mut R, fan_in: usize, shape: (usize, usize)) -> Array2<f64> {
    let b = init_bound(fan_in);
    Array2::from_shape_simple_fn(shape, || rng.random_range(-b..=b) as f64)
}

/// Affine map `x ↦ W x + b`, `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn init<R: Rng>(rng: &mut R, d_in: usize, d_out: usize) -> Self {
        let weight = uniform(rng, d_in, (d_out, d_in));
        let bias = uniform(rng, d_in, (1, d_out)).remove_axis(Axis(0));
        Self { weight, bias }
    }

    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Self {
            weight: Array2::zeros((d_out, d_in)),
            bias: Array1::zeros(d_out),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.weight.nrows()
    }

    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.weight.dot(&x) + &self.bias
    }

    /// Row-wise application to an `n × in` matrix.
    pub fn apply_rows(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    fn visit<'a>(&'a self, name: &str, out: &mut Vec<(String, ArrayViewD<'a, f64>)>) {
        out.push((format!("{name}.weight"), self.weight.view().into_dyn()));
        out.push((format!("{name}.bias"), self.bias.view().into_dyn()));
    }

    fn visit_mut<'a>(&'a mut self, name: &str, out: &mut Vec<(String, ArrayViewMutD<'a, f64>)>) {
        out.push((format!("{name}.weight"), self.weight.view_mut().into_dyn()));
        out.push((format!("{name}.bias"), self.bias.view_mut().into_dyn()));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceBranchParams {
    pub embed: Linear,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub out: Linear,
    pub ffn: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBranchParams {
    /// Edge summary (8) → hidden (32), followed by tanh.
    pub edge_embed: Linear,
    /// Hidden (32) → row-major 32×32 kernel.
    pub kernel: Linear,
    /// Neighbor face summary (10) → descriptor (32).
    pub descriptor: Linear,
    pub bias: Array1<f64>,
}

/// One edge-featured graph-attention layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    /// `[h_i ‖ h_j ‖ e]` (192) → logit.
    pub attn: Linear,
    /// `[h_j ‖ e]` (128) → message (64).
    pub message: Linear,
}

/// 3×3 (2D) and width-3 (1D) convolutions are stored as [`Linear`] maps over
/// unfolded patches: input column `c·taps + tap`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoBranchParams {
    pub conv2d: [Linear; 2],
    pub conv1d: [Linear; 2],
    pub gat: [GatLayer; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub seed: u64,
    pub d: usize,
    pub face: FaceBranchParams,
    pub edge: EdgeBranchParams,
    pub topo: TopoBranchParams,
    /// `128 × 128`, no bias.
    pub pool_w: Array2<f64>,
    pub pool_v: Array1<f64>,
    pub clip: Linear,
    pub qformer: [Linear; 2],
}

pub const CONV_HIDDEN: usize = 32;

/// Draw every parameter from a ChaCha8 stream seeded with `seed`, in
/// declaration order.
pub fn init_encoder(seed: u64, d: usize) -> Result<EncoderParams, EncodeError> {
    if d == 0 {
        return Err(EncodeError::ZeroProjectionWidth);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let face = FaceBranchParams {
        embed: Linear::init(r, FACE_COLUMNS, D_FACE),
        query: Linear::init(r, D_FACE, D_FACE),
        key: Linear::init(r, D_FACE, D_FACE),
        value: Linear::init(r, D_FACE, D_FACE),
        out: Linear::init(r, D_FACE, D_FACE),
        ffn: Linear::init(r, D_FACE, D_FACE),
    };
    let edge = EdgeBranchParams {
        edge_embed: Linear::init(r, EDGE_COLUMNS, D_EDGE),
        kernel: Linear::init(r, D_EDGE, D_EDGE * D_EDGE),
        descriptor: Linear::init(r, FACE_COLUMNS, D_EDGE),
        bias: uniform(r, D_EDGE, (1, D_EDGE)).remove_axis(Axis(0)),
    };
    let mut gat = || GatLayer {
        attn: Linear::init(r, 3 * D_TOPO, 1),
        message: Linear::init(r, 2 * D_TOPO, D_TOPO),
    };
    let gat = [gat(), gat()];
    let topo = TopoBranchParams {
        conv2d: [
            Linear::init(r, 3 * 9, CONV_HIDDEN),
            Linear::init(r, CONV_HIDDEN * 9, D_TOPO),
        ],
        conv1d: [
            Linear::init(r, 3 * 3, CONV_HIDDEN),
            Linear::init(r, CONV_HIDDEN * 3, D_TOPO),
        ],
        gat,
    };
    let pool_w = uniform(r, D_TOKEN, (D_TOKEN, D_TOKEN));
    let pool_v = uniform(r, D_TOKEN, (1, D_TOKEN)).remove_axis(Axis(0));
    let clip = Linear::init(r, D_TOKEN, d);
    let qformer = [Linear::init(r, D_TOKEN, D_QF), Linear::init(r, D_QF, D_QF)];
    Ok(EncoderParams {
        seed,
        d,
        face,
        edge,
        topo,
        pool_w,
        pool_v,
        clip,
        qformer,
    })
}

impl EncoderParams {
    /// Every parameter tensor with a stable dotted name, in init order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = Vec::new();
        let f = &self.face;
        for (n, l) in [
            ("face.embed", &f.embed),
            ("face.query", &f.query),
            ("face.key", &f.key),
            ("face.value", &f.value),
            ("face.out", &f.out),
            ("face.ffn", &f.ffn),
            ("edge.edge_embed", &self.edge.edge_embed),
            ("edge.kernel", &self.edge.kernel),
            ("edge.descriptor", &self.edge.descriptor),
        ] {
            l.visit(n, &mut out);
        }
        out.push(("edge.bias".into(), self.edge.bias.view().into_dyn()));
        for (i, g) in self.topo.gat.iter().enumerate() {
            g.attn.visit(&format!("topo.gat{i}.attn"), &mut out);
            g.message.visit(&format!("topo.gat{i}.message"), &mut out);
        }
        for (i, c) in self.topo.conv2d.iter().enumerate() {
            c.visit(&format!("topo.conv2d{i}"), &mut out);
        }
        for (i, c) in self.topo.conv1d.iter().enumerate() {
            c.visit(&format!("topo.conv1d{i}"), &mut out);
        }
        out.push(("pool.w".into(), self.pool_w.view().into_dyn()));
        out.push(("pool.v".into(), self.pool_v.view().into_dyn()));
        self.clip.visit("clip", &mut out);
        self.qformer[0].visit("qformer0", &mut out);
        self.qformer[1].visit("qformer1", &mut out);
        out
    }

    /// Mutable counterpart of [`EncoderParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = Vec::new();
        let f = &mut self.face;
        for (n, l) in [
            ("face.embed", &mut f.embed),
            ("face.query", &mut f.query),
            ("face.key", &mut f.key),
            ("face.value", &mut f.value),
            ("face.out", &mut f.out),
            ("face.ffn", &mut f.ffn),
            ("edge.edge_embed", &mut self.edge.edge_embed),
            ("edge.kernel", &mut self.edge.kernel),
            ("edge.descriptor", &mut self.edge.descriptor),
        ] {
            l.visit_mut(n, &mut out);
        }
        out.push(("edge.bias".into(), self.edge.bias.view_mut().into_dyn()));
        for (i, g) in self.topo.gat.iter_mut().enumerate() {
            g.attn.visit_mut(&format!("topo.gat{i}.attn"), &mut out);
            g.message.visit_mut(&format!("topo.gat{i}.message"), &mut out);
        }
        for (i, c) in self.topo.conv2d.iter_mut().enumerate() {
            c.visit_mut(&format!("topo.conv2d{i}"), &mut out);
        }
        for (i, c) in self.topo.conv1d.iter_mut().enumerate() {
            c.visit_mut(&format!("topo.conv1d{i}"), &mut out);
        }
        out.push(("pool.w".into(), self.pool_w.view_mut().into_dyn()));
        out.push(("pool.v".into(), self.pool_v.view_mut().into_dyn()));
        self.clip.visit_mut("clip", &mut out);
        let [q0, q1] = &mut self.qformer;
        q0.visit_mut("qformer0", &mut out);
        q1.visit_mut("qformer1", &mut out);
        out
    }

    /// Fan-in used to bound each named tensor at init.
    pub fn fan_in(name: &str, shape: &[usize]) -> usize {
        match name {
            "edge.bias" => D_EDGE,
            "pool.w" | "pool.v" => D_TOKEN,
            _ if name.ends_with(".weight") => shape[1],
            _ => 0,
        }
    }
}
