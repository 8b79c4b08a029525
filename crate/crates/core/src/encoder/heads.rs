use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::params::{EncoderParams, Linear};
use super::{softmax, EncodeError, GlobalToken, NodeTokens, QFormerInput, D_QF, T_MAX};

/// `s_i = w·tanh(W h_i)`, `α = softmax(s)`, `h_cls = Σ α_i h_i`.
pub fn global_pool(tokens: &NodeTokens, p: &EncoderParams) -> Result<GlobalToken, EncodeError> {
    let h = &tokens.h;
    if h.nrows() == 0 {
        return Err(EncodeError::EmptyGraph);
    }
    let mut scores: Vec<f64> = h
        .rows()
        .into_iter()
        .map(|hi| p.pool_v.dot(&p.pool_w.dot(&hi).mapv(f64::tanh)))
        .collect();
    softmax(&mut scores);
    let mut h_cls = Array1::zeros(h.ncols());
    for (hi, &a) in h.rows().into_iter().zip(&scores) {
        h_cls.scaled_add(a, &hi);
    }
    Ok(GlobalToken {
        h_cls,
        alpha: Array1::from(scores),
    })
}

/// Contrastive head: a single affine map to width `D`.
pub fn project_clip(h_cls: ArrayView1<f64>, p: &EncoderParams) -> Array1<f64> {
    p.clip.apply(h_cls)
}

/// Per-token affine → tanh → affine to 1408, then the first 128 tokens are
/// kept and the rest of the 128 rows zero-filled.
pub fn project_qformer(tokens: &NodeTokens, p: &EncoderParams) -> QFormerInput {
    let valid_len = tokens.h.nrows().min(T_MAX);
    let kept = tokens.h.slice(s![..valid_len, ..]);
    let hidden = p.qformer[0].apply_rows(kept).mapv(f64::tanh);
    let projected = p.qformer[1].apply_rows(hidden.view());
    let mut x = Array2::zeros((T_MAX, D_QF));
    x.slice_mut(s![..valid_len, ..]).assign(&projected);
    QFormerInput { x, valid_len }
}

/// Single-head cross-attention from a query set onto the valid rows of a
/// 1408-wide token sequence, followed by an affine output map.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub out: Linear,
}

impl CrossAttention {
    pub fn init<R: Rng>(rng: &mut R, d_q: usize, d_att: usize, d_out: usize) -> Self {
        Self {
            query: Linear::init(rng, d_q, d_att),
            key: Linear::init(rng, D_QF, d_att),
            value: Linear::init(rng, D_QF, d_att),
            out: Linear::init(rng, d_att, d_out),
        }
    }

    pub fn d_q(&self) -> usize {
        self.query.d_in()
    }

    pub fn d_out(&self) -> usize {
        self.out.d_out()
    }
}

/// Padding rows beyond `valid_len` never enter the computation, which is the
/// same as giving them logit −∞.
pub fn cross_attend(
    queries: ArrayView2<f64>,
    input: &QFormerInput,
    attn: &CrossAttention,
) -> Result<Array2<f64>, EncodeError> {
    if input.valid_len == 0 {
        return Err(EncodeError::NoValidTokens);
    }
    if queries.ncols() != attn.d_q() {
        return Err(EncodeError::Shape(format!(
            "queries have width {}, attention expects {}",
            queries.ncols(),
            attn.d_q()
        )));
    }
    let tokens = input.x.slice(s![..input.valid_len, ..]);
    let q = attn.query.apply_rows(queries);
    let k = attn.key.apply_rows(tokens);
    let v = attn.value.apply_rows(tokens);
    let scale = (q.ncols() as f64).sqrt();
    let mut w = q.dot(&k.t()) / scale;
    for mut row in w.rows_mut() {
        softmax(row.as_slice_mut().expect("standard layout"));
    }
    Ok(attn.out.apply_rows(w.dot(&v).view()))
}

/// Mean of the valid rows of `X_qf`.
pub fn mean_valid_rows(input: &QFormerInput) -> Result<Array1<f64>, EncodeError> {
    if input.valid_len == 0 {
        return Err(EncodeError::NoValidTokens);
    }
    Ok(input
        .x
        .slice(s![..input.valid_len, ..])
        .mean_axis(Axis(0))
        .expect("non-empty"))
}
