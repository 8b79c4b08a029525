use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::params::{EdgeBranchParams, FaceBranchParams, Linear, TopoBranchParams};
use super::{softmax, EncodeError, D_EDGE, D_FACE, D_TOPO};
use crate::graph::BrepGraph;
use crate::sampler::{edge_col, face_col, FaceTensor};

fn row_mean(x: ArrayView2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).expect("non-empty")
}

/// Single-head scaled dot-product attention block with residual, then a
/// residual `tanh` feed-forward, then a mean over rows.
pub fn face_branch(tensor: &FaceTensor, p: &FaceBranchParams) -> Result<Array1<f64>, EncodeError> {
    if tensor.rows.nrows() == 0 {
        return Err(EncodeError::EmptyFaceTensor(tensor.face));
    }
    let e = p.embed.apply_rows(tensor.rows.view());
    let q = p.query.apply_rows(e.view());
    let k = p.key.apply_rows(e.view());
    let v = p.value.apply_rows(e.view());
    let mut scores = q.dot(&k.t()) / (D_FACE as f64).sqrt();
    for mut row in scores.rows_mut() {
        softmax(row.as_slice_mut().expect("standard layout"));
    }
    let y = &e + &p.out.apply_rows(scores.dot(&v).view());
    let z = &y + &p.ffn.apply_rows(y.view()).mapv(f64::tanh);
    Ok(row_mean(z.view()))
}

/// Descriptor `x_j` of a neighbor face: affine embed of its row mean.
pub fn face_descriptor(tensor: &FaceTensor, p: &EdgeBranchParams) -> Array1<f64> {
    p.descriptor.apply(row_mean(tensor.rows.view()).view())
}

/// `32 × 32` kernel generated from an edge tensor's row mean.
pub fn edge_kernel(edge_rows: ArrayView2<f64>, p: &EdgeBranchParams) -> Array2<f64> {
    let hidden = p.edge_embed.apply(row_mean(edge_rows).view()).mapv(f64::tanh);
    p.kernel
        .apply(hidden.view())
        .into_shape_with_order((D_EDGE, D_EDGE))
        .expect("kernel width is 32·32")
}

/// Edge-conditioned convolution: `F_e(i) = tanh(mean_{j→i} K(e)·x_j + bias)`.
pub fn edge_branch(graph: &BrepGraph, p: &EdgeBranchParams) -> Vec<Array1<f64>> {
    let descriptors: Vec<_> = graph.nodes.iter().map(|n| face_descriptor(&n.tensor, p)).collect();
    let kernels: Vec<_> = graph
        .arcs
        .iter()
        .map(|a| edge_kernel(a.tensor.rows.view(), p))
        .collect();
    graph
        .incoming()
        .iter()
        .map(|inc| {
            let mut acc = Array1::zeros(D_EDGE);
            for d in inc {
                acc += &kernels[d.arc].dot(&descriptors[d.from]);
            }
            if !inc.is_empty() {
                acc /= inc.len() as f64;
            }
            (acc + &p.bias).mapv(f64::tanh)
        })
        .collect()
}

/// Unfold a `rows × cols` image stored pixel-major (`y·cols + x`, channels
/// as columns) into 3×3 zero-padded patches, column `c·9 + dy·3 + dx`.
fn unfold2d(x: ArrayView2<f64>, rows: usize, cols: usize) -> Array2<f64> {
    let ch = x.ncols();
    let mut out = Array2::zeros((rows * cols, ch * 9));
    for y in 0..rows {
        for xx in 0..cols {
            let mut patch = out.row_mut(y * cols + xx);
            for dy in 0..3 {
                let Some(sy) = (y + dy).checked_sub(1).filter(|&v| v < rows) else {
                    continue;
                };
                for dx in 0..3 {
                    let Some(sx) = (xx + dx).checked_sub(1).filter(|&v| v < cols) else {
                        continue;
                    };
                    let src = x.row(sy * cols + sx);
                    for c in 0..ch {
                        patch[c * 9 + dy * 3 + dx] = src[c];
                    }
                }
            }
        }
    }
    out
}

/// Width-3 zero-padded patches of a sequence, column `c·3 + dt`.
fn unfold1d(x: ArrayView2<f64>) -> Array2<f64> {
    let (len, ch) = x.dim();
    let mut out = Array2::zeros((len, ch * 3));
    for t in 0..len {
        for dt in 0..3 {
            let Some(st) = (t + dt).checked_sub(1).filter(|&v| v < len) else {
                continue;
            };
            for c in 0..ch {
                out[[t, c * 3 + dt]] = x[[st, c]];
            }
        }
    }
    out
}

fn conv_stack(x: Array2<f64>, layers: &[Linear; 2], unfold: impl Fn(ArrayView2<f64>) -> Array2<f64>) -> Array1<f64> {
    let mut h = x;
    for l in layers {
        h = l.apply_rows(unfold(h.view()).view()).mapv(f64::tanh);
    }
    row_mean(h.view())
}

/// Node seed: two 3×3 convolutions over the face's `g_v × g_u` point grid.
pub fn node_seed(tensor: &FaceTensor, p: &TopoBranchParams) -> Array1<f64> {
    let pts = tensor.rows.slice(s![.., face_col::P..face_col::P + 3]).to_owned();
    let (rows, cols) = (tensor.g_v, tensor.g_u);
    conv_stack(pts, &p.conv2d, |x| unfold2d(x, rows, cols))
}

/// Arc feature: two width-3 convolutions over the edge's sample points.
pub fn arc_feature(edge_rows: ArrayView2<f64>, p: &TopoBranchParams) -> Array1<f64> {
    let pts = edge_rows.slice(s![.., edge_col::Q..edge_col::Q + 3]).to_owned();
    conv_stack(pts, &p.conv1d, unfold1d)
}

fn leaky(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        0.2 * x
    }
}

fn cat(parts: &[ArrayView1<f64>]) -> Array1<f64> {
    concatenate(Axis(0), parts).expect("1-d parts")
}

/// Two edge-featured graph-attention layers over node seeds. Each node also
/// attends to itself through a zero arc feature.
pub fn topo_branch(graph: &BrepGraph, p: &TopoBranchParams) -> Vec<Array1<f64>> {
    let mut h: Vec<_> = graph.nodes.iter().map(|n| node_seed(&n.tensor, p)).collect();
    let arcs: Vec<_> = graph
        .arcs
        .iter()
        .map(|a| arc_feature(a.tensor.rows.view(), p))
        .collect();
    let incoming = graph.incoming();
    let zero = Array1::zeros(D_TOPO);
    for layer in &p.gat {
        h = incoming
            .iter()
            .enumerate()
            .map(|(i, inc)| {
                let hi = h[i].view();
                // Self-connection first, then incoming arcs in arc order.
                let sources: Vec<(ArrayView1<f64>, ArrayView1<f64>)> =
                    std::iter::once((hi, zero.view()))
                        .chain(inc.iter().map(|d| (h[d.from].view(), arcs[d.arc].view())))
                        .collect();
                let mut logits: Vec<f64> = sources
                    .iter()
                    .map(|(hj, e)| leaky(layer.attn.apply(cat(&[hi, *hj, *e]).view())[0]))
                    .collect();
                softmax(&mut logits);
                let mut agg = Array1::zeros(D_TOPO);
                for ((hj, e), a) in sources.iter().zip(&logits) {
                    agg.scaled_add(*a, &layer.message.apply(cat(&[*hj, *e]).view()));
                }
                &h[i] + &agg.mapv(f64::tanh)
            })
            .collect();
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unfold2d_matches_direct_convolution() {
        // 2×3 single-channel image, kernel picks the right neighbor.
        let img = Array2::from_shape_vec((6, 1), vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let u = unfold2d(img.view(), 2, 3);
        let right = 5; // dy = 1, dx = 2
        let got: Vec<f64> = u.column(right).to_vec();
        assert_eq!(got, vec![2., 3., 0., 5., 6., 0.]);
        let center: Vec<f64> = u.column(4).to_vec();
        assert_eq!(center, vec![1., 2., 3., 4., 5., 6.]);
        let up_left: Vec<f64> = u.column(0).to_vec();
        assert_eq!(up_left, vec![0., 0., 0., 0., 1., 2.]);
    }

    #[test]
    fn unfold1d_pads_with_zeros() {
        let seq = Array2::from_shape_vec((3, 2), vec![1., 10., 2., 20., 3., 30.]).unwrap();
        let u = unfold1d(seq.view());
        assert_eq!(u.row(0).to_vec(), vec![0., 1., 2., 0., 10., 20.]);
        assert_eq!(u.row(2).to_vec(), vec![2., 3., 0., 20., 30., 0.]);
    }

    #[test]
    fn leaky_slope() {
        assert_eq!(leaky(2.0), 2.0);
        assert_eq!(leaky(-1.0), -0.2);
    }
}
