//! Symmetric contrastive loss between paired shape and text embeddings, with
//! closed-form gradients and a central-difference checker.
//!
//! With `Ẑ` the row-normalized embeddings, `S = Ẑ_brep Ẑ_textᵀ`, `P` the row
//! softmax and `Q` the column softmax of `S/τ`:
//!
//! ```text
//! L = −(1/2N) Σ_i (log P_ii + log Q_ii)
//! ```

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignError {
    #[error("row {0} has zero norm")]
    ZeroNormRow(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("non-finite input")]
    NonFinite,
    #[error("empty batch")]
    Empty,
    #[error("finite-difference step {0} outside [1e-7, 1e-2]")]
    Step(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    pub z_brep: Array2<f64>,
    pub z_text: Array2<f64>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub z_brep: Array2<f64>,
    pub z_text: Array2<f64>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub loss: f64,
    pub s: Array2<f64>,
    pub p: Array2<f64>,
    pub q: Array2<f64>,
    pub grads: Option<Gradients>,
}

/// Divide each row by its Euclidean norm. Returns the norms too.
fn normalize_rows(z: ArrayView2<f64>) -> Result<(Array2<f64>, Array1<f64>), AlignError> {
    let norms: Array1<f64> = z.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    if let Some(i) = norms.iter().position(|&n| !(n > MIN_NORM)) {
        return Err(AlignError::ZeroNormRow(i));
    }
    let mut out = z.to_owned();
    for (mut row, &n) in out.rows_mut().into_iter().zip(&norms) {
        row /= n;
    }
    Ok((out, norms))
}

pub fn l2_normalize(z: ArrayView2<f64>) -> Result<Array2<f64>, AlignError> {
    normalize_rows(z).map(|(z, _)| z)
}

/// `S_ij = ẑ_brep,i · ẑ_text,j`.
pub fn similarity_matrix(
    brep: ArrayView2<f64>,
    text: ArrayView2<f64>,
) -> Result<Array2<f64>, AlignError> {
    if brep.ncols() != text.ncols() {
        return Err(AlignError::Shape(format!(
            "embedding widths {} and {}",
            brep.ncols(),
            text.ncols()
        )));
    }
    // Entry by entry, so each value depends only on its two rows.
    Ok(Array2::from_shape_fn((brep.nrows(), text.nrows()), |(i, j)| {
        brep.row(i).dot(&text.row(j))
    }))
}

/// Sum in ascending order so the result does not depend on the input order.
fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Row softmax of `x` and the per-row log-sum-exp, with max subtraction.
fn row_softmax(x: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let mut p = x.clone();
    let mut lse = Array1::zeros(x.nrows());
    for (i, mut row) in p.rows_mut().into_iter().enumerate() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let sum = sorted_sum(row.to_vec());
        row /= sum;
        lse[i] = m + sum.ln();
    }
    (p, lse)
}

fn check(batch: &EmbeddingBatch) -> Result<(), AlignError> {
    let (zb, zt) = (&batch.z_brep, &batch.z_text);
    if zb.dim() != zt.dim() {
        return Err(AlignError::Shape(format!(
            "z_brep is {:?}, z_text is {:?}",
            zb.dim(),
            zt.dim()
        )));
    }
    if zb.nrows() == 0 {
        return Err(AlignError::Empty);
    }
    if zb.iter().chain(zt.iter()).any(|x| !x.is_finite()) || !batch.temperature.is_finite() {
        return Err(AlignError::NonFinite);
    }
    if !(batch.temperature > 0.0) {
        return Err(AlignError::Temperature(batch.temperature));
    }
    Ok(())
}

/// Back-propagate through `ẑ = z/‖z‖`: `dz = (dẑ − ẑ (ẑ·dẑ)) / ‖z‖`.
fn through_normalization(dzh: &Array2<f64>, zh: &Array2<f64>, norms: &Array1<f64>) -> Array2<f64> {
    let mut out = dzh.clone();
    Zip::from(out.rows_mut())
        .and(zh.rows())
        .and(norms)
        .for_each(|mut d, z, &n| {
            let proj = z.dot(&d);
            d.scaled_add(-proj, &z);
            d /= n;
        });
    out
}

pub fn clip_loss(batch: &EmbeddingBatch, want_grads: bool) -> Result<LossResult, AlignError> {
    check(batch)?;
    let n = batch.z_brep.nrows();
    let tau = batch.temperature;
    let (zb, nb) = normalize_rows(batch.z_brep.view())?;
    let (zt, nt) = normalize_rows(batch.z_text.view())?;
    let s = similarity_matrix(zb.view(), zt.view())?;
    let logits = &s / tau;
    let (p, lse_row) = row_softmax(&logits);
    let (qt, lse_col) = row_softmax(&logits.t().to_owned());
    let q = qt.reversed_axes();

    // log P_ii = S_ii/τ − lse_row_i, likewise for Q.
    let terms: Vec<f64> = (0..n)
        .flat_map(|i| {
            let d = logits[[i, i]];
            [d - lse_row[i], d - lse_col[i]]
        })
        .collect();
    let loss = (-sorted_sum(terms) / (2 * n) as f64).max(0.0);

    let grads = want_grads.then(|| {
        // dL/dS = ((P − I) + (Q − I)) / (2Nτ)
        let mut g = &p + &q;
        for i in 0..n {
            g[[i, i]] -= 2.0;
        }
        g /= 2.0 * n as f64 * tau;
        let d_tau = -(&g * &s).sum() / tau;
        let dzb = through_normalization(&g.dot(&zt), &zb, &nb);
        let dzt = through_normalization(&g.t().dot(&zb), &zt, &nt);
        Gradients {
            z_brep: dzb,
            z_text: dzt,
            temperature: d_tau,
        }
    });
    Ok(LossResult {
        loss,
        s,
        p,
        q,
        grads,
    })
}

/// Max over every coordinate of `z_brep`, `z_text` and `τ` of
/// `|analytic − numeric| / max(1, |analytic|)` with central differences.
pub fn fd_check(batch: &EmbeddingBatch, eps: f64) -> Result<f64, AlignError> {
    if !(1e-7..=1e-2).contains(&eps) {
        return Err(AlignError::Step(eps));
    }
    let analytic = clip_loss(batch, true)?.grads.expect("requested");
    let loss_at = |b: &EmbeddingBatch| clip_loss(b, false).map(|r| r.loss);
    let rel = |a: f64, num: f64| (a - num).abs() / a.abs().max(1.0);

    let mut worst = 0.0f64;
    for which in 0..2 {
        let (rows, cols) = batch.z_brep.dim();
        for i in 0..rows {
            for j in 0..cols {
                let mut plus = batch.clone();
                let mut minus = batch.clone();
                let (zp, zm, a) = if which == 0 {
                    (&mut plus.z_brep, &mut minus.z_brep, analytic.z_brep[[i, j]])
                } else {
                    (&mut plus.z_text, &mut minus.z_text, analytic.z_text[[i, j]])
                };
                zp[[i, j]] += eps;
                zm[[i, j]] -= eps;
                let num = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * eps);
                worst = worst.max(rel(a, num));
            }
        }
    }
    let mut plus = batch.clone();
    let mut minus = batch.clone();
    plus.temperature += eps;
    minus.temperature -= eps;
    let num = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * eps);
    Ok(worst.max(rel(analytic.temperature, num)))
}

/// Batch of `n × d` embeddings with entries uniform in `[-1, 1)`.
pub fn random_batch(seed: u64, n: usize, d: usize, temperature: f64) -> EmbeddingBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..1.0));
    EmbeddingBatch {
        z_brep: draw(),
        z_text: draw(),
        temperature,
    }
}

/// Sum of `P`'s rows and `Q`'s columns, for invariant checks.
pub fn stochastic_sums(r: &LossResult) -> (Array1<f64>, Array1<f64>) {
    (r.p.sum_axis(Axis(1)), r.q.sum_axis(Axis(0)))
}
