//! Residual mixture of query experts.
//!
//! A frozen base query set attends to the query-interface input to give
//! `Q_base`. A router scores `k` residual expert query sets from the mean of
//! the valid input rows; the top `G` are run through the same cross-attention
//! and their own output maps, and their gated sum is added to the base.
//! Expert output maps start at zero, so a fresh set of parameters returns
//! `Q_base` unchanged.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::{
    cross_attend, mean_valid_rows, CrossAttention, EncodeError, Linear, QFormerInput, D_QF,
};

pub const DEFAULT_EXPERTS: usize = 4;
pub const DEFAULT_ACTIVE: usize = 2;
pub const DEFAULT_QUERIES: usize = 32;
pub const DEFAULT_WIDTH: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MqeError {
    #[error("active expert count {active} must be in 1..={experts}")]
    ActiveCount { active: usize, experts: usize },
    #[error("expert {0} shape differs from the base query set")]
    ExpertShape(usize),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MqeConfig {
    pub experts: usize,
    pub active: usize,
    pub queries: usize,
    pub d_q: usize,
    pub d_att: usize,
    pub d_out: usize,
}

impl Default for MqeConfig {
    fn default() -> Self {
        Self {
            experts: DEFAULT_EXPERTS,
            active: DEFAULT_ACTIVE,
            queries: DEFAULT_QUERIES,
            d_q: DEFAULT_WIDTH,
            d_att: DEFAULT_WIDTH,
            d_out: DEFAULT_WIDTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MqeParams {
    pub base: Array2<f64>,
    pub experts: Vec<Array2<f64>>,
    /// One `d_out → d_out` map per expert, zero at init.
    pub expert_out: Vec<Linear>,
    /// Pooled input (1408) → one logit per expert.
    pub router: Linear,
    pub attention: CrossAttention,
    pub active: usize,
}

impl MqeParams {
    pub fn init(seed: u64, cfg: &MqeConfig) -> Result<Self, MqeError> {
        if cfg.active == 0 || cfg.active > cfg.experts {
            return Err(MqeError::ActiveCount {
                active: cfg.active,
                experts: cfg.experts,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let queries = |rng: &mut ChaCha8Rng| {
            Array2::from_shape_simple_fn((cfg.queries, cfg.d_q), || {
                rng.random_range(-1.0f32..=1.0) as f64
            })
        };
        let base = queries(&mut rng);
        let experts = (0..cfg.experts).map(|_| queries(&mut rng)).collect();
        let router = Linear::init(&mut rng, D_QF, cfg.experts);
        let attention = CrossAttention::init(&mut rng, cfg.d_q, cfg.d_att, cfg.d_out);
        Ok(Self {
            base,
            experts,
            expert_out: vec![Linear::zeros(cfg.d_out, cfg.d_out); cfg.experts],
            router,
            attention,
            active: cfg.active,
        })
    }

    pub fn expert_count(&self) -> usize {
        self.experts.len()
    }

    fn check(&self) -> Result<(), MqeError> {
        let k = self.experts.len();
        if self.active == 0 || self.active > k {
            return Err(MqeError::ActiveCount {
                active: self.active,
                experts: k,
            });
        }
        if let Some(i) = self.experts.iter().position(|e| e.dim() != self.base.dim()) {
            return Err(MqeError::ExpertShape(i));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingDecision {
    pub logits: Array1<f64>,
    /// Ascending expert indices.
    pub selected: Vec<usize>,
    /// Softmax over the selected logits, aligned with `selected`.
    pub gates: Vec<f64>,
}

/// Top-`active` experts by logit, ties to the lower index; gates are the
/// softmax over the selected logits only.
pub fn select_top(logits: ArrayView1<f64>, active: usize) -> Result<RoutingDecision, MqeError> {
    let k = logits.len();
    if active == 0 || active > k {
        return Err(MqeError::ActiveCount { active, experts: k });
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    let mut selected = order[..active].to_vec();
    selected.sort_unstable();
    let mut gates: Vec<f64> = selected.iter().map(|&i| logits[i]).collect();
    crate::encoder::softmax(&mut gates);
    Ok(RoutingDecision {
        logits: logits.to_owned(),
        selected,
        gates,
    })
}

pub fn route(input: &QFormerInput, params: &MqeParams) -> Result<RoutingDecision, MqeError> {
    params.check()?;
    let pooled = mean_valid_rows(input)?;
    let logits = params.router.apply(pooled.view());
    select_top(logits.view(), params.active)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MqeOutput {
    pub q_base: Array2<f64>,
    pub q_residual: Array2<f64>,
    pub q_final: Array2<f64>,
    pub routing: RoutingDecision,
}

pub fn mqe_forward(input: &QFormerInput, params: &MqeParams) -> Result<MqeOutput, MqeError> {
    let routing = route(input, params)?;
    let q_base = cross_attend(params.base.view(), input, &params.attention)?;
    let mut q_residual = Array2::zeros(q_base.dim());
    for (&g, &gate) in routing.selected.iter().zip(&routing.gates) {
        let attended = cross_attend(params.experts[g].view(), input, &params.attention)?;
        let o = params.expert_out[g].apply_rows(attended.view());
        q_residual.scaled_add(gate, &o);
    }
    let q_final = &q_base + &q_residual;
    Ok(MqeOutput {
        q_base,
        q_residual,
        q_final,
        routing,
    })
}

/// Outcome of one property in [`invariant_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
}

fn random_input(rng: &mut ChaCha8Rng, valid_len: usize) -> QFormerInput {
    let mut x = Array2::zeros((crate::encoder::T_MAX, D_QF));
    for mut row in x.rows_mut().into_iter().take(valid_len) {
        row.mapv_inplace(|_| rng.random_range(-1.0..1.0));
    }
    QFormerInput { x, valid_len }
}

/// Seeded randomized checks of the routing and residual properties: zero-init
/// identity, dependence on selected experts only, tie-breaking, gate sums,
/// logit shift invariance and the `Q_final = Q_base + Q_residual` identity.
pub fn invariant_suite(seed: u64, trials: usize) -> Vec<PropertyCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = MqeConfig::default();
    let (mut identity, mut sparsity, mut decomposition) = (true, true, true);
    let (mut ties, mut gate_sum, mut shift) = (true, true, true);
    for _ in 0..trials {
        let valid_len = rng.random_range(1..=crate::encoder::T_MAX);
        let input = random_input(&mut rng, valid_len);
        let mut params = match MqeParams::init(rng.random(), &cfg) {
            Ok(p) => p,
            Err(_) => return vec![],
        };
        let Ok(fresh) = mqe_forward(&input, &params) else {
            identity = false;
            continue;
        };
        identity &= fresh.q_final == fresh.q_base && fresh.q_residual.iter().all(|&v| v == 0.0);

        for l in &mut params.expert_out {
            *l = Linear::init(&mut rng, cfg.d_out, cfg.d_out);
        }
        let Ok(before) = mqe_forward(&input, &params) else {
            sparsity = false;
            continue;
        };
        decomposition &= before.q_final == &before.q_base + &before.q_residual;
        for i in 0..params.expert_count() {
            if !before.routing.selected.contains(&i) {
                params.experts[i].mapv_inplace(|v| -2.0 * v + 0.5);
                params.expert_out[i] = Linear::init(&mut rng, cfg.d_out, cfg.d_out);
            }
        }
        sparsity &= mqe_forward(&input, &params).is_ok_and(|after| after == before);

        let k = rng.random_range(1..=8usize);
        let g = rng.random_range(1..=k);
        let level = rng.random_range(-5.0..5.0);
        let flat = Array1::from_elem(k, level);
        ties &= select_top(flat.view(), g).is_ok_and(|r| r.selected == (0..g).collect::<Vec<_>>());

        let scale = 10f64.powi(rng.random_range(-3..=3));
        let logits = Array1::from_shape_simple_fn(k, || scale * rng.random_range(-1.0..1.0));
        let Ok(r) = select_top(logits.view(), g) else {
            gate_sum = false;
            continue;
        };
        gate_sum &= r.selected.len() == g
            && r.selected.windows(2).all(|w| w[0] < w[1])
            && r.gates.iter().all(|&x| x >= 0.0)
            && (r.gates.iter().sum::<f64>() - 1.0).abs() <= 1e-9;

        // Integer logits keep the shifted values exact, so the ordering is
        // preserved bit for bit.
        let ints = Array1::from_shape_simple_fn(k, || rng.random_range(-4..=4) as f64);
        let c = rng.random_range(-100..=100) as f64;
        if let (Ok(a), Ok(b)) = (select_top(ints.view(), g), select_top((&ints + c).view(), g)) {
            shift &= a.selected == b.selected
                && a.gates.iter().zip(&b.gates).all(|(x, y)| (x - y).abs() <= 1e-12);
        } else {
            shift = false;
        }
    }
    vec![
        PropertyCheck { name: "residual_identity", passed: identity },
        PropertyCheck { name: "sparsity", passed: sparsity },
        PropertyCheck { name: "final_decomposition", passed: decomposition },
        PropertyCheck { name: "tie_break", passed: ties },
        PropertyCheck { name: "gate_sum", passed: gate_sum },
        PropertyCheck { name: "shift_invariance", passed: shift },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::T_MAX;
    use ndarray::array;

    fn input(valid_len: usize, seed: u64) -> QFormerInput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((T_MAX, D_QF));
        for i in 0..valid_len {
            for j in 0..D_QF {
                x[[i, j]] = rng.random_range(-1.0..1.0);
            }
        }
        QFormerInput { x, valid_len }
    }

    #[test]
    fn top_two_of_four() {
        let r = select_top(array![3.0, 1.0, 2.0, 0.0].view(), 2).unwrap();
        assert_eq!(r.selected, vec![0, 2]);
        let e = std::f64::consts::E;
        assert!((r.gates[0] - e / (e + 1.0)).abs() <= 1e-12);
        assert!((r.gates[0] - 0.7311).abs() <= 1e-4);
        assert!((r.gates[1] - 0.2689).abs() <= 1e-4);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let r = select_top(array![0.5, 0.5, 0.5, 0.5].view(), 2).unwrap();
        assert_eq!(r.selected, vec![0, 1]);
        assert_eq!(r.gates, vec![0.5, 0.5]);
        let r = select_top(array![1.0, 2.0, 2.0, 2.0].view(), 2).unwrap();
        assert_eq!(r.selected, vec![1, 2]);
    }

    #[test]
    fn selecting_all_is_full_softmax() {
        let logits = array![0.3, -1.0, 2.0, 0.0];
        let r = select_top(logits.view(), 4).unwrap();
        assert_eq!(r.selected, vec![0, 1, 2, 3]);
        let z: f64 = logits.iter().map(|x| x.exp()).sum();
        for (g, l) in r.gates.iter().zip(&logits) {
            assert!((g - l.exp() / z).abs() <= 1e-12);
        }
    }

    #[test]
    fn active_count_is_validated() {
        assert!(select_top(array![1.0, 2.0].view(), 3).is_err());
        assert!(select_top(array![1.0, 2.0].view(), 0).is_err());
        let cfg = MqeConfig {
            active: 5,
            ..Default::default()
        };
        assert!(MqeParams::init(0, &cfg).is_err());
    }

    #[test]
    fn fresh_params_return_the_base() {
        let p = MqeParams::init(1, &MqeConfig::default()).unwrap();
        let out = mqe_forward(&input(6, 2), &p).unwrap();
        assert_eq!(out.q_base.dim(), (32, 64));
        assert!(out.q_residual.iter().all(|&x| x == 0.0));
        assert_eq!(out.q_final, out.q_base);
    }

    #[test]
    fn single_active_expert_has_unit_gate() {
        let mut p = MqeParams::init(3, &MqeConfig {
            active: 1,
            ..Default::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for l in &mut p.expert_out {
            *l = Linear::init(&mut rng, 64, 64);
        }
        let x = input(10, 5);
        let out = mqe_forward(&x, &p).unwrap();
        assert_eq!(out.routing.gates, vec![1.0]);
        let g = out.routing.selected[0];
        let attended = cross_attend(p.experts[g].view(), &x, &p.attention).unwrap();
        assert_eq!(out.q_residual, p.expert_out[g].apply_rows(attended.view()));
    }

    #[test]
    fn unselected_experts_do_not_matter() {
        let mut p = MqeParams::init(6, &MqeConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for l in &mut p.expert_out {
            *l = Linear::init(&mut rng, 64, 64);
        }
        let x = input(20, 8);
        let before = mqe_forward(&x, &p).unwrap();
        let unused: Vec<usize> = (0..4).filter(|i| !before.routing.selected.contains(i)).collect();
        for &i in &unused {
            p.experts[i].mapv_inplace(|v| v * -3.0 + 1.0);
            p.expert_out[i] = Linear::init(&mut rng, 64, 64);
        }
        let after = mqe_forward(&x, &p).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn invariant_suite_passes() {
        let checks = invariant_suite(3, 4);
        assert_eq!(checks.len(), 6);
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn empty_input_is_rejected() {
        let p = MqeParams::init(1, &MqeConfig::default()).unwrap();
        assert!(matches!(
            mqe_forward(&input(0, 1), &p),
            Err(MqeError::Encode(EncodeError::NoValidTokens))
        ));
    }
}
