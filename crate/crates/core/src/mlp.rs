//! Feedforward binary classifiers trained with mini-batch Adam.
//!
//! Hidden layers use rectified-linear activations; the output layer is
//! logistic. Training minimizes mean binary cross-entropy plus an L1 penalty
//! on the weights (biases unpenalized).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stats::expit;

/// Multilayer perceptron with a single logistic output unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    /// Layer widths from input to output, e.g. `[d, 30, 30, 30, 1]`.
    pub layer_dims: Vec<usize>,
    /// Per layer, `out x in` weights in row-major order.
    pub weights: Vec<Vec<f64>>,
    /// Per layer, one bias per output unit.
    pub biases: Vec<Vec<f64>>,
}

/// Training hyperparameters for one ensemble member.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub l1_lambda: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub n_members: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![30, 30, 30],
            l1_lambda: 1e-4,
            batch_size: 50,
            max_epochs: 100,
            learning_rate: 1e-3,
            n_members: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = !self.hidden.is_empty()
            && self.hidden.iter().all(|&h| h > 0)
            && self.l1_lambda >= 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.learning_rate > 0.0
            && self.n_members > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("training configuration must be positive".into()))
        }
    }
}

#[inline]
fn l1_sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `C(m x n) = A(m x k) * B(k x n)`, all row-major contiguous.
fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `C(m x n) = A(m x k) * B^T` where `B` is stored row-major as `(n x k)`.
fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `C(m x n) = A^T * B(k x n)` where `A` is stored row-major as `(k x m)`.
fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() >= k * m && b.len() >= k * n && c.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    /// All-zero network of the given shape.
    pub fn zeros(dims: &[usize]) -> Mlp {
        let weights = dims
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = dims.windows(2).map(|w| vec![0.0; w[1]]).collect();
        Mlp {
            layer_dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    /// Uniform Glorot initialization: weights in +-sqrt(6/(fan_in+fan_out)),
    /// biases zero.
    pub fn glorot(dims: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
        let mut net = Mlp::zeros(dims);
        for (l, w) in net.weights.iter_mut().enumerate() {
            let bound = (6.0 / (dims[l] + dims[l + 1]) as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn n_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Output probability for one feature row.
    pub fn forward(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.layer_dims[0] {
            return Err(Error::Dimension {
                expected: self.layer_dims[0],
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(self.forward_unchecked(row))
    }

    pub(crate) fn forward_unchecked(&self, row: &[f64]) -> f64 {
        let mut act = row.to_vec();
        let last = self.n_layers() - 1;
        for l in 0..=last {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let mut next = vec![0.0; n_out];
            for u in 0..n_out {
                let wrow = &self.weights[l][u * n_in..(u + 1) * n_in];
                let mut s = self.biases[l][u];
                for (w, a) in wrow.iter().zip(&act) {
                    s += w * a;
                }
                next[u] = if l == last { s } else { s.max(0.0) };
            }
            act = next;
        }
        expit(act[0])
    }
}

/// Workspace reused across mini-batches.
struct Scratch {
    /// Per layer, unit-major values with the current batch width:
    /// index `u * b + k`. The last layer holds pre-activations.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    input: Vec<f64>,
}

impl Scratch {
    fn new(dims: &[usize], b_cap: usize) -> Scratch {
        Scratch {
            acts: dims[1..].iter().map(|&u| vec![0.0; u * b_cap]).collect(),
            deltas: dims[1..].iter().map(|&u| vec![0.0; u * b_cap]).collect(),
            input: vec![0.0; dims[0] * b_cap],
        }
    }
}

/// Forward pass over a batch; returns false if the output went non-finite.
fn forward_batch(net: &Mlp, scratch: &mut Scratch, b: usize) -> bool {
    let last = net.n_layers() - 1;
    for l in 0..=last {
        let (n_in, n_out) = (net.layer_dims[l], net.layer_dims[l + 1]);
        let (prev_part, rest) = if l == 0 {
            (&scratch.input[..], &mut scratch.acts[..])
        } else {
            let (a, c) = scratch.acts.split_at_mut(l);
            (&a[l - 1][..], c)
        };
        let out = &mut rest[0];
        gemm_nn(n_out, n_in, b, &net.weights[l], prev_part, out);
        for u in 0..n_out {
            let bias = net.biases[l][u];
            let dst = &mut out[u * b..(u + 1) * b];
            if l != last {
                for d in dst.iter_mut() {
                    *d = (*d + bias).max(0.0);
                }
            } else {
                for d in dst.iter_mut() {
                    *d += bias;
                }
            }
        }
    }
    scratch.acts[last][..b].iter().all(|v| v.is_finite())
}

/// Backward pass over a batch. Expects the output-layer delta already in
/// `scratch.deltas[last]`; fills per-layer weight and bias gradients
/// (including the L1 subgradient on weights).
fn backward_batch(
    net: &Mlp,
    scratch: &mut Scratch,
    b: usize,
    l1_lambda: f64,
    w_grads: &mut [Vec<f64>],
    b_grads: &mut [Vec<f64>],
) {
    let dims = &net.layer_dims;
    for l in (0..net.n_layers()).rev() {
        let (n_in, n_out) = (dims[l], dims[l + 1]);
        let wg = &mut w_grads[l];
        let bg = &mut b_grads[l];
        {
            let delta = &scratch.deltas[l];
            for u in 0..n_out {
                bg[u] = delta[u * b..(u + 1) * b].iter().sum();
            }
            let prev_act = if l == 0 {
                &scratch.input
            } else {
                &scratch.acts[l - 1]
            };
            // dW = delta (n_out x b) * prev_act^T
            gemm_nt(n_out, b, n_in, delta, prev_act, wg);
        }
        if l1_lambda > 0.0 {
            for (g, &w) in wg.iter_mut().zip(&net.weights[l]) {
                *g += l1_lambda * l1_sign(w);
            }
        }
        if l > 0 {
            // delta_{l-1} = (W^T * delta_l) masked by relu'(act_{l-1})
            let (lower, upper) = scratch.deltas.split_at_mut(l);
            let prev_delta = &mut lower[l - 1];
            gemm_tn(n_in, n_out, b, &net.weights[l], &upper[0], prev_delta);
            let act_prev = &scratch.acts[l - 1];
            for (pd, &a) in prev_delta[..n_in * b].iter_mut().zip(&act_prev[..n_in * b]) {
                if a <= 0.0 {
                    *pd = 0.0;
                }
            }
        }
    }
}

/// One Adam accumulator per parameter block.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> AdamState {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// Applies one Adam update in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        let n = params.len();
        assert!(grads.len() == n && self.m.len() == n && self.v.len() == n);
        for i in 0..n {
            let g = grads[i];
            let m = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            self.m[i] = m;
            self.v[i] = v;
            params[i] -= self.lr * (m / b1t) / ((v / b2t).sqrt() + self.epsilon);
        }
    }
}

/// Trains a network by mini-batch Adam on mean binary cross-entropy plus an
/// L1 weight penalty, with freshly shuffled batches every epoch.
/// Deterministic given `seed`. Returns an error if the loss goes non-finite.
pub fn train_adam(
    net: Mlp,
    rows: &Matrix,
    labels: &[u8],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Mlp> {
    let mut rng = crate::rng::stream(seed, &[]);
    train_adam_with_rng(net, rows, labels, cfg, &mut rng)
}

pub(crate) fn train_adam_with_rng(
    mut net: Mlp,
    rows: &Matrix,
    labels: &[u8],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Mlp> {
    cfg.validate()?;
    let n = rows.rows();
    if labels.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: labels.len(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("training rows"));
    }
    let batch = cfg.batch_size.min(n);
    let dims = net.layer_dims.clone();
    if dims[0] != rows.cols() {
        return Err(Error::Dimension {
            expected: dims[0],
            found: rows.cols(),
        });
    }

    let mut scratch = Scratch::new(&dims, batch);
    let n_layers = net.n_layers();
    let mut w_grads: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut b_grads: Vec<Vec<f64>> = net.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut w_adam: Vec<AdamState> = net
        .weights
        .iter()
        .map(|w| AdamState::new(w.len(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon))
        .collect();
    let mut b_adam: Vec<AdamState> = net
        .biases
        .iter()
        .map(|b| AdamState::new(b.len(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    for _epoch in 0..cfg.max_epochs {
        // Fisher-Yates shuffle.
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(batch) {
            let b = chunk.len();
            // Unit-major batch input.
            for (col, inp) in scratch.input.chunks_mut(b).enumerate().take(dims[0]) {
                for (slot, &i) in inp.iter_mut().zip(chunk) {
                    *slot = rows.get(i, col);
                }
            }
            if !forward_batch(&net, &mut scratch, b) {
                return Err(Error::NonFinite("network training diverged"));
            }

            // Output delta: (p - y) / b for the fused sigmoid + cross-entropy.
            {
                let out_pre = &scratch.acts[n_layers - 1][..b];
                let delta = &mut scratch.deltas[n_layers - 1][..b];
                for (k, (&pre, d)) in out_pre.iter().zip(delta.iter_mut()).enumerate() {
                    let p = expit(pre);
                    *d = (p - labels[chunk[k]] as f64) / b as f64;
                }
            }

            backward_batch(
                &net,
                &mut scratch,
                b,
                cfg.l1_lambda,
                &mut w_grads,
                &mut b_grads,
            );
            for l in 0..n_layers {
                w_adam[l].step(&mut net.weights[l], &w_grads[l]);
                b_adam[l].step(&mut net.biases[l], &b_grads[l]);
            }
        }
    }
    Ok(net)
}

/// Full-batch objective (mean cross-entropy plus L1 weight penalty) and its
/// analytic gradient, for gradient verification and diagnostics.
pub fn loss_and_grad(
    net: &Mlp,
    rows: &Matrix,
    labels: &[u8],
    l1_lambda: f64,
) -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = rows.rows();
    let dims = &net.layer_dims;
    let n_layers = net.n_layers();
    let mut scratch = Scratch::new(dims, n);
    for (col, inp) in scratch.input.chunks_mut(n).enumerate().take(dims[0]) {
        for (slot, i) in inp.iter_mut().zip(0..n) {
            *slot = rows.get(i, col);
        }
    }
    forward_batch(net, &mut scratch, n);

    let mut loss = 0.0;
    {
        let out_pre = &scratch.acts[n_layers - 1][..n];
        let delta = &mut scratch.deltas[n_layers - 1][..n];
        for k in 0..n {
            let y = labels[k] as f64;
            let pre = out_pre[k];
            loss += crate::stats::log1pexp(pre) - y * pre;
            delta[k] = (expit(pre) - y) / n as f64;
        }
        loss /= n as f64;
    }
    for w in &net.weights {
        loss += l1_lambda * w.iter().map(|v| v.abs()).sum::<f64>();
    }

    let mut w_grads: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut b_grads: Vec<Vec<f64>> = net.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    backward_batch(net, &mut scratch, n, l1_lambda, &mut w_grads, &mut b_grads);
    (loss, w_grads, b_grads)
}

/// Batch forward pass used by prediction: fills `out` with probabilities
/// for the given feature rows.
pub(crate) fn predict_batch(net: &Mlp, rows: &Matrix, out: &mut Vec<f64>) {
    let n = rows.rows();
    let dims = &net.layer_dims;
    let mut scratch = Scratch::new(dims, n);
    for (col, inp) in scratch.input.chunks_mut(n).enumerate().take(dims[0]) {
        for (slot, i) in inp.iter_mut().zip(0..n) {
            *slot = rows.get(i, col);
        }
    }
    forward_batch(net, &mut scratch, n);
    let pre = &scratch.acts[net.n_layers() - 1][..n];
    out.clear();
    out.extend(pre.iter().map(|&t| expit(t)));
}

/// Mean binary cross-entropy of predictions against labels.
pub fn log_loss(preds: &[f64], labels: &[u8]) -> f64 {
    let mut acc = 0.0;
    for (&p, &y) in preds.iter().zip(labels) {
        let p = p.clamp(1e-12, 1.0 - 1e-12);
        acc -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    acc / preds.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_network_outputs_one_half() {
        let net = Mlp::zeros(&[3, 30, 30, 30, 1]);
        assert_eq!(net.forward(&[0.2, -0.4, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn single_hidden_unit_matches_hand_computation() {
        let mut net = Mlp::zeros(&[2, 1, 1]);
        net.weights[0] = vec![0.5, -0.25];
        net.biases[0] = vec![0.1];
        net.weights[1] = vec![2.0];
        net.biases[1] = vec![-0.3];
        // pre1 = 0.5*1 - 0.25*2 + 0.1 = 0.1; relu -> 0.1
        // pre2 = 2*0.1 - 0.3 = -0.1; expit(-0.1) = 0.475020812521060
        let out = net.forward(&[1.0, 2.0]).unwrap();
        assert!((out - 0.475020812521060).abs() < 1e-12);
    }

    #[test]
    fn first_layer_sign_flip_is_invisible_at_zero_input() {
        let mut rng = rng::stream(5, &[1]);
        let net = Mlp::glorot(&[4, 8, 1], &mut rng);
        let mut flipped = net.clone();
        for w in flipped.weights[0].iter_mut() {
            *w = -*w;
        }
        let x = vec![0.0; 4];
        assert_eq!(net.forward(&x).unwrap(), flipped.forward(&x).unwrap());
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = Mlp::zeros(&[2, 2, 1]);
        assert!(net.forward(&[1.0]).is_err());
        assert!(net.forward(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn adam_first_step_has_learning_rate_magnitude() {
        for &g in &[1e-4, 0.3, 1.0, -3.7] {
            let mut state = AdamState::new(1, 1e-3, 0.9, 0.999, 1e-8);
            let mut p = vec![0.7];
            state.step(&mut p, &[g]);
            let magnitude = (p[0] - 0.7).abs();
            assert!(
                (magnitude / 1e-3 - 1.0).abs() < 0.01,
                "step magnitude {magnitude} for gradient {g}"
            );
            assert_eq!((p[0] - 0.7).signum(), -g.signum());
        }
    }

    fn finite_difference_check(dims: &[usize], seed: u64, n: usize) {
        let mut r = rng::stream(seed, &[2]);
        let mut net = Mlp::glorot(dims, &mut r);
        // keep weights away from the L1 kink at zero
        for w in net.weights.iter_mut().flatten() {
            if w.abs() < 0.05 {
                *w += 0.1 * w.signum().max(0.0) + 0.05;
            }
        }
        let rows = Matrix::from_rows(
            &(0..n)
                .map(|_| (0..dims[0]).map(|_| r.random_range(-1.0..1.0)).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
        let l1 = 1e-4;
        let (_, wg, bg) = loss_and_grad(&net, &rows, &labels, l1);

        let h = 1e-5;
        let mut check = |analytic: f64, perturb: &mut dyn FnMut(&mut Mlp, f64)| {
            let mut plus = net.clone();
            perturb(&mut plus, h);
            let mut minus = net.clone();
            perturb(&mut minus, -h);
            let (lp, _, _) = loss_and_grad(&plus, &rows, &labels, l1);
            let (lm, _, _) = loss_and_grad(&minus, &rows, &labels, l1);
            let fd = (lp - lm) / (2.0 * h);
            let denom = analytic.abs().max(fd.abs()).max(1e-6);
            assert!(
                ((analytic - fd) / denom).abs() < 1e-4,
                "analytic {analytic} vs fd {fd}"
            );
        };
        for l in 0..net.n_layers() {
            for idx in 0..net.weights[l].len() {
                check(wg[l][idx], &mut |m, d| m.weights[l][idx] += d);
            }
            for idx in 0..net.biases[l].len() {
                check(bg[l][idx], &mut |m, d| m.biases[l][idx] += d);
            }
        }
    }

    #[test]
    fn gradients_match_central_differences_small_net() {
        // 5-parameter network: dims [2, 1, 1]
        finite_difference_check(&[2, 1, 1], 3, 8);
    }

    #[test]
    fn gradients_match_central_differences_deeper_net() {
        finite_difference_check(&[3, 4, 2, 1], 9, 12);
    }

    #[test]
    fn separable_data_trains_to_low_log_loss() {
        let mut r = rng::stream(17, &[3]);
        let n = 200;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    vec![r.random_range(0.0..0.4)]
                } else {
                    vec![r.random_range(0.6..1.0)]
                }
            })
            .collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let rows = Matrix::from_rows(&rows).unwrap();
        let cfg = TrainConfig::default();
        let mut init_rng = rng::stream(17, &[4]);
        let net = Mlp::glorot(&[1, 30, 30, 30, 1], &mut init_rng);
        let trained = train_adam(net, &rows, &labels, &cfg, 99).unwrap();
        let preds: Vec<f64> = (0..n).map(|i| trained.forward_unchecked(rows.row(i))).collect();
        let ll = log_loss(&preds, &labels);
        assert!(ll < 0.2, "training log-loss {ll}");
    }

    #[test]
    fn training_is_deterministic_given_seed() {
        let mut r = rng::stream(23, &[5]);
        let rows = Matrix::from_rows(
            &(0..60)
                .map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let labels: Vec<u8> = (0..60).map(|_| r.random_range(0..2u8)).collect();
        let cfg = TrainConfig {
            max_epochs: 5,
            ..TrainConfig::default()
        };
        let mut g1 = rng::stream(1, &[9]);
        let mut g2 = rng::stream(1, &[9]);
        let a = train_adam(Mlp::glorot(&[2, 30, 30, 30, 1], &mut g1), &rows, &labels, &cfg, 7)
            .unwrap();
        let b = train_adam(Mlp::glorot(&[2, 30, 30, 30, 1], &mut g2), &rows, &labels, &cfg, 7)
            .unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
