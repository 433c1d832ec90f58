//! Smooth local objectives `f_i`, their data and stochastic gradients.

mod dataset;
mod partition;

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use dataset::std_normal;
pub use dataset::{parse_libsvm, serialize_libsvm, synth_logistic, synth_multiclass, Dataset};
pub use partition::{dirichlet_partition, iid_partition, sample_dirichlet, Partition};

/// Smallest smoothness estimate ever reported.
pub const L_FLOOR: f64 = 1e-8;
const POWER_ITERS: usize = 30;
const POWER_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("index not strictly increasing at line {line}, column {column}")]
    NonMonotoneIndex { line: usize, column: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelKind {
    /// `f(x) = mean log(1 + exp(-b a^T x))` with labels `b` in `{-1, +1}`.
    LogisticBinary,
    /// Multinomial logistic regression with per-class bias.
    SoftmaxLinear { classes: usize },
    /// One tanh hidden layer followed by a softmax output layer.
    Mlp1 { hidden: usize, classes: usize },
}

impl ModelKind {
    pub fn param_dim(&self, features: usize) -> usize {
        match *self {
            Self::LogisticBinary => features,
            Self::SoftmaxLinear { classes } => classes * (features + 1),
            Self::Mlp1 { hidden, classes } => hidden * (features + 1) + classes * (hidden + 1),
        }
    }
}

/// Per-sample training target.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Sign(f64),
    Class(usize),
}

/// A decentralized learning problem: one model family, a shared dataset and
/// per-client shards of it.
#[derive(Debug, Clone)]
pub struct Problem {
    kind: ModelKind,
    data: Arc<Dataset>,
    targets: Vec<Target>,
    shards: Vec<Vec<usize>>,
    noise_std: f64,
    lipschitz: f64,
}

impl Problem {
    /// Builds the problem and estimates its smoothness constant.
    pub fn new(kind: ModelKind, data: Arc<Dataset>, shards: Vec<Vec<usize>>, noise_std: f64) -> Result<Self, DataError> {
        if shards.is_empty() {
            return Err(DataError::Invalid("problem needs at least one client".into()));
        }
        for (i, shard) in shards.iter().enumerate() {
            if shard.is_empty() {
                return Err(DataError::Invalid(format!("client {i} has an empty shard")));
            }
            if let Some(&bad) = shard.iter().find(|&&r| r >= data.len()) {
                return Err(DataError::IndexOutOfRange { index: bad, len: data.len() });
            }
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(DataError::Invalid(format!("noise std must be >= 0, got {noise_std}")));
        }
        let targets = build_targets(kind, &data)?;
        let mut problem = Self { kind, data, targets, shards, noise_std, lipschitz: 1.0 };
        problem.lipschitz = problem.estimate_l();
        Ok(problem)
    }

    /// Pools the whole dataset into a single client.
    pub fn pooled(kind: ModelKind, data: Arc<Dataset>) -> Result<Self, DataError> {
        let all = (0..data.len()).collect();
        Self::new(kind, data, vec![all], 0.0)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn clients(&self) -> usize {
        self.shards.len()
    }

    pub fn shard(&self, client: usize) -> &[usize] {
        &self.shards[client]
    }

    pub fn shard_len(&self, client: usize) -> usize {
        self.shards[client].len()
    }

    pub fn param_dim(&self) -> usize {
        self.kind.param_dim(self.data.dim())
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Smoothness estimate computed at construction.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Uniform sample without replacement of `min(batch, shard size)` positions in the shard.
    pub fn sample_batch<R: Rng + ?Sized>(&self, client: usize, batch: usize, rng: &mut R) -> Vec<usize> {
        let len = self.shard_len(client);
        let amount = batch.clamp(1, len);
        if amount == len {
            return (0..len).collect();
        }
        index::sample(rng, len, amount).into_vec()
    }

    /// Mean loss and gradient over `batch` (positions in the client's shard),
    /// plus `N(0, noise_std^2)` per coordinate when noise is configured.
    pub fn loss_and_grad<R: Rng + ?Sized>(
        &self,
        params: &[f64],
        batch: &[usize],
        client: usize,
        rng: &mut R,
    ) -> Result<(f64, Vec<f64>), DataError> {
        let (loss, mut grad) = self.batch_loss_and_grad(params, batch, client)?;
        if self.noise_std > 0.0 {
            let normal = Normal::new(0.0, self.noise_std).expect("finite std");
            grad.iter_mut().for_each(|g| *g += normal.sample(rng));
        }
        Ok((loss, grad))
    }

    /// Noise-free mean loss and gradient over `batch`.
    pub fn batch_loss_and_grad(&self, params: &[f64], batch: &[usize], client: usize) -> Result<(f64, Vec<f64>), DataError> {
        self.check_params(params)?;
        let shard = self.shards.get(client).ok_or(DataError::IndexOutOfRange { index: client, len: self.shards.len() })?;
        if batch.is_empty() {
            return Err(DataError::Invalid("empty batch".into()));
        }
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        let mut scratch = Scratch::new(self.kind);
        for &pos in batch {
            let row = *shard.get(pos).ok_or(DataError::IndexOutOfRange { index: pos, len: shard.len() })?;
            loss += self.sample_loss_grad(params, row, &mut grad, &mut scratch);
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((loss * scale, grad))
    }

    /// Exact gradient of `f_i` over the client's whole shard.
    pub fn full_grad(&self, params: &[f64], client: usize) -> Result<Vec<f64>, DataError> {
        let all: Vec<usize> = (0..self.shard_len(client)).collect();
        Ok(self.batch_loss_and_grad(params, &all, client)?.1)
    }

    /// `f_i(params)` over the client's whole shard.
    pub fn full_loss(&self, params: &[f64], client: usize) -> Result<f64, DataError> {
        self.check_params(params)?;
        let mut scratch = Scratch::new(self.kind);
        let shard = &self.shards[client];
        let total: f64 = shard.iter().map(|&row| self.sample_loss(params, row, &mut scratch)).sum();
        Ok(total / shard.len() as f64)
    }

    /// `(1 / n) sum_i f_i(params)`.
    pub fn global_loss(&self, params: &[f64]) -> Result<f64, DataError> {
        let mut total = 0.0;
        for c in 0..self.clients() {
            total += self.full_loss(params, c)?;
        }
        Ok(total / self.clients() as f64)
    }

    /// Classification accuracy of `params` on `data`, which must share the
    /// label set of the training data.
    pub fn accuracy(&self, params: &[f64], data: &Dataset) -> Result<f64, DataError> {
        self.check_params(params)?;
        if data.dim() > self.data.dim() {
            return Err(DataError::Invalid(format!(
                "evaluation data has dimension {} > model dimension {}",
                data.dim(),
                self.data.dim()
            )));
        }
        let targets = build_targets(self.kind, data)?;
        let mut scratch = Scratch::new(self.kind);
        let correct = (0..data.len())
            .filter(|&r| {
                let logits = self.forward(params, data, r, &mut scratch);
                match targets[r] {
                    Target::Sign(b) => logits[0] * b > 0.0,
                    Target::Class(y) => argmax(logits) == y,
                }
            })
            .count();
        Ok(correct as f64 / data.len() as f64)
    }

    fn check_params(&self, params: &[f64]) -> Result<(), DataError> {
        if params.len() != self.param_dim() {
            return Err(DataError::Invalid(format!(
                "parameter vector has length {}, model expects {}",
                params.len(),
                self.param_dim()
            )));
        }
        Ok(())
    }

    /// Output scores for one row: the margin for logistic, logits otherwise.
    fn forward<'s>(&self, params: &[f64], data: &Dataset, row: usize, s: &'s mut Scratch) -> &'s [f64] {
        let d = self.data.dim();
        match self.kind {
            ModelKind::LogisticBinary => {
                s.logits[0] = data.row_dot(row, params);
            }
            ModelKind::SoftmaxLinear { classes } => {
                let bias = &params[classes * d..];
                for c in 0..classes {
                    s.logits[c] = data.row_dot(row, &params[c * d..(c + 1) * d]) + bias[c];
                }
            }
            ModelKind::Mlp1 { hidden, classes } => {
                let mlp = MlpLayout::new(d, hidden, classes);
                for h in 0..hidden {
                    let pre = data.row_dot(row, &params[mlp.w1(h)]) + params[mlp.b1 + h];
                    s.hidden[h] = pre.tanh();
                }
                for c in 0..classes {
                    let w = &params[mlp.w2(c)];
                    s.logits[c] = w.iter().zip(&s.hidden).map(|(a, b)| a * b).sum::<f64>() + params[mlp.b2 + c];
                }
            }
        }
        &s.logits
    }

    fn sample_loss(&self, params: &[f64], row: usize, s: &mut Scratch) -> f64 {
        let target = self.targets[row];
        let logits = self.forward(params, &self.data, row, s);
        match target {
            Target::Sign(b) => softplus(-b * logits[0]),
            Target::Class(y) => log_sum_exp(logits) - logits[y],
        }
    }

    /// Adds the gradient of one sample's loss into `grad` and returns the loss.
    fn sample_loss_grad(&self, params: &[f64], row: usize, grad: &mut [f64], s: &mut Scratch) -> f64 {
        let d = self.data.dim();
        let target = self.targets[row];
        self.forward(params, &self.data, row, s);
        match (self.kind, target) {
            (ModelKind::LogisticBinary, Target::Sign(b)) => {
                let margin = b * s.logits[0];
                // d/dm log(1 + e^{-m}) = -sigmoid(-m)
                self.data.row_axpy(row, -b * sigmoid(-margin), grad);
                softplus(-margin)
            }
            (ModelKind::SoftmaxLinear { classes }, Target::Class(y)) => {
                let loss = softmax_residual(&mut s.logits, y);
                for c in 0..classes {
                    let r = s.logits[c];
                    self.data.row_axpy(row, r, &mut grad[c * d..(c + 1) * d]);
                    grad[classes * d + c] += r;
                }
                loss
            }
            (ModelKind::Mlp1 { hidden, classes }, Target::Class(y)) => {
                let mlp = MlpLayout::new(d, hidden, classes);
                let loss = softmax_residual(&mut s.logits, y);
                s.back.iter_mut().for_each(|v| *v = 0.0);
                for c in 0..classes {
                    let r = s.logits[c];
                    let w2 = mlp.w2(c);
                    for h in 0..hidden {
                        grad[w2.start + h] += r * s.hidden[h];
                        s.back[h] += r * params[w2.start + h];
                    }
                    grad[mlp.b2 + c] += r;
                }
                for h in 0..hidden {
                    let delta = s.back[h] * (1.0 - s.hidden[h] * s.hidden[h]);
                    self.data.row_axpy(row, delta, &mut grad[mlp.w1(h)]);
                    grad[mlp.b1 + h] += delta;
                }
                loss
            }
            _ => unreachable!("targets are built to match the model kind"),
        }
    }

    /// Smoothness constant `L` of the local losses, maximized over clients.
    ///
    /// Linear models use the curvature bound of the loss (`1/4` for the
    /// logistic link, `1/2` for softmax) times `lambda_max(A^T A) / N_i`,
    /// with the top eigenvalue from power iteration. The MLP uses an
    /// empirical gradient-difference ratio over random parameter pairs,
    /// doubled for safety.
    pub fn estimate_l(&self) -> f64 {
        let estimate = match self.kind {
            ModelKind::LogisticBinary => (0..self.clients())
                .map(|c| gram_top_eigenvalue(&self.data, &self.shards[c], false) / (4.0 * self.shard_len(c) as f64))
                .fold(0.0, f64::max),
            ModelKind::SoftmaxLinear { .. } => (0..self.clients())
                .map(|c| gram_top_eigenvalue(&self.data, &self.shards[c], true) / (2.0 * self.shard_len(c) as f64))
                .fold(0.0, f64::max),
            ModelKind::Mlp1 { .. } => 2.0 * self.empirical_lipschitz(8, 0x5eed),
        };
        if estimate.is_finite() && estimate > L_FLOOR {
            estimate
        } else {
            L_FLOOR
        }
    }

    fn empirical_lipschitz(&self, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.param_dim();
        let mut best: f64 = 0.0;
        for c in 0..self.clients() {
            for _ in 0..pairs {
                let u: Vec<f64> = (0..dim).map(|_| 0.5 * std_normal(&mut rng)).collect::<Vec<f64>>();
                let v: Vec<f64> = u.iter().map(|&x| x + 0.1 * std_normal(&mut rng)).collect();
                let gu = self.full_grad(&u, c).expect("valid parameters");
                let gv = self.full_grad(&v, c).expect("valid parameters");
                let num = norm_diff(&gu, &gv);
                let den = norm_diff(&u, &v);
                if den > 0.0 {
                    best = best.max(num / den);
                }
            }
        }
        best
    }
}

fn build_targets(kind: ModelKind, data: &Dataset) -> Result<Vec<Target>, DataError> {
    match kind {
        ModelKind::LogisticBinary => {
            let classes = data.classes();
            let signed = classes.iter().all(|&c| c == 1.0 || c == -1.0);
            if signed {
                return Ok(data.labels().iter().map(|&l| Target::Sign(l)).collect());
            }
            if classes.len() != 2 {
                return Err(DataError::Invalid(format!(
                    "binary logistic model needs two classes, found {}",
                    classes.len()
                )));
            }
            // lower label -> -1, higher label -> +1
            Ok(data
                .labels()
                .iter()
                .map(|&l| Target::Sign(if l == classes[1] { 1.0 } else { -1.0 }))
                .collect())
        }
        ModelKind::SoftmaxLinear { classes } | ModelKind::Mlp1 { classes, .. } => {
            let ids = data.class_ids();
            let found = data.classes().len();
            if found > classes {
                return Err(DataError::Invalid(format!("data has {found} classes, model has {classes}")));
            }
            Ok(ids.into_iter().map(Target::Class).collect())
        }
    }
}

/// Parameter offsets of the one-hidden-layer network:
/// `[W1 (hidden x d) | b1 (hidden) | W2 (classes x hidden) | b2 (classes)]`.
struct MlpLayout {
    d: usize,
    hidden: usize,
    b1: usize,
    w2_start: usize,
    b2: usize,
}

impl MlpLayout {
    fn new(d: usize, hidden: usize, classes: usize) -> Self {
        let b1 = hidden * d;
        let w2_start = b1 + hidden;
        let b2 = w2_start + classes * hidden;
        Self { d, hidden, b1, w2_start, b2 }
    }

    fn w1(&self, h: usize) -> std::ops::Range<usize> {
        h * self.d..(h + 1) * self.d
    }

    fn w2(&self, c: usize) -> std::ops::Range<usize> {
        self.w2_start + c * self.hidden..self.w2_start + (c + 1) * self.hidden
    }
}

struct Scratch {
    logits: Vec<f64>,
    hidden: Vec<f64>,
    back: Vec<f64>,
}

impl Scratch {
    fn new(kind: ModelKind) -> Self {
        let (classes, hidden) = match kind {
            ModelKind::LogisticBinary => (1, 0),
            ModelKind::SoftmaxLinear { classes } => (classes, 0),
            ModelKind::Mlp1 { hidden, classes } => (classes, hidden),
        };
        Self { logits: vec![0.0; classes], hidden: vec![0.0; hidden], back: vec![0.0; hidden] }
    }
}

/// Top eigenvalue of `A_S^T A_S` for the rows `S`, optionally with a constant
/// column appended, by power iteration.
fn gram_top_eigenvalue(data: &Dataset, rows: &[usize], with_bias: bool) -> f64 {
    let d = data.dim() + usize::from(with_bias);
    if d == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..d).map(|j| 1.0 + 0.1 * (j % 7) as f64).collect();
    normalize(&mut v);
    let mut estimate = 0.0;
    let mut av = vec![0.0; rows.len()];
    for _ in 0..POWER_ITERS {
        for (k, &r) in rows.iter().enumerate() {
            av[k] = data.row_dot(r, &v[..data.dim()]) + if with_bias { v[d - 1] } else { 0.0 };
        }
        let mut next = vec![0.0; d];
        for (k, &r) in rows.iter().enumerate() {
            data.row_axpy(r, av[k], &mut next[..data.dim()]);
            if with_bias {
                next[d - 1] += av[k];
            }
        }
        let norm = normalize(&mut next);
        let converged = (norm - estimate).abs() <= POWER_TOL * norm.max(1.0);
        estimate = norm;
        v = next;
        if norm == 0.0 || converged {
            break;
        }
    }
    estimate
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Replaces logits by `softmax - onehot(y)` and returns the cross-entropy.
fn softmax_residual(logits: &mut [f64], y: usize) -> f64 {
    let lse = log_sum_exp(logits);
    let loss = lse - logits[y];
    for (c, v) in logits.iter_mut().enumerate() {
        *v = (*v - lse).exp() - if c == y { 1.0 } else { 0.0 };
    }
    loss
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_logistic() -> Problem {
        let data = Dataset::from_dense_rows(
            &[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, -3.0], vec![2.0, 1.0]],
            vec![1.0, -1.0, 1.0, -1.0],
        )
        .unwrap();
        Problem::new(ModelKind::LogisticBinary, Arc::new(data), vec![vec![0, 1], vec![2, 3]], 0.0).unwrap()
    }

    #[test]
    fn logistic_at_zero() {
        let p = tiny_logistic();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (loss, grad) = p.loss_and_grad(&[0.0, 0.0], &[0, 1], 0, &mut rng).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        // -mean(b a) / 2 over rows 0 and 1
        let expected = [-(1.0 * 1.0 + -1.0 * -1.0) / 4.0, -(1.0 * 2.0 + -1.0 * 0.5) / 4.0];
        assert!((grad[0] - expected[0]).abs() < 1e-15 && (grad[1] - expected[1]).abs() < 1e-15);
        assert_eq!(p.full_grad(&[0.0, 0.0], 0).unwrap(), grad);
    }

    #[test]
    fn full_batch_equals_full_grad() {
        let p = tiny_logistic();
        let x = [0.3, -0.7];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, g) = p.loss_and_grad(&x, &[0, 1], 1, &mut rng).unwrap();
        assert_eq!(g, p.full_grad(&x, 1).unwrap());
    }

    #[test]
    fn singleton_shard_is_per_sample_gradient() {
        let data = Dataset::from_dense_rows(&[vec![2.0, -1.0]], vec![-1.0]).unwrap();
        let p = Problem::pooled(ModelKind::LogisticBinary, Arc::new(data)).unwrap();
        let x = [0.1, 0.4];
        let m: f64 = -(2.0 * 0.1 - 0.4);
        let s = 1.0 / (1.0 + m.exp());
        let expected = [s * 2.0, s * -1.0];
        let g = p.full_grad(&x, 0).unwrap();
        assert!((g[0] - expected[0]).abs() < 1e-15 && (g[1] - expected[1]).abs() < 1e-15);
    }

    #[test]
    fn client_mean_matches_pooled_gradient() {
        let p = tiny_logistic();
        let pooled = Problem::pooled(ModelKind::LogisticBinary, Arc::new(p.data().clone())).unwrap();
        let x = [0.2, 0.9];
        let g0 = p.full_grad(&x, 0).unwrap();
        let g1 = p.full_grad(&x, 1).unwrap();
        let g = pooled.full_grad(&x, 0).unwrap();
        for k in 0..2 {
            assert!(((g0[k] + g1[k]) / 2.0 - g[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_batch_index() {
        let p = tiny_logistic();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = p.loss_and_grad(&[0.0, 0.0], &[0, 2], 0, &mut rng).unwrap_err();
        assert_eq!(err, DataError::IndexOutOfRange { index: 2, len: 2 });
        assert!(p.loss_and_grad(&[0.0], &[0], 0, &mut rng).is_err());
    }

    #[test]
    fn smoothness_estimates() {
        let one = Dataset::from_dense_rows(&[vec![2.0]], vec![1.0]).unwrap();
        let p = Problem::pooled(ModelKind::LogisticBinary, Arc::new(one)).unwrap();
        assert!((p.lipschitz() - 1.0).abs() < 1e-12);

        let zeros = Dataset::from_dense_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, -1.0]).unwrap();
        let p = Problem::pooled(ModelKind::LogisticBinary, Arc::new(zeros)).unwrap();
        assert_eq!(p.lipschitz(), L_FLOOR);

        let data = synth_logistic(6, 200, 1.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let base = Problem::pooled(ModelKind::LogisticBinary, Arc::new(data.clone())).unwrap();
        let doubled = Problem::pooled(ModelKind::LogisticBinary, Arc::new(data.scaled(2.0))).unwrap();
        assert!((doubled.lipschitz() / base.lipschitz() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn noise_is_added_when_configured() {
        let p = tiny_logistic();
        let noisy = Problem::new(p.kind(), Arc::new(p.data().clone()), vec![vec![0, 1, 2, 3]], 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, g) = noisy.loss_and_grad(&[0.0, 0.0], &[0, 1, 2, 3], 0, &mut rng).unwrap();
        assert_ne!(g, noisy.full_grad(&[0.0, 0.0], 0).unwrap());
    }

    #[test]
    fn batch_is_clamped_to_shard() {
        let p = tiny_logistic();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(p.sample_batch(0, 10, &mut rng), vec![0, 1]);
        let b = p.sample_batch(1, 1, &mut rng);
        assert_eq!(b.len(), 1);
        assert!(b[0] < 2);
    }

    #[test]
    fn accuracy_of_separating_direction() {
        let data = synth_logistic(3, 500, 6.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let p = Problem::pooled(ModelKind::LogisticBinary, Arc::new(data.clone())).unwrap();
        assert_eq!(p.accuracy(&[0.0, 0.0, 0.0], &data).unwrap(), 0.0);
        let mc = synth_multiclass(3, 300, 3, 8.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let sp = Problem::pooled(ModelKind::SoftmaxLinear { classes: 3 }, Arc::new(mc.clone())).unwrap();
        let acc = sp.accuracy(&vec![0.0; sp.param_dim()], &mc).unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }

    #[test]
    fn class_count_checked() {
        let data = synth_multiclass(3, 60, 4, 2.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(Problem::pooled(ModelKind::SoftmaxLinear { classes: 2 }, Arc::new(data.clone())).is_err());
        assert!(Problem::pooled(ModelKind::LogisticBinary, Arc::new(data)).is_err());
    }
}
