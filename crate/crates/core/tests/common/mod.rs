#![allow(dead_code)]

use std::sync::Arc;

use depositum::depositum::{HyperParams, Momentum};
use depositum::problems::{iid_partition, synth_logistic, Dataset, ModelKind, Problem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn logistic_data(dim: usize, samples: usize, seed: u64) -> Dataset {
    synth_logistic(dim, samples, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// IID logistic problem with `n` clients.
pub fn logistic_problem(n: usize, dim: usize, samples: usize, seed: u64, noise_std: f64) -> Problem {
    let data = logistic_data(dim, samples, seed);
    let shards = iid_partition(data.len(), n, &mut ChaCha8Rng::seed_from_u64(seed + 1000)).unwrap();
    Problem::new(ModelKind::LogisticBinary, Arc::new(data), shards.assignments, noise_std).unwrap()
}

pub fn dense_row(data: &Dataset, i: usize) -> Vec<f64> {
    let mut row = vec![0.0; data.dim()];
    for (j, v) in data.row(i) {
        row[j] = v;
    }
    row
}

/// `(1 / n) sum_i mean_{k in shard i} grad log(1 + exp(-b_k a_k^T x))`, written out directly.
pub fn logistic_grad_oracle(problem: &Problem, x: &[f64]) -> Vec<f64> {
    let data = problem.data();
    let n = problem.clients();
    let mut out = vec![0.0; x.len()];
    for c in 0..n {
        let shard = problem.shard(c);
        for &r in shard {
            let a = dense_row(data, r);
            let b = data.label(r);
            let m: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>() * b;
            let coef = -b / (1.0 + m.exp()) / (shard.len() as f64 * n as f64);
            for (o, ai) in out.iter_mut().zip(&a) {
                *o += coef * ai;
            }
        }
    }
    out
}

pub fn hyper(alpha: f64, beta: f64, gamma: f64, period: u64, batch_size: usize, iterations: u64, momentum: Momentum) -> HyperParams {
    HyperParams { alpha, beta, gamma, period, batch_size, iterations, momentum }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
