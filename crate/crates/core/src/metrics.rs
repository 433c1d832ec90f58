//! Stationarity diagnostics for a swarm of local models.
//!
//! The measure tracked here combines three pieces, all evaluated with exact
//! (full-shard) gradients:
//!
//! ```text
//! s(x, nu_bar) = ||G(x)||^2 + L^2 ||Jx - x||^2 + n ||mean_i grad f_i(x_i) - nu_bar||^2
//! ```
//!
//! where `G` stacks the per-client proximal gradients and `J` averages
//! across clients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::Problem;
use crate::regularizers::RegularizerSpec;
use crate::Result;

/// Relative change per decade below which a series counts as flat.
pub const PLATEAU_CHANGE_PER_DECADE: f64 = 0.05;
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub t: u64,
    pub loss: f64,
    pub prox_grad_sq: f64,
    pub cons_x_sq: f64,
    pub cons_y_sq: f64,
    pub cons_nu_sq: f64,
    pub grad_est_sq: f64,
    pub s_over_n: f64,
    pub accuracy: Option<f64>,
}

impl MetricsRecord {
    pub const CSV_HEADER: [&'static str; 9] =
        ["t", "loss", "prox_grad_sq", "cons_x_sq", "cons_y_sq", "cons_nu_sq", "grad_est_sq", "s_over_n", "accuracy"];

    pub fn csv_fields(&self) -> [String; 9] {
        [
            self.t.to_string(),
            self.loss.to_string(),
            self.prox_grad_sq.to_string(),
            self.cons_x_sq.to_string(),
            self.cons_y_sq.to_string(),
            self.cons_nu_sq.to_string(),
            self.grad_est_sq.to_string(),
            self.s_over_n.to_string(),
            self.accuracy.map(|a| a.to_string()).unwrap_or_default(),
        ]
    }
}

/// The three terms of the stationarity measure and their normalized sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationarity {
    pub prox_grad_sq: f64,
    pub cons_x_sq: f64,
    pub grad_est_sq: f64,
    pub s_over_n: f64,
}

pub fn mean(stacked: &[Vec<f64>]) -> Vec<f64> {
    let d = stacked.first().map_or(0, Vec::len);
    let mut m = vec![0.0; d];
    for v in stacked {
        for (a, b) in m.iter_mut().zip(v) {
            *a += b;
        }
    }
    let n = stacked.len().max(1) as f64;
    m.iter_mut().for_each(|a| *a /= n);
    m
}

/// `||J v - v||^2 = sum_i ||v_i - mean(v)||^2`.
pub fn consensus_sq(stacked: &[Vec<f64>]) -> f64 {
    let m = mean(stacked);
    stacked
        .iter()
        .map(|v| v.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum()
}

pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Evaluates the stationarity measure at local models `xs` and averaged
/// momentum `nu_bar`.
pub fn stationarity_measure(
    xs: &[Vec<f64>],
    nu_bar: &[f64],
    alpha: f64,
    lipschitz: f64,
    problem: &Problem,
    regularizer: &RegularizerSpec,
) -> Result<Stationarity> {
    let n = xs.len();
    if n != problem.clients() {
        return Err(crate::Error::InvalidParams(format!("{n} models for {} clients", problem.clients())));
    }
    let mut prox_grad_sq = 0.0;
    let mut grad_mean = vec![0.0; nu_bar.len()];
    for (i, x) in xs.iter().enumerate() {
        let grad = problem.full_grad(x, i)?;
        prox_grad_sq += norm_sq(&regularizer.prox_grad_map(alpha, x, &grad)?);
        for (m, g) in grad_mean.iter_mut().zip(&grad) {
            *m += g;
        }
    }
    grad_mean.iter_mut().for_each(|m| *m /= n as f64);
    let cons_x_sq = consensus_sq(xs);
    let grad_est_sq = n as f64 * grad_mean.iter().zip(nu_bar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let s = prox_grad_sq + lipschitz * lipschitz * cons_x_sq + grad_est_sq;
    Ok(Stationarity { prox_grad_sq, cons_x_sq, grad_est_sq, s_over_n: s / n as f64 })
}

/// Running averages `(1 / (k + 1)) sum_{j <= k} v_j` of a series.
pub fn running_average(values: &[f64]) -> Vec<f64> {
    let mut total = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            total += v;
            total / (k + 1) as f64
        })
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {MIN_FIT_POINTS} points with t > 0, got {0}")]
    TooFewPoints(usize),
    #[error("series values must be positive and finite")]
    NonPositive,
    #[error("window fraction must be in (0, 1], got {0}")]
    BadWindow(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    /// Index (into the accepted points) where the flat suffix starts.
    pub plateau_start: usize,
    pub points_used: usize,
}

/// Least-squares slope of `log(value)` against `log(t)`.
///
/// The flat suffix of the series, where every later point differs from the
/// current one by less than 5% per decade of `t`, is excluded. Of the
/// remaining points only those in the last `window` fraction of the
/// `log t` range enter the fit. A fully flat series has slope 0.
pub fn fit_decay_rate(series: &[(f64, f64)], window: f64) -> Result<DecayFit, FitError> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(FitError::BadWindow(window));
    }
    let pts: Vec<(f64, f64)> = series.iter().filter(|(t, _)| *t > 0.0).copied().collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints(pts.len()));
    }
    if pts.iter().any(|&(_, v)| !(v > 0.0 && v.is_finite())) {
        return Err(FitError::NonPositive);
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(t, v)| (t.log10(), v.log10())).collect();
    let thr = (1.0 + PLATEAU_CHANGE_PER_DECADE).log10();
    let flat = |k: usize| {
        logs[k + 1..].iter().all(|&(lt, lv)| {
            let dt = lt - logs[k].0;
            dt <= 0.0 || ((lv - logs[k].1) / dt).abs() < thr
        })
    };
    let mut plateau_start = logs.len() - 1;
    while plateau_start > 0 && flat(plateau_start - 1) {
        plateau_start -= 1;
    }
    // a lone trailing point is not a plateau
    let pre = if plateau_start >= logs.len() - 1 { &logs[..] } else { &logs[..plateau_start] };
    if pre.len() < 3 {
        return Ok(DecayFit { slope: 0.0, plateau_start, points_used: 0 });
    }
    let lo = pre[0].0;
    let hi = pre[pre.len() - 1].0;
    let cut = hi - window * (hi - lo);
    let mut used: Vec<(f64, f64)> = pre.iter().copied().filter(|&(lt, _)| lt >= cut).collect();
    if used.len() < 2 {
        used = pre[pre.len() - 2..].to_vec();
    }
    Ok(DecayFit { slope: least_squares_slope(&used), plateau_start, points_used: used.len() })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
