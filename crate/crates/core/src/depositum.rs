//! The DEPOSITUM optimizer: proximal gradient tracking with momentum and
//! periodic communication, plus the prox-DSGD baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{self, MetricsRecord};
use crate::problems::{Dataset, Problem};
use crate::regularizers::RegularizerSpec;
use crate::rng::rng_stream;
use crate::topology::{delta_params, is_comm_round, nesterov_omega, MixingMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Momentum {
    #[default]
    Polyak,
    Nesterov,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Depositum,
    /// Momentum driven by raw local gradients, no tracking variable.
    ProxDsgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Communication period `T0`.
    pub period: u64,
    pub batch_size: usize,
    /// Iteration budget `T`.
    pub iterations: u64,
    pub momentum: Momentum,
}

impl HyperParams {
    /// Checks the step conditions against a regularizer.
    pub fn validate(&self, regularizer: &RegularizerSpec) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParams(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidParams(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidParams(format!("gamma must satisfy γ∈[0,1), got {}", self.gamma)));
        }
        if self.period == 0 {
            return Err(Error::InvalidParams("communication period must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParams("batch size must be >= 1".into()));
        }
        regularizer.check_step(self.alpha)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub nu: Vec<f64>,
    /// Auxiliary Nesterov buffer; unused under Polyak momentum.
    pub mu: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub clients: Vec<ClientState>,
    pub t: u64,
}

impl SwarmState {
    pub fn n(&self) -> usize {
        self.clients.len()
    }

    pub fn xs(&self) -> Vec<Vec<f64>> {
        self.clients.iter().map(|c| c.x.clone()).collect()
    }

    pub fn ys(&self) -> Vec<Vec<f64>> {
        self.clients.iter().map(|c| c.y.clone()).collect()
    }

    pub fn gs(&self) -> Vec<Vec<f64>> {
        self.clients.iter().map(|c| c.g.clone()).collect()
    }

    pub fn mean_x(&self) -> Vec<f64> {
        metrics::mean(&self.xs())
    }
}

/// Every client starts at `x0`; all other buffers start at zero.
pub fn init_state(n: usize, d: usize, x0: &[f64]) -> Result<SwarmState> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParams(format!("need n >= 1 and d >= 1, got n = {n}, d = {d}")));
    }
    if x0.len() != d {
        return Err(Error::InvalidParams(format!("initial point has length {}, expected {d}", x0.len())));
    }
    let zero = vec![0.0; d];
    let client = ClientState { x: x0.to_vec(), y: zero.clone(), nu: zero.clone(), mu: zero.clone(), g: zero };
    Ok(SwarmState { clients: vec![client; n], t: 0 })
}

/// One momentum recursion in place, driven by `input`.
pub fn advance_momentum(nu: &mut [f64], mu: &mut [f64], input: &[f64], gamma: f64, option: Momentum) {
    match option {
        Momentum::Polyak => {
            for (v, y) in nu.iter_mut().zip(input) {
                *v = gamma * *v + (1.0 - gamma) * y;
            }
        }
        Momentum::Nesterov => {
            for ((v, m), y) in nu.iter_mut().zip(mu.iter_mut()).zip(input) {
                *m = gamma * *m + (1.0 - gamma) * y;
                *v = gamma * *m + (1.0 - gamma) * y;
            }
        }
        Momentum::None => nu.copy_from_slice(input),
    }
}

/// Advances every client's momentum with its tracking variable and returns
/// the new `nu` values.
pub fn momentum_update(state: &mut SwarmState, gamma: f64, option: Momentum) -> Vec<Vec<f64>> {
    state
        .clients
        .iter_mut()
        .map(|c| {
            advance_momentum(&mut c.nu, &mut c.mu, &c.y, gamma, option);
            c.nu.clone()
        })
        .collect()
}

/// The momentum the next step would produce, without touching the state.
pub fn peek_momentum(state: &SwarmState, gamma: f64, option: Momentum, algorithm: Algorithm) -> Vec<Vec<f64>> {
    state
        .clients
        .iter()
        .map(|c| {
            let mut nu = c.nu.clone();
            let mut mu = c.mu.clone();
            advance_momentum(&mut nu, &mut mu, momentum_input(c, algorithm), gamma, option);
            nu
        })
        .collect()
}

fn momentum_input(c: &ClientState, algorithm: Algorithm) -> &[f64] {
    match algorithm {
        Algorithm::Depositum => &c.y,
        Algorithm::ProxDsgd => &c.g,
    }
}

/// Everything a step needs besides the state.
#[derive(Debug, Clone, Copy)]
pub struct Setup<'a> {
    pub problem: &'a Problem,
    pub mixing: &'a MixingMatrix,
    pub regularizer: &'a RegularizerSpec,
    pub hp: &'a HyperParams,
    pub algorithm: Algorithm,
    pub seed: u64,
}

impl Setup<'_> {
    pub fn check(&self) -> Result<()> {
        self.hp.validate(self.regularizer)?;
        if self.mixing.n() != self.problem.clients() {
            return Err(Error::InvalidParams(format!(
                "mixing matrix is {0}x{0} but the problem has {1} clients",
                self.mixing.n(),
                self.problem.clients()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepLog {
    /// Iteration index the step ran as.
    pub t: u64,
    pub communicated: bool,
}

/// One iteration `t -> t + 1`. The mixing matrix is applied to both the
/// proximal iterate and the tracking update on communication rounds and
/// skipped otherwise.
pub fn step(state: &mut SwarmState, setup: &Setup) -> Result<StepLog> {
    let hp = setup.hp;
    let t = state.t;
    let comm = is_comm_round(t, hp.period);
    let algorithm = setup.algorithm;

    state.clients.par_iter_mut().try_for_each(|c| -> Result<()> {
        let input: &[f64] = match algorithm {
            Algorithm::Depositum => &c.y,
            Algorithm::ProxDsgd => &c.g,
        };
        advance_momentum(&mut c.nu, &mut c.mu, input, hp.gamma, hp.momentum);
        for (x, v) in c.x.iter_mut().zip(&c.nu) {
            *x -= hp.alpha * v;
        }
        setup.regularizer.prox_in_place(hp.alpha, &mut c.x)?;
        Ok(())
    })?;
    if comm {
        let mixed = setup.mixing.mix(&state.xs())?;
        for (c, x) in state.clients.iter_mut().zip(mixed) {
            c.x = x;
        }
    }

    state.clients.par_iter_mut().enumerate().try_for_each(|(i, c)| -> Result<()> {
        let mut rng = rng_stream(setup.seed, i, t);
        let batch = setup.problem.sample_batch(i, hp.batch_size, &mut rng);
        let (_, g_new) = setup.problem.loss_and_grad(&c.x, &batch, i, &mut rng)?;
        if algorithm == Algorithm::Depositum {
            for ((y, gn), go) in c.y.iter_mut().zip(&g_new).zip(&c.g) {
                *y += hp.beta * (gn - go);
            }
        }
        c.g = g_new;
        Ok(())
    })?;
    if comm && algorithm == Algorithm::Depositum {
        let mixed = setup.mixing.mix(&state.ys())?;
        for (c, y) in state.clients.iter_mut().zip(mixed) {
            c.y = y;
        }
    }

    state.t += 1;
    Ok(StepLog { t, communicated: comm })
}

/// The prox-DSGD step: momentum fed by `g`, tracking variable left alone.
pub fn baseline_prox_dsgd_step(state: &mut SwarmState, setup: &Setup) -> Result<StepLog> {
    step(state, &Setup { algorithm: Algorithm::ProxDsgd, ..*setup })
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions<'a> {
    /// Record every `every` iterations; the final iteration is always recorded.
    pub every: u64,
    /// Accuracy is measured here when given, on the training data otherwise.
    pub test_data: Option<&'a Dataset>,
}

impl Default for EvalOptions<'_> {
    fn default() -> Self {
        Self { every: 1, test_data: None }
    }
}

/// Metrics at the current iterate, pairing `x^t` with the momentum `nu^{t+1}`
/// the next step would produce.
pub fn evaluate(state: &SwarmState, setup: &Setup, eval: &EvalOptions) -> Result<MetricsRecord> {
    let hp = setup.hp;
    let problem = setup.problem;
    let xs = state.xs();
    let nus = peek_momentum(state, hp.gamma, hp.momentum, setup.algorithm);
    let nu_bar = metrics::mean(&nus);
    let s = metrics::stationarity_measure(&xs, &nu_bar, hp.alpha, problem.lipschitz(), problem, setup.regularizer)?;
    let x_bar = metrics::mean(&xs);
    let loss = problem.global_loss(&x_bar)? + setup.regularizer.eval(&x_bar);
    let accuracy = problem.accuracy(&x_bar, eval.test_data.unwrap_or(problem.data()))?;
    Ok(MetricsRecord {
        t: state.t,
        loss,
        prox_grad_sq: s.prox_grad_sq,
        cons_x_sq: s.cons_x_sq,
        cons_y_sq: metrics::consensus_sq(&state.ys()),
        cons_nu_sq: metrics::consensus_sq(&nus),
        grad_est_sq: s.grad_est_sq,
        s_over_n: s.s_over_n,
        accuracy: Some(accuracy),
    })
}

/// Runs `hp.iterations` steps from `x0`, recording metrics at iterations
/// `0, every, 2 every, ...` and at the last iteration.
pub fn run(setup: &Setup, x0: &[f64], eval: &EvalOptions) -> Result<Vec<MetricsRecord>> {
    setup.check()?;
    if eval.every == 0 {
        return Err(Error::InvalidParams("evaluation interval must be >= 1".into()));
    }
    let mut state = init_state(setup.problem.clients(), setup.problem.param_dim(), x0)?;
    let total = setup.hp.iterations;
    let mut records = Vec::with_capacity((total / eval.every) as usize + 2);
    records.push(evaluate(&state, setup, eval)?);
    while state.t < total {
        step(&mut state, setup)?;
        if state.t % eval.every == 0 || state.t == total {
            records.push(evaluate(&state, setup, eval)?);
        }
    }
    Ok(records)
}

/// Inputs of the Corollary 1 parameter rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorollaryInputs {
    pub n: usize,
    pub lipschitz: f64,
    pub rho: f64,
    pub period: u64,
    pub iterations: u64,
    pub lambda: f64,
    pub momentum: Momentum,
}

/// Step sizes that give linear speedup in `n`:
/// `alpha = sqrt(n) / (24 L sqrt(T + 1))`, `1 - gamma = sqrt(n) / sqrt(T + 1)`,
/// `B = round(sqrt(n))` and
/// `beta^2 = 3200 d1 d2 / [(1584 d1 + 1077 T0) sqrt(T0 (T + 1)) + 75 T0^2]`,
/// with the denominator scaled by `omega` under Nesterov momentum.
pub fn corollary1_params(input: CorollaryInputs) -> Result<HyperParams> {
    let CorollaryInputs { n, lipschitz, rho, period, iterations, lambda, momentum } = input;
    if n == 0 || period == 0 {
        return Err(Error::InvalidParams("need n >= 1 and T0 >= 1".into()));
    }
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::InvalidParams(format!("L must be > 0, got {lipschitz}")));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParams(format!("rho must be >= 0, got {rho}")));
    }
    let nf = n as f64;
    let t0 = period as f64;
    let budget = iterations as f64 + 1.0;
    let required = (4.0 * nf / 9.0).max(4.0 * nf * rho * rho / (lipschitz * lipschitz)).max(t0);
    if budget < required {
        return Err(Error::BudgetTooSmall { budget, required });
    }
    let root_n = nf.sqrt();
    let root_budget = budget.sqrt();
    let alpha = root_n / (24.0 * lipschitz * root_budget);
    // n may exceed T + 1 within the budget condition; momentum then switches off.
    let gamma = ((root_budget - root_n) / root_budget).max(0.0);
    let batch_size = (root_n.round() as usize).max(1);
    let (d1, d2) = delta_params(lambda, period, alpha * rho)?;
    let scale = match momentum {
        Momentum::Nesterov => nesterov_omega(gamma),
        Momentum::Polyak | Momentum::None => 1.0,
    };
    let denom = scale * ((1584.0 * d1 + 1077.0 * t0) * (t0 * budget).sqrt() + 75.0 * t0 * t0);
    let beta = (3200.0 * d1 * d2 / denom).sqrt();
    Ok(HyperParams { alpha, beta, gamma, period, batch_size, iterations, momentum })
}
