//! Experiment orchestration: turning a config into runs, traces and CSV files.

mod config;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    DataSource, ExperimentConfig, HyperParamsConfig, PartitionConfig, ProblemConfig, SpeedupConfig, SweepAxis,
    SweepConfig, CONFIG_VERSION,
};

use crate::depositum::{corollary1_params, run, CorollaryInputs, EvalOptions, HyperParams, Setup};
use crate::metrics::MetricsRecord;
use crate::problems::{
    dirichlet_partition, iid_partition, parse_libsvm, synth_logistic, synth_multiclass, Dataset, ModelKind, Partition,
    Problem,
};
use crate::rng::{aux_stream, Purpose};
use crate::topology::{build_mixing, delta_params, GraphKind, MixingMatrix, TopologyError, TopologySpec};
use crate::{Error, Result};

pub const THREADS_ENV: &str = "DEPOSITUM_THREADS";

/// Caps the global thread pool at `DEPOSITUM_THREADS` when set. Results never
/// depend on the thread count.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::config(THREADS_ENV, format!("expected a positive integer, got {raw:?}")))?;
    // a pool may already exist (e.g. in tests); the cap is then best effort
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// The result of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub digest: String,
    pub seed: u64,
    pub duration: Duration,
    pub hyperparams: HyperParams,
    pub records: Vec<MetricsRecord>,
}

impl Trace {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(MetricsRecord::CSV_HEADER).map_err(csv_err)?;
        for r in &self.records {
            w.write_record(r.csv_fields()).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("<memory>", e))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn final_record(&self) -> &MetricsRecord {
        self.records.last().expect("a trace always holds the initial record")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv>", e)
}

/// A config resolved for one seed: data, shards, graph and step sizes.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: Problem,
    pub test: Option<Dataset>,
    pub mixing: MixingMatrix,
    pub hp: HyperParams,
    pub x0: Vec<f64>,
}

fn load_libsvm(path: &Path, dim: Option<usize>) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_libsvm(BufReader::new(file), dim)?)
}

/// Training and optional test data for a seed.
pub fn load_data(cfg: &ProblemConfig, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
    match &cfg.data {
        DataSource::Synthetic { dim, samples, separation, test_samples } => {
            let mut rng = aux_stream(cfg.data_seed.unwrap_or(seed), Purpose::Data);
            let total = samples + test_samples;
            let all = match cfg.model {
                ModelKind::LogisticBinary => synth_logistic(*dim, total, *separation, &mut rng)?,
                ModelKind::SoftmaxLinear { classes } | ModelKind::Mlp1 { classes, .. } => {
                    synth_multiclass(*dim, total, classes, *separation, &mut rng)?
                }
            };
            if *test_samples == 0 {
                return Ok((all, None));
            }
            let train = all.select(&(0..*samples).collect::<Vec<_>>())?;
            let test = all.select(&(*samples..total).collect::<Vec<_>>())?;
            Ok((train, Some(test)))
        }
        DataSource::Libsvm { path, dim, test_path } => {
            let train = load_libsvm(path, *dim)?;
            let test = match test_path {
                Some(p) => Some(load_libsvm(p, Some(dim.unwrap_or(train.dim())))?),
                None => None,
            };
            Ok((train, test))
        }
    }
}

/// Shards for `n` clients under the configured split.
pub fn make_partition(cfg: &ExperimentConfig, data: &Dataset, n: usize, seed: u64) -> Result<Partition> {
    let mut rng = aux_stream(seed, Purpose::Partition);
    Ok(match cfg.partition {
        PartitionConfig::Iid => iid_partition(data.len(), n, &mut rng)?,
        PartitionConfig::Dirichlet { theta } => dirichlet_partition(&data.class_ids(), n, theta, &mut rng)?,
    })
}

/// Resolves `cfg` for one seed, using `topology` in place of the configured graph.
pub fn instantiate_with(cfg: &ExperimentConfig, topology: &TopologySpec, seed: u64) -> Result<Instance> {
    let n = topology.n;
    let (data, test) = load_data(&cfg.problem, seed)?;
    let partition = make_partition(cfg, &data, n, seed)?;
    let problem = Problem::new(cfg.problem.model, Arc::new(data), partition.assignments, cfg.problem.noise_std)?;
    let mixing = if n == 1 && topology.kind == GraphKind::Complete {
        MixingMatrix::single()
    } else {
        build_mixing(topology).map_err(|e| Error::config("topology", e.to_string()))?
    };
    let hp = match cfg.hyperparams.explicit(cfg.iterations) {
        Some(hp) => hp,
        None => corollary1_params(CorollaryInputs {
            n,
            lipschitz: problem.lipschitz(),
            rho: cfg.regularizer.weak_modulus(),
            period: cfg.hyperparams.period(),
            iterations: cfg.iterations,
            lambda: mixing.lambda(),
            momentum: cfg.hyperparams.momentum(),
        })?,
    };
    let d = problem.param_dim();
    let scale = cfg.problem.init_scale();
    let x0 = if scale > 0.0 {
        let mut rng = aux_stream(seed, Purpose::Init);
        let normal = Normal::new(0.0, scale).expect("finite scale");
        (0..d).map(|_| normal.sample(&mut rng)).collect()
    } else {
        vec![0.0; d]
    };
    Ok(Instance { problem, test, mixing, hp, x0 })
}

pub fn instantiate(cfg: &ExperimentConfig, seed: u64) -> Result<Instance> {
    instantiate_with(cfg, &cfg.topology, seed)
}

fn run_instance(cfg: &ExperimentConfig, inst: &Instance, seed: u64) -> Result<Trace> {
    let start = Instant::now();
    let setup = Setup {
        problem: &inst.problem,
        mixing: &inst.mixing,
        regularizer: &cfg.regularizer,
        hp: &inst.hp,
        algorithm: cfg.algorithm,
        seed,
    };
    let eval = EvalOptions { every: cfg.eval_every, test_data: inst.test.as_ref() };
    let records = run(&setup, &inst.x0, &eval)?;
    log::debug!("seed {seed}: {} iterations in {:?}", inst.hp.iterations, start.elapsed());
    Ok(Trace { digest: cfg.digest(), seed, duration: start.elapsed(), hyperparams: inst.hp.clone(), records })
}

/// One trace per configured seed, in seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Trace>> {
    cfg.validate()?;
    cfg.seeds.iter().map(|&seed| run_instance(cfg, &instantiate(cfg, seed)?, seed)).collect()
}

#[derive(Debug, Serialize)]
struct TraceMeta<'a> {
    digest: &'a str,
    seed: u64,
    duration_secs: f64,
    hyperparams: &'a HyperParams,
}

/// Writes `<stem>.csv` and a `<stem>.meta.json` sidecar holding the digest,
/// seed, resolved step sizes and wall-clock time.
pub fn write_trace(trace: &Trace, dir: &Path, stem: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{stem}.csv"));
    std::fs::write(&path, trace.to_csv()?).map_err(|e| Error::io(&path, e))?;
    let meta = TraceMeta {
        digest: &trace.digest,
        seed: trace.seed,
        duration_secs: trace.duration.as_secs_f64(),
        hyperparams: &trace.hyperparams,
    };
    let meta_path = dir.join(format!("{stem}.meta.json"));
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(path)
}

/// Runs every seed and writes `trace_seed<seed>.csv` files.
pub fn cli_run(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    run_experiment(cfg)?.iter().map(|t| write_trace(t, out, &format!("trace_seed{}", t.seed))).collect()
}

/// One sweep value applied to a base config.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub label: String,
    pub config: ExperimentConfig,
}

fn number(v: &serde_json::Value, axis: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::config("sweep.values", format!("{axis} sweep expects numbers, got {v}")))
}

/// Expands the sweep into one validated config per value.
pub fn sweep_cells(cfg: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::config("sweep", "config has no sweep section"))?;
    let mut cells = Vec::with_capacity(sweep.values.len());
    for value in &sweep.values {
        let mut c = cfg.clone();
        c.sweep = None;
        let label;
        if sweep.axis == SweepAxis::Topology {
            let topo: TopologySpec = match value {
                serde_json::Value::String(kind) => {
                    let kind: GraphKind = serde_json::from_value(value.clone())
                        .map_err(|_| Error::config("sweep.values", format!("unknown topology kind {kind:?}")))?;
                    TopologySpec { kind, ..cfg.topology.clone() }
                }
                other => serde_json::from_value(other.clone()).map_err(|e| Error::config("sweep.values", e.to_string()))?,
            };
            if topo.n != cfg.topology.n {
                return Err(Error::config("sweep.values", "topology sweep must keep the client count"));
            }
            label = serde_json::to_value(topo.kind).expect("kind serializes").as_str().unwrap_or("graph").to_string();
            c.topology = topo;
        } else {
            let HyperParamsConfig::Explicit { alpha, beta, gamma, period, .. } = &mut c.hyperparams else {
                return Err(Error::config("sweep.axis", "step-size sweeps need explicit hyperparameters"));
            };
            match sweep.axis {
                SweepAxis::Alpha => *alpha = number(value, "alpha")?,
                SweepAxis::Beta => *beta = number(value, "beta")?,
                SweepAxis::Gamma => *gamma = number(value, "gamma")?,
                SweepAxis::Period => {
                    *period = value
                        .as_u64()
                        .ok_or_else(|| Error::config("sweep.values", format!("T0 sweep expects integers, got {value}")))?
                }
                SweepAxis::AlphaBeta => {
                    let pair = value.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
                        Error::config("sweep.values", format!("alpha_beta sweep expects [alpha, beta] pairs, got {value}"))
                    })?;
                    *alpha = number(&pair[0], "alpha_beta")?;
                    *beta = number(&pair[1], "alpha_beta")?;
                }
                SweepAxis::Topology => unreachable!(),
            }
            label = match value {
                serde_json::Value::Array(a) => a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("_"),
                v => v.to_string(),
            };
        }
        c.validate()?;
        cells.push(SweepCell { label, config: c });
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cell: String,
    pub seed: u64,
    pub trace: Trace,
}

fn axis_name(axis: SweepAxis) -> String {
    serde_json::to_value(axis).expect("axis serializes").as_str().expect("unit variant").to_string()
}

/// Runs every (value, seed) cell in parallel.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepResult>> {
    cfg.validate()?;
    let cells = sweep_cells(cfg)?;
    let jobs: Vec<(&SweepCell, u64)> = cells.iter().flat_map(|c| c.config.seeds.iter().map(move |&s| (c, s))).collect();
    jobs.into_par_iter()
        .map(|(cell, seed)| {
            let trace = run_instance(&cell.config, &instantiate(&cell.config, seed)?, seed)?;
            Ok(SweepResult { cell: cell.label.clone(), seed, trace })
        })
        .collect()
}

/// Time average of `cons_x_sq` over the recorded iterations.
pub fn mean_consensus(records: &[MetricsRecord]) -> f64 {
    records.iter().map(|r| r.cons_x_sq).sum::<f64>() / records.len().max(1) as f64
}

/// Writes one trace per cell and seed plus `summary.csv`.
pub fn cli_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let results = run_sweep(cfg)?;
    let axis = axis_name(cfg.sweep.as_ref().expect("validated sweep").axis);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["axis", "value", "seed", "t", "s_over_n", "loss", "accuracy", "mean_cons_x_sq"]).map_err(csv_err)?;
    for r in &results {
        write_trace(&r.trace, out, &format!("sweep_{axis}_{}_seed{}", r.cell, r.seed))?;
        let last = r.trace.final_record();
        w.write_record([
            axis.clone(),
            r.cell.clone(),
            r.seed.to_string(),
            last.t.to_string(),
            last.s_over_n.to_string(),
            last.loss.to_string(),
            last.accuracy.map(|a| a.to_string()).unwrap_or_default(),
            mean_consensus(&r.trace.records).to_string(),
        ])
        .map_err(csv_err)?;
    }
    let path = out.join("summary.csv");
    write_bytes(&path, w)?;
    Ok(path)
}

fn write_bytes(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w.into_inner().map_err(|e| Error::io(path, e))?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Seed-averaged results for one client count.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub n: usize,
    pub hyperparams: HyperParams,
    pub mean_records: Vec<MetricsRecord>,
    pub traces: Vec<Trace>,
}

impl SpeedupRow {
    pub fn final_loss(&self) -> f64 {
        self.mean_records.last().expect("non-empty").loss
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupSummary {
    pub rows: Vec<SpeedupRow>,
    /// Final mean loss never increases as `n` grows.
    pub non_increasing: bool,
}

fn average_records(traces: &[Trace]) -> Vec<MetricsRecord> {
    let k = traces.len() as f64;
    let mut mean = traces[0].records.clone();
    for (i, m) in mean.iter_mut().enumerate() {
        let col = |f: fn(&MetricsRecord) -> f64| traces.iter().map(|t| f(&t.records[i])).sum::<f64>() / k;
        m.loss = col(|r| r.loss);
        m.prox_grad_sq = col(|r| r.prox_grad_sq);
        m.cons_x_sq = col(|r| r.cons_x_sq);
        m.cons_y_sq = col(|r| r.cons_y_sq);
        m.cons_nu_sq = col(|r| r.cons_nu_sq);
        m.grad_est_sq = col(|r| r.grad_est_sq);
        m.s_over_n = col(|r| r.s_over_n);
        m.accuracy = m.accuracy.map(|_| col(|r| r.accuracy.unwrap_or(0.0)));
    }
    mean
}

/// For each client count: Corollary 1 step sizes, every seed, averaged trajectory.
pub fn run_speedup(cfg: &ExperimentConfig) -> Result<SpeedupSummary> {
    cfg.validate()?;
    let clients = cfg.speedup.as_ref().ok_or_else(|| Error::config("speedup", "config has no speedup section"))?.clients.clone();
    let mut auto = cfg.clone();
    auto.speedup = None;
    auto.hyperparams =
        HyperParamsConfig::Corollary1 { period: cfg.hyperparams.period(), momentum: cfg.hyperparams.momentum() };
    let mut rows = Vec::with_capacity(clients.len());
    for n in clients {
        let mut c = auto.clone();
        c.topology = cfg.topology.with_clients(n);
        c.validate()?;
        let traces: Vec<Trace> = c
            .seeds
            .par_iter()
            .map(|&seed| run_instance(&c, &instantiate(&c, seed)?, seed))
            .collect::<Result<_>>()?;
        let hyperparams = traces[0].hyperparams.clone();
        rows.push(SpeedupRow { n, hyperparams, mean_records: average_records(&traces), traces });
    }
    let non_increasing = rows.windows(2).all(|w| w[1].final_loss() <= w[0].final_loss());
    Ok(SpeedupSummary { rows, non_increasing })
}

/// Writes `speedup_n<n>.csv` mean trajectories and `summary.csv`.
pub fn cli_speedup(cfg: &ExperimentConfig, out: &Path) -> Result<SpeedupSummary> {
    let summary = run_speedup(cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "alpha", "beta", "gamma", "batch_size", "final_loss", "final_s_over_n", "not_above_previous"])
        .map_err(csv_err)?;
    let mut prev = f64::INFINITY;
    for row in &summary.rows {
        let mut tw = csv::Writer::from_writer(Vec::new());
        tw.write_record(MetricsRecord::CSV_HEADER).map_err(csv_err)?;
        for r in &row.mean_records {
            tw.write_record(r.csv_fields()).map_err(csv_err)?;
        }
        write_bytes(&out.join(format!("speedup_n{}.csv", row.n)), tw)?;
        let hp = &row.hyperparams;
        let last = row.mean_records.last().expect("non-empty");
        w.write_record([
            row.n.to_string(),
            hp.alpha.to_string(),
            hp.beta.to_string(),
            hp.gamma.to_string(),
            hp.batch_size.to_string(),
            last.loss.to_string(),
            last.s_over_n.to_string(),
            (last.loss <= prev).to_string(),
        ])
        .map_err(csv_err)?;
        prev = last.loss;
    }
    write_bytes(&out.join("summary.csv"), w)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralReport {
    pub n: usize,
    pub lambda: f64,
    pub period: u64,
    pub alpha_rho: f64,
    /// Largest admissible `alpha * rho` (exclusive) for this graph and period.
    pub alpha_rho_bound: f64,
    /// `(delta1, delta2)`, or `None` when `alpha_rho` is not admissible.
    pub deltas: Option<(f64, f64)>,
}

/// Connectivity constants of a graph for a period and `alpha * rho`.
pub fn spectral(topology: &TopologySpec, period: u64, alpha_rho: f64) -> Result<SpectralReport> {
    let mixing = build_mixing(topology)?;
    let lambda = mixing.lambda();
    let deltas = match delta_params(lambda, period, alpha_rho) {
        Ok(d) => Some(d),
        Err(TopologyError::InadmissibleStep { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let alpha_rho_bound = 1.0 - lambda.powf(1.0 / (2.0 * period as f64));
    Ok(SpectralReport { n: topology.n, lambda, period, alpha_rho, alpha_rho_bound, deltas })
}

/// Per-class share of samples held by each client, for the first seed.
pub fn partition_report(cfg: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let (data, _) = load_data(&cfg.problem, seed)?;
    let partition = make_partition(cfg, &data, cfg.clients(), seed)?;
    Ok(partition.class_proportions(&data.class_ids()))
}
