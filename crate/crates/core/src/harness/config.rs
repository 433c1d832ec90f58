//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::depositum::{Algorithm, HyperParams, Momentum};
use crate::problems::ModelKind;
use crate::regularizers::RegularizerSpec;
use crate::topology::{build_mixing, TopologySpec};
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub problem: ProblemConfig,
    pub topology: TopologySpec,
    #[serde(default = "zero_regularizer")]
    pub regularizer: RegularizerSpec,
    pub hyperparams: HyperParamsConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Iteration budget `T`.
    pub iterations: u64,
    #[serde(default = "one")]
    pub eval_every: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speedup: Option<SpeedupConfig>,
}

fn zero_regularizer() -> RegularizerSpec {
    RegularizerSpec::Zero
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn one() -> u64 {
    1
}

fn one_usize() -> usize {
    1
}

fn unit_beta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    #[serde(flatten)]
    pub model: ModelKind,
    pub data: DataSource,
    #[serde(default)]
    pub noise_std: f64,
    /// Std of the Gaussian initial point; zero for linear models and 0.1
    /// for the MLP when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_scale: Option<f64>,
    /// Seed for data generation; the run seed is used when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
}

impl ProblemConfig {
    pub fn init_scale(&self) -> f64 {
        self.init_scale.unwrap_or(match self.model {
            ModelKind::Mlp1 { .. } => 0.1,
            _ => 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    /// Gaussian clusters; binary for logistic models, one blob per class otherwise.
    Synthetic {
        dim: usize,
        samples: usize,
        separation: f64,
        #[serde(default)]
        test_samples: usize,
    },
    Libsvm {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_path: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PartitionConfig {
    #[default]
    Iid,
    Dirichlet { theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HyperParamsConfig {
    Explicit {
        alpha: f64,
        #[serde(default = "unit_beta")]
        beta: f64,
        #[serde(default)]
        gamma: f64,
        #[serde(default = "one", alias = "T0")]
        period: u64,
        #[serde(default = "one_usize")]
        batch_size: usize,
        #[serde(default)]
        momentum: Momentum,
    },
    /// Step sizes, momentum and batch size from the linear-speedup rule.
    Corollary1 {
        #[serde(default = "one", alias = "T0")]
        period: u64,
        #[serde(default)]
        momentum: Momentum,
    },
}

impl HyperParamsConfig {
    pub fn period(&self) -> u64 {
        match *self {
            Self::Explicit { period, .. } | Self::Corollary1 { period, .. } => period,
        }
    }

    pub fn momentum(&self) -> Momentum {
        match *self {
            Self::Explicit { momentum, .. } | Self::Corollary1 { momentum, .. } => momentum,
        }
    }

    pub fn explicit(&self, iterations: u64) -> Option<HyperParams> {
        match *self {
            Self::Explicit { alpha, beta, gamma, period, batch_size, momentum } => {
                Some(HyperParams { alpha, beta, gamma, period, batch_size, iterations, momentum })
            }
            Self::Corollary1 { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "T0", alias = "period")]
    Period,
    #[serde(rename = "topology")]
    Topology,
    /// Values are `[alpha, beta]` pairs.
    #[serde(rename = "alpha_beta")]
    AlphaBeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupConfig {
    pub clients: Vec<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization (sorted keys, no whitespace).
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_value(self).expect("config serializes").to_string();
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn clients(&self) -> usize {
        self.topology.n
    }

    /// Checks every precondition that can be decided without loading data.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config("version", format!("unsupported version {}, expected {CONFIG_VERSION}", self.version)));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every", "must be >= 1"));
        }
        build_mixing(&self.topology).map_err(|e| Error::config("topology", e.to_string()))?;
        self.validate_problem()?;
        if let PartitionConfig::Dirichlet { theta } = self.partition {
            if !(theta.is_finite() && theta > 0.0) {
                return Err(Error::config("partition.theta", format!("must be > 0, got {theta}")));
            }
        }
        self.validate_hyperparams()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::config("sweep.values", "need at least one value"));
            }
        }
        if let Some(speedup) = &self.speedup {
            if speedup.clients.is_empty() || speedup.clients.contains(&0) {
                return Err(Error::config("speedup.clients", "need a non-empty list of positive client counts"));
            }
        }
        Ok(())
    }

    fn validate_problem(&self) -> Result<()> {
        let p = &self.problem;
        match p.model {
            ModelKind::LogisticBinary => {}
            ModelKind::SoftmaxLinear { classes } | ModelKind::Mlp1 { classes, .. } if classes < 2 => {
                return Err(Error::config("problem.classes", "need at least 2 classes"));
            }
            ModelKind::Mlp1 { hidden: 0, .. } => return Err(Error::config("problem.hidden", "must be >= 1")),
            _ => {}
        }
        if !(p.noise_std.is_finite() && p.noise_std >= 0.0) {
            return Err(Error::config("problem.noise_std", format!("must be >= 0, got {}", p.noise_std)));
        }
        let scale = p.init_scale();
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::config("problem.init_scale", format!("must be >= 0, got {scale}")));
        }
        if let DataSource::Synthetic { dim, samples, separation, .. } = p.data {
            if dim == 0 {
                return Err(Error::config("problem.data.dim", "must be >= 1"));
            }
            if samples < self.clients() {
                return Err(Error::config(
                    "problem.data.samples",
                    format!("{samples} samples cannot cover {} clients", self.clients()),
                ));
            }
            if !separation.is_finite() {
                return Err(Error::config("problem.data.separation", "must be finite"));
            }
        }
        Ok(())
    }

    fn validate_hyperparams(&self) -> Result<()> {
        let rho = self.regularizer.weak_modulus();
        match self.hyperparams {
            HyperParamsConfig::Explicit { alpha, beta, gamma, period, batch_size, .. } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    return Err(Error::config("hyperparams.alpha", format!("must be > 0, got {alpha}")));
                }
                if alpha * rho >= 1.0 {
                    return Err(Error::config(
                        "hyperparams.alpha",
                        format!("alpha * rho = {} must be < 1 for the regularizer", alpha * rho),
                    ));
                }
                if !(beta.is_finite() && beta > 0.0) {
                    return Err(Error::config("hyperparams.beta", format!("must be > 0, got {beta}")));
                }
                if !(0.0..1.0).contains(&gamma) {
                    return Err(Error::config("hyperparams.gamma", format!("must satisfy γ∈[0,1), got {gamma}")));
                }
                if period == 0 {
                    return Err(Error::config("hyperparams.period", "communication period must be >= 1"));
                }
                if batch_size == 0 {
                    return Err(Error::config("hyperparams.batch_size", "must be >= 1"));
                }
            }
            HyperParamsConfig::Corollary1 { period, .. } => {
                if period == 0 {
                    return Err(Error::config("hyperparams.period", "communication period must be >= 1"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
        "version": 1,
        "problem": {"model": "logistic_binary", "data": {"source": "synthetic", "dim": 5, "samples": 200, "separation": 1.0}},
        "topology": {"kind": "complete", "n": 4},
        "regularizer": {"kind": "l1", "weight": 0.01},
        "hyperparams": {"mode": "explicit", "alpha": 0.1, "beta": 1.0, "gamma": 0.5, "T0": 2, "batch_size": 8},
        "iterations": 50,
        "eval_every": 10
    }"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.hyperparams.period(), 2);
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.partition, PartitionConfig::Iid);
        assert_eq!(cfg.algorithm, Algorithm::Depositum);
    }

    #[test]
    fn digest_survives_reserialization() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.digest(), again.digest());
        assert_eq!(cfg.digest().len(), 64);
    }

    #[test]
    fn rejects_bad_gamma_with_field() {
        let text = MINIMAL.replace("\"gamma\": 0.5", "\"gamma\": 1.0");
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("γ∈[0,1)") && msg.contains("hyperparams.gamma"), "{msg}");
    }

    #[test]
    fn rejects_precondition_violations() {
        let cases = [
            (MINIMAL.replace(r#"{"kind": "l1", "weight": 0.01}"#, r#"{"kind": "mcp", "lam": 1.0, "theta": 0.05}"#), "hyperparams.alpha"),
            (MINIMAL.replace("\"batch_size\": 8", "\"batch_size\": 0"), "hyperparams.batch_size"),
            (
                MINIMAL.replace(r#"{"kind": "complete", "n": 4}"#, r#"{"kind": "edgelist", "n": 4, "edges": [[0, 1], [2, 3]]}"#),
                "topology",
            ),
            (MINIMAL.replace("\"version\": 1", "\"version\": 2"), "version"),
        ];
        for (text, field) in cases {
            match ExperimentConfig::from_json(&text) {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected config error on {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = ExperimentConfig::from_json("{\n  \"version\": 1,\n  oops\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = ExperimentConfig::from_json(&MINIMAL.replace("\"iterations\"", "\"iteratons\"")).unwrap_err();
        assert!(err.to_string().contains("iteratons"), "{err}");
    }
}
