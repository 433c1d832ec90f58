//! Separable, weakly convex nonsmooth terms and their proximal maps.
//!
//! All proximal maps here use the step-size convention:
//!
//! ```text
//! prox(alpha, x) = argmin_z  h(z) + (1 / (2 * alpha)) * ||z - x||^2
//! ```
//!
//! A penalty written with quadratic coefficient `tau / 2` corresponds to
//! `alpha = 1 / tau`. The minimizer is unique whenever
//! `alpha * weak_modulus < 1`, which every entry point checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegularizerError {
    #[error("invalid regularizer parameter: {0}")]
    InvalidParameter(String),
    #[error("step too large: alpha * rho = {product} must be < 1")]
    StepTooLarge { product: f64 },
    #[error("step size must be positive and finite, got {0}")]
    NonPositiveStep(f64),
}

/// Nonsmooth term `h`. Construct through the checked constructors or serde,
/// both of which validate parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", try_from = "RawRegularizer")]
pub enum RegularizerSpec {
    Zero,
    L1 { weight: f64 },
    Mcp { lam: f64, theta: f64 },
    Scad { lam: f64, a: f64 },
    Box { lo: f64, hi: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum RawRegularizer {
    Zero,
    L1 { weight: f64 },
    Mcp { lam: f64, theta: f64 },
    Scad { lam: f64, a: f64 },
    Box { lo: f64, hi: f64 },
}

impl TryFrom<RawRegularizer> for RegularizerSpec {
    type Error = RegularizerError;

    fn try_from(raw: RawRegularizer) -> Result<Self, Self::Error> {
        match raw {
            RawRegularizer::Zero => Ok(Self::Zero),
            RawRegularizer::L1 { weight } => Self::l1(weight),
            RawRegularizer::Mcp { lam, theta } => Self::mcp(lam, theta),
            RawRegularizer::Scad { lam, a } => Self::scad(lam, a),
            RawRegularizer::Box { lo, hi } => Self::boxed(lo, hi),
        }
    }
}

fn invalid(msg: impl Into<String>) -> RegularizerError {
    RegularizerError::InvalidParameter(msg.into())
}

impl RegularizerSpec {
    pub fn l1(weight: f64) -> Result<Self, RegularizerError> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(invalid(format!("l1 weight must be finite and >= 0, got {weight}")));
        }
        Ok(Self::L1 { weight })
    }

    pub fn mcp(lam: f64, theta: f64) -> Result<Self, RegularizerError> {
        if !(lam.is_finite() && lam > 0.0) {
            return Err(invalid(format!("mcp lam must be > 0, got {lam}")));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(invalid(format!("mcp theta must be > 0, got {theta}")));
        }
        Ok(Self::Mcp { lam, theta })
    }

    pub fn scad(lam: f64, a: f64) -> Result<Self, RegularizerError> {
        if !(lam.is_finite() && lam > 0.0) {
            return Err(invalid(format!("scad lam must be > 0, got {lam}")));
        }
        if !(a.is_finite() && a > 2.0) {
            return Err(invalid(format!("scad a must be > 2, got {a}")));
        }
        Ok(Self::Scad { lam, a })
    }

    /// Indicator of the box `[lo, hi]` applied to every coordinate.
    pub fn boxed(lo: f64, hi: f64) -> Result<Self, RegularizerError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(invalid(format!("box requires lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(Self::Box { lo, hi })
    }

    /// Smallest `rho >= 0` such that `h + (rho / 2) ||.||^2` is convex.
    pub fn weak_modulus(&self) -> f64 {
        match *self {
            Self::Zero | Self::L1 { .. } | Self::Box { .. } => 0.0,
            Self::Mcp { theta, .. } => 1.0 / theta,
            Self::Scad { a, .. } => 1.0 / (a - 1.0),
        }
    }

    /// Checks `alpha > 0` and `alpha * rho < 1`.
    pub fn check_step(&self, alpha: f64) -> Result<(), RegularizerError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(RegularizerError::NonPositiveStep(alpha));
        }
        let product = alpha * self.weak_modulus();
        if product >= 1.0 {
            return Err(RegularizerError::StepTooLarge { product });
        }
        Ok(())
    }

    /// Value of `h` at a single coordinate. Box violations return `f64::INFINITY`.
    pub fn eval_scalar(&self, z: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::L1 { weight } => weight * z.abs(),
            Self::Mcp { lam, theta } => {
                let a = z.abs();
                if a <= theta * lam {
                    lam * a - a * a / (2.0 * theta)
                } else {
                    0.5 * theta * lam * lam
                }
            }
            Self::Scad { lam, a } => {
                let r = z.abs();
                if r <= lam {
                    lam * r
                } else if r <= a * lam {
                    (2.0 * a * lam * r - r * r - lam * lam) / (2.0 * (a - 1.0))
                } else {
                    0.5 * lam * lam * (a + 1.0)
                }
            }
            Self::Box { lo, hi } => {
                if (lo..=hi).contains(&z) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `h(x) = sum_j h(x_j)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().map(|&z| self.eval_scalar(z)).sum()
    }

    /// Closed-form scalar prox. The caller guarantees `alpha * rho < 1`.
    fn prox_scalar_unchecked(&self, alpha: f64, x: f64) -> f64 {
        match *self {
            Self::Zero => x,
            Self::L1 { weight } => soft_threshold(x, alpha * weight),
            Self::Mcp { lam, theta } => {
                // Boundary |x| = theta * lam belongs to the inner branch; both agree there.
                if x.abs() <= theta * lam {
                    soft_threshold(x, alpha * lam) / (1.0 - alpha / theta)
                } else {
                    x
                }
            }
            Self::Scad { lam, a } => {
                let r = x.abs();
                if r <= (1.0 + alpha) * lam {
                    soft_threshold(x, alpha * lam)
                } else if r <= a * lam {
                    ((a - 1.0) * x - x.signum() * a * lam * alpha) / (a - 1.0 - alpha)
                } else {
                    x
                }
            }
            Self::Box { lo, hi } => x.clamp(lo, hi),
        }
    }

    pub fn prox_scalar(&self, alpha: f64, x: f64) -> Result<f64, RegularizerError> {
        self.check_step(alpha)?;
        Ok(self.prox_scalar_unchecked(alpha, x))
    }

    /// Coordinate-wise proximal map with step `alpha`.
    pub fn prox(&self, alpha: f64, x: &[f64]) -> Result<Vec<f64>, RegularizerError> {
        self.check_step(alpha)?;
        Ok(x.iter().map(|&v| self.prox_scalar_unchecked(alpha, v)).collect())
    }

    /// In-place variant of [`prox`](Self::prox).
    pub fn prox_in_place(&self, alpha: f64, x: &mut [f64]) -> Result<(), RegularizerError> {
        self.check_step(alpha)?;
        for v in x.iter_mut() {
            *v = self.prox_scalar_unchecked(alpha, *v);
        }
        Ok(())
    }

    /// `(x - prox(alpha, x - alpha * v)) / alpha`.
    ///
    /// With `v = grad f(x)` this is the proximal gradient; with a momentum
    /// estimate in place of the gradient it is the approximate variant.
    pub fn prox_grad_map(&self, alpha: f64, x: &[f64], v: &[f64]) -> Result<Vec<f64>, RegularizerError> {
        self.check_step(alpha)?;
        if x.len() != v.len() {
            return Err(invalid(format!(
                "prox_grad_map dimension mismatch: x has {}, v has {}",
                x.len(),
                v.len()
            )));
        }
        Ok(x
            .iter()
            .zip(v)
            .map(|(&xi, &vi)| (xi - self.prox_scalar_unchecked(alpha, xi - alpha * vi)) / alpha)
            .collect())
    }
}

#[inline]
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}
