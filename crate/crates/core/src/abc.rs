//! Kernel ABC: the simulator-parameter posterior as an empirical kernel mean.
//!
//! Given prior draws `theta_j` and pseudo-datasets `Ybar_j` simulated at the
//! observation's own inputs, the posterior embedding is
//! `sum_j w_j k_theta(., theta_j)` with
//! `w = (G_y + m delta I)^{-1} k_y(Y)`, where `G_y` is the Gram matrix of
//! the stacked pseudo-datasets and `k_y(Y)` their similarity to the observed
//! outputs.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::{gram_matrix, kernel_vector, Bandwidth, EmpiricalKernelMean, GramFactorization, KernelSpec};
use crate::rng::{self, tag};
use crate::simulators::{Dataset, Simulator};

pub const DEFAULT_DELTA: f64 = 0.01;

/// Uniform prior over an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorRepr")]
pub struct PriorBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<PriorRepr> for PriorBox {
    type Error = Error;
    fn try_from(r: PriorRepr) -> Result<Self> {
        PriorBox::new(r.lower, r.upper)
    }
}

impl PriorBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::invalid("prior box has no dimensions"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::invalid(format!("prior box coordinate {i}: need lower < upper, got [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[0,5] x [0,2] x [0,10] x [0,2]`, the assembly-line prior.
    pub fn assembly_default() -> Self {
        Self::new(vec![0.0; 4], vec![5.0, 2.0, 10.0, 2.0]).expect("valid box")
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim() && theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(t, (l, u))| l <= t && t <= u)
    }

    /// Coordinate-wise center of the box.
    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        Self::new(self.lower.clone(), self.upper.clone()).map(drop)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbcConfig {
    /// Number of prior draws.
    pub m: usize,
    /// Regularizer; the Gram diagonal receives `m * delta`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Kernel on stacked pseudo-datasets.
    #[serde(default)]
    pub y_kernel: Bandwidth,
    /// Kernel on simulator parameters carried by the returned mean.
    #[serde(default)]
    pub theta_kernel: Bandwidth,
    #[serde(default)]
    pub seed: u64,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

impl AbcConfig {
    pub fn new(m: usize, seed: u64) -> Self {
        Self { m, delta: DEFAULT_DELTA, y_kernel: Bandwidth::MedianAuto, theta_kernel: Bandwidth::MedianAuto, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("kernel ABC needs m >= 1"));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid(format!("delta must be >= 0, got {}", self.delta)));
        }
        Ok(())
    }
}

/// `m` i.i.d. uniform draws from the box.
pub fn sample_prior(prior: &PriorBox, m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    prior.validate()?;
    let mut r = rng::stream(seed, &[tag::PRIOR]);
    Ok((0..m)
        .map(|_| prior.lower.iter().zip(&prior.upper).map(|(&l, &u)| r.random_range(l..u)).collect())
        .collect())
}

/// Posterior kernel mean over `prior_samples` from pseudo-data similarity.
pub fn kernel_abc(
    prior_samples: &[Vec<f64>],
    pseudo_data: &[Vec<f64>],
    observed: &[f64],
    config: &AbcConfig,
) -> Result<EmpiricalKernelMean> {
    Ok(kernel_abc_detailed(prior_samples, pseudo_data, observed, config)?.0)
}

/// As [`kernel_abc`], also returning the resolved pseudo-data kernel.
pub fn kernel_abc_detailed(
    prior_samples: &[Vec<f64>],
    pseudo_data: &[Vec<f64>],
    observed: &[f64],
    config: &AbcConfig,
) -> Result<(EmpiricalKernelMean, KernelSpec)> {
    config.validate()?;
    let m = prior_samples.len();
    if m == 0 {
        return Err(Error::invalid("no prior samples"));
    }
    check_dim(m, pseudo_data.len())?;
    for p in pseudo_data {
        check_dim(observed.len(), p.len())?;
    }
    let y_kernel = config.y_kernel.resolve(pseudo_data)?;
    let theta_kernel = config.theta_kernel.resolve(prior_samples)?;
    let gram = gram_matrix(pseudo_data, &y_kernel);
    let rhs = kernel_vector(pseudo_data, observed, &y_kernel);
    let weights = GramFactorization::new(&gram, m as f64 * config.delta)?.solve(&rhs)?;
    let mean = EmpiricalKernelMean::new(prior_samples.to_vec(), weights, theta_kernel)?;
    Ok((mean, y_kernel))
}

/// Result of calibrating a simulator against one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    #[serde(flatten)]
    pub posterior: EmpiricalKernelMean,
    pub m: usize,
    pub delta: f64,
    /// True when `delta` is the built-in default rather than user supplied.
    #[serde(default)]
    pub delta_is_default: bool,
    pub seed: u64,
    pub simulator_calls: u64,
    pub y_bandwidth: f64,
}

/// Simulates `Ybar_j = (f(X_1; theta_j), ..., f(X_n; theta_j))` for each
/// prior draw. Each draw owns the stream `(seed, j)`.
pub fn simulate_pseudo_data(sim: &dyn Simulator, x: &[Vec<f64>], thetas: &[Vec<f64>], seed: u64) -> Result<Vec<Vec<f64>>> {
    thetas
        .par_iter()
        .enumerate()
        .map(|(j, theta)| {
            let mut r = rng::stream(seed, &[tag::PSEUDO_DATA, j as u64]);
            let mut stacked = Vec::with_capacity(x.len() * sim.y_dim());
            for xi in x {
                let y = sim.simulate(xi, theta, &mut r).map_err(|e| match e {
                    Error::Simulator { .. } => e,
                    other => Error::Simulator { theta: theta.clone(), message: other.to_string() },
                })?;
                stacked.extend(y);
            }
            Ok(stacked)
        })
        .collect()
}

/// Full calibration of `sim` on `dataset`: prior draws, pseudo-data on the
/// dataset's own inputs, then kernel ABC. Costs `m * n` simulator calls.
pub fn run_calibration(sim: &dyn Simulator, dataset: &Dataset, prior: &PriorBox, config: &AbcConfig) -> Result<Calibration> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("cannot calibrate on an empty dataset"));
    }
    check_dim(prior.dim(), sim.theta_dim())?;
    check_dim(sim.x_dim(), dataset.x_dim())?;
    check_dim(sim.y_dim(), dataset.y_dim())?;
    let thetas = sample_prior(prior, config.m, config.seed)?;
    let pseudo = simulate_pseudo_data(sim, dataset.x(), &thetas, config.seed)?;
    let (posterior, y_kernel) = kernel_abc_detailed(&thetas, &pseudo, &dataset.stacked_y(), config)?;
    Ok(Calibration {
        posterior,
        m: config.m,
        delta: config.delta,
        delta_is_default: config.delta == DEFAULT_DELTA,
        seed: config.seed,
        simulator_calls: (config.m * dataset.len()) as u64,
        y_bandwidth: y_kernel.bandwidth(),
    })
}
