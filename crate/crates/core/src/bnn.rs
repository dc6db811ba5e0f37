//! Small Bayesian MLP sampled by random-walk Metropolis–Hastings; its
//! posterior samples are embedded as a uniform kernel mean over weight space.
//!
//! Weight layout: layer by layer, each layer's `out x in` weight matrix in
//! row-major order (row = output unit) followed by that layer's bias vector.
//! Hidden layers use ReLU; the output layer is linear.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::{Bandwidth, EmpiricalKernelMean};
use crate::rng::{self, tag};
use crate::simulators::Dataset;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BnnArchitecture {
    /// Layer widths including input and output, e.g. `[1, 3, 3, 1]`.
    pub widths: Vec<usize>,
    /// One flag per weight layer (`widths.len() - 1` entries).
    pub bias: Vec<bool>,
}

impl BnnArchitecture {
    /// Two hidden layers of three units, all with bias.
    pub fn default_for(x_dim: usize, y_dim: usize) -> Self {
        Self { widths: vec![x_dim, 3, 3, y_dim], bias: vec![true; 3] }
    }

    pub fn new(widths: Vec<usize>, bias: Vec<bool>) -> Result<Self> {
        let arch = Self { widths, bias };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 3 {
            return Err(Error::invalid("network needs at least one hidden layer"));
        }
        if self.widths.contains(&0) {
            return Err(Error::invalid("layer widths must be >= 1"));
        }
        check_dim(self.widths.len() - 1, self.bias.len())
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    /// Length of the flattened weight vector.
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).zip(&self.bias).map(|(w, &b)| w[0] * w[1] + if b { w[1] } else { 0 }).sum()
    }
}

/// Feed-forward evaluation of the network with weights `xi` at `x`.
pub fn bnn_forward(arch: &BnnArchitecture, xi: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    arch.validate()?;
    check_dim(arch.param_count(), xi.len())?;
    check_dim(arch.input_dim(), x.len())?;
    Ok(forward_unchecked(arch, xi, x))
}

fn forward_unchecked(arch: &BnnArchitecture, xi: &[f64], x: &[f64]) -> Vec<f64> {
    let layers = arch.widths.len() - 1;
    let mut h = x.to_vec();
    let mut offset = 0;
    for (k, (w, &has_bias)) in arch.widths.windows(2).zip(&arch.bias).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = &xi[offset..offset + fan_in * fan_out];
        offset += fan_in * fan_out;
        let mut z: Vec<f64> = weights.chunks_exact(fan_in).map(|row| row.iter().zip(&h).map(|(a, b)| a * b).sum()).collect();
        if has_bias {
            for (zi, b) in z.iter_mut().zip(&xi[offset..offset + fan_out]) {
                *zi += b;
            }
            offset += fan_out;
        }
        if k + 1 < layers {
            for zi in &mut z {
                *zi = zi.max(0.0);
            }
        }
        h = z;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MhConfig {
    pub steps: usize,
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thin: usize,
    pub proposal_std: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl MhConfig {
    fn validate(&self) -> Result<()> {
        if self.steps <= self.burn_in {
            return Err(Error::invalid(format!("need steps > burn_in, got {} <= {}", self.steps, self.burn_in)));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be >= 1"));
        }
        if !(self.proposal_std > 0.0) || !self.proposal_std.is_finite() {
            return Err(Error::invalid(format!("proposal std must be > 0, got {}", self.proposal_std)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhChain {
    pub samples: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    /// Log density at each kept sample.
    pub log_density: Vec<f64>,
}

/// Random-walk Metropolis–Hastings with isotropic Gaussian proposals.
///
/// Keeps every `thin`-th state after `burn_in` steps. Proposals whose log
/// density is NaN are rejected.
pub fn random_walk_mh(log_density: impl Fn(&[f64]) -> f64, init: Vec<f64>, config: &MhConfig) -> Result<MhChain> {
    config.validate()?;
    let mut r = rng::stream(config.seed, &[tag::MCMC]);
    let mut current = init;
    let mut current_lp = log_density(&current);
    if !current_lp.is_finite() {
        return Err(Error::Numerical(format!("log density at the initial state is {current_lp}")));
    }
    let mut accepted = 0usize;
    let mut samples = Vec::new();
    let mut trace = Vec::new();
    let mut proposal = current.clone();
    for t in 0..config.steps {
        for (p, c) in proposal.iter_mut().zip(&current) {
            let z: f64 = StandardNormal.sample(&mut r);
            *p = c + config.proposal_std * z;
        }
        let lp = log_density(&proposal);
        let u: f64 = r.random();
        if !lp.is_nan() && u.ln() < lp - current_lp {
            std::mem::swap(&mut current, &mut proposal);
            current_lp = lp;
            accepted += 1;
        }
        if t >= config.burn_in && (t - config.burn_in).is_multiple_of(config.thin) {
            samples.push(current.clone());
            trace.push(current_lp);
        }
    }
    Ok(MhChain { samples, acceptance_rate: accepted as f64 / config.steps as f64, log_density: trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnnSamplerConfig {
    #[serde(default = "unit")]
    pub prior_std: f64,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    /// Defaults to `0.05 * prior_std`.
    #[serde(default)]
    pub proposal_std: Option<f64>,
    pub steps: usize,
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thin: usize,
    #[serde(default)]
    pub seed: u64,
}

fn unit() -> f64 {
    1.0
}

fn default_noise() -> f64 {
    0.25
}

impl BnnSamplerConfig {
    pub fn new(steps: usize, burn_in: usize, thin: usize, seed: u64) -> Self {
        Self { prior_std: 1.0, noise_std: default_noise(), proposal_std: None, steps, burn_in, thin, seed }
    }

    pub fn proposal(&self) -> f64 {
        self.proposal_std.unwrap_or(0.05 * self.prior_std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnnPosterior {
    pub arch: BnnArchitecture,
    pub samples: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub seed: u64,
}

impl BnnPosterior {
    /// Average network output over posterior samples.
    pub fn predictive_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.arch.input_dim(), x.len())?;
        let mut out = vec![0.0; self.arch.output_dim()];
        for xi in &self.samples {
            for (o, v) in out.iter_mut().zip(forward_unchecked(&self.arch, xi, x)) {
                *o += v;
            }
        }
        let n = self.samples.len() as f64;
        Ok(out.into_iter().map(|v| v / n).collect())
    }
}

/// Log posterior: Gaussian likelihood with `noise_std`, isotropic Gaussian prior.
pub fn log_posterior(arch: &BnnArchitecture, dataset: &Dataset, prior_std: f64, noise_std: f64, xi: &[f64]) -> f64 {
    let prior = -0.5 * xi.iter().map(|w| w * w).sum::<f64>() / (prior_std * prior_std);
    let sse: f64 = dataset
        .x()
        .iter()
        .zip(dataset.y())
        .map(|(x, y)| forward_unchecked(arch, xi, x).iter().zip(y).map(|(f, t)| (f - t) * (f - t)).sum::<f64>())
        .sum();
    prior - 0.5 * sse / (noise_std * noise_std)
}

/// Posterior samples of the network weights by random-walk MH, started from a
/// prior draw.
pub fn sample_posterior_mh(dataset: &Dataset, arch: &BnnArchitecture, config: &BnnSamplerConfig) -> Result<BnnPosterior> {
    arch.validate()?;
    if !(config.prior_std > 0.0) || !(config.noise_std > 0.0) {
        return Err(Error::invalid("prior and noise standard deviations must be > 0"));
    }
    if !dataset.is_empty() {
        check_dim(arch.input_dim(), dataset.x_dim())?;
        check_dim(arch.output_dim(), dataset.y_dim())?;
    }
    let mut r = rng::stream(config.seed, &[tag::MCMC, 0]);
    let init: Vec<f64> = (0..arch.param_count())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            config.prior_std * z
        })
        .collect();
    let mh = MhConfig {
        steps: config.steps,
        burn_in: config.burn_in,
        thin: config.thin,
        proposal_std: config.proposal(),
        seed: config.seed,
    };
    let chain = random_walk_mh(|xi| log_posterior(arch, dataset, config.prior_std, config.noise_std, xi), init, &mh)?;
    Ok(BnnPosterior { arch: arch.clone(), samples: chain.samples, acceptance_rate: chain.acceptance_rate, seed: config.seed })
}

/// Uniform kernel mean `(1/m) sum_j k_xi(., xi_j)` over posterior samples.
pub fn bnn_embedding(posterior: &BnnPosterior, xi_kernel: Bandwidth) -> Result<EmpiricalKernelMean> {
    if posterior.samples.is_empty() {
        return Err(Error::invalid("posterior has no samples"));
    }
    let kernel = xi_kernel.resolve_lenient(&posterior.samples)?;
    EmpiricalKernelMean::uniform(posterior.samples.clone(), kernel)
}
