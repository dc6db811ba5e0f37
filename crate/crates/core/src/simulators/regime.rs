use serde::{Deserialize, Serialize};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, DatasetMeta, Simulator};
use crate::error::{check_dim, Error, Result};
use crate::rng::{self, tag};

/// Smooth switch of the true simulator parameters across the input range,
/// plus the per-dataset input law `N(chi_l, input_std)` with
/// `chi_l ~ U[chi_low, chi_high]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeShiftConfig {
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
    pub switch_point: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    pub chi_low: f64,
    pub chi_high: f64,
    pub input_std: f64,
    pub n: usize,
    #[serde(default)]
    pub output_noise_std: f64,
}

fn default_scale() -> f64 {
    5.0
}

impl RegimeShiftConfig {
    /// The simple production setting: `theta0 = (2, 0.5, 5, 1)` below 110
    /// products, `theta1 = (3.5, 0.5, 7, 1)` above, inputs `N(chi, 5)` with
    /// `chi ~ U[70, 130]`, 50 points per dataset.
    pub fn assembly_default() -> Self {
        Self {
            theta0: vec![2.0, 0.5, 5.0, 1.0],
            theta1: vec![3.5, 0.5, 7.0, 1.0],
            switch_point: 110.0,
            scale: 5.0,
            chi_low: 70.0,
            chi_high: 130.0,
            input_std: 5.0,
            n: 50,
            output_noise_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.theta0.len(), self.theta1.len())?;
        if self.theta0.is_empty() {
            return Err(Error::invalid("regime parameters are empty"));
        }
        if !(self.scale > 0.0) {
            return Err(Error::invalid(format!("sigmoid scale must be > 0, got {}", self.scale)));
        }
        if !(self.chi_low < self.chi_high) {
            return Err(Error::invalid(format!("need chi_low < chi_high, got [{}, {}]", self.chi_low, self.chi_high)));
        }
        if !(self.input_std >= 0.0) || !(self.output_noise_std >= 0.0) {
            return Err(Error::invalid("standard deviations must be >= 0"));
        }
        if self.n == 0 {
            return Err(Error::invalid("datasets need n >= 1"));
        }
        let all = self.theta0.iter().chain(&self.theta1).chain([&self.switch_point, &self.chi_low, &self.chi_high]);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("regime parameters must be finite"));
        }
        Ok(())
    }
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// `theta(x) = theta0 + (theta1 - theta0) * sigmoid((x - x0) / s)`.
pub fn theta_at(x: f64, config: &RegimeShiftConfig) -> Vec<f64> {
    let s = sigmoid((x - config.switch_point) / config.scale);
    config.theta0.iter().zip(&config.theta1).map(|(a, b)| a + (b - a) * s).collect()
}

/// Generates dataset `index`: draws its input center, `n` inputs, and one
/// simulator output per input at the local true parameter.
pub fn generate_dataset(index: usize, config: &RegimeShiftConfig, sim: &dyn Simulator, seed: u64) -> Result<Dataset> {
    config.validate()?;
    check_dim(config.theta0.len(), sim.theta_dim())?;
    let mut r = rng::stream(seed, &[tag::DATASET, index as u64]);
    let chi = r.random_range(config.chi_low..config.chi_high);
    let mut xs = Vec::with_capacity(config.n);
    let mut ys = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let z: f64 = StandardNormal.sample(&mut r);
        let x = chi + config.input_std * z;
        let theta = theta_at(x, config);
        let mut sr = rng::stream(seed, &[tag::DATASET_OUTPUT, index as u64, i as u64]);
        let mut y = sim.simulate(&[x], &theta, &mut sr).map_err(|e| e.in_dataset(index))?;
        if config.output_noise_std > 0.0 {
            for v in &mut y {
                let e: f64 = StandardNormal.sample(&mut sr);
                *v += config.output_noise_std * e;
            }
        }
        xs.push(vec![x]);
        ys.push(y);
    }
    let meta = DatasetMeta {
        index: Some(index),
        seed: Some(seed),
        chi: Some(chi),
        simulator: Some(sim.name().to_string()),
        generator: Some(format!(
            "theta0={:?} theta1={:?} switch={} scale={} input=N(chi,{}) chi~U[{},{}] noise={}",
            config.theta0,
            config.theta1,
            config.switch_point,
            config.scale,
            config.input_std,
            config.chi_low,
            config.chi_high,
            config.output_noise_std
        )),
    };
    Ok(Dataset::new(xs, ys)?.with_meta(meta))
}
