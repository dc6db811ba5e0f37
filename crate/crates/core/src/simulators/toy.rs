use super::Simulator;
use crate::error::{check_dim, Error, Result};
use crate::rng::StreamRng;

/// `y = theta_1 x + theta_2 x^2 / 100`.
pub fn analytic_toy(x: f64, theta: [f64; 2]) -> f64 {
    theta[0] * x + theta[1] * x * x / 100.0
}

/// Deterministic two-parameter polynomial response, cheap enough to run full
/// calibrations inside tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyticToy;

impl Simulator for AnalyticToy {
    fn name(&self) -> &str {
        "analytic_toy"
    }

    fn theta_dim(&self) -> usize {
        2
    }

    fn simulate(&self, x: &[f64], theta: &[f64], _rng: &mut StreamRng) -> Result<Vec<f64>> {
        check_dim(1, x.len())?;
        check_dim(2, theta.len())?;
        let y = analytic_toy(x[0], [theta[0], theta[1]]);
        if !y.is_finite() {
            return Err(Error::Simulator { theta: theta.to_vec(), message: format!("non-finite output at x = {}", x[0]) });
        }
        Ok(vec![y])
    }
}
