//! Simulators, datasets and the regime-shift data generator.

mod assembly;
mod dataset;
mod regime;
mod toy;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use assembly::{simulate_assembly, AssemblyLine, AssemblyParams, INSPECTION_BATCH};
pub use dataset::{Dataset, DatasetMeta};
pub use regime::{generate_dataset, sigmoid, theta_at, RegimeShiftConfig};
pub use toy::{analytic_toy, AnalyticToy};

use crate::error::Result;
use crate::rng::StreamRng;

/// A stochastic forward model `y = f_sim(x; theta)`.
///
/// Implementations must be pure given `(x, theta, rng)` so calibration can
/// fan out across threads with per-call random streams.
pub trait Simulator: Send + Sync {
    fn name(&self) -> &str;
    fn theta_dim(&self) -> usize;
    fn x_dim(&self) -> usize {
        1
    }
    fn y_dim(&self) -> usize {
        1
    }
    fn simulate(&self, x: &[f64], theta: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>>;
}

/// Shared count of simulator evaluations.
#[derive(Debug, Default)]
pub struct Ledger(AtomicU64);

impl Ledger {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn calls(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }

    fn record(&self, n: u64) {
        self.0.fetch_add(n, Ordering::SeqCst);
    }
}

/// Wraps a simulator and counts every evaluation in a [`Ledger`].
pub struct Counted<S: ?Sized> {
    ledger: Arc<Ledger>,
    inner: Arc<S>,
}

impl<S: Simulator + ?Sized> Counted<S> {
    pub fn new(inner: Arc<S>, ledger: Arc<Ledger>) -> Self {
        Self { ledger, inner }
    }

    pub fn ledger(&self) -> &Arc<Ledger> {
        &self.ledger
    }
}

impl<S: Simulator + ?Sized> Simulator for Counted<S> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn theta_dim(&self) -> usize {
        self.inner.theta_dim()
    }
    fn x_dim(&self) -> usize {
        self.inner.x_dim()
    }
    fn y_dim(&self) -> usize {
        self.inner.y_dim()
    }
    fn simulate(&self, x: &[f64], theta: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
        self.ledger.record(1);
        self.inner.simulate(x, theta, rng)
    }
}

/// Built-in simulators selectable from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulatorKind {
    Assembly,
    AnalyticToy,
}

impl SimulatorKind {
    pub fn build(self) -> Arc<dyn Simulator> {
        match self {
            SimulatorKind::Assembly => Arc::new(AssemblyLine),
            SimulatorKind::AnalyticToy => Arc::new(AnalyticToy),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn counted_simulator_records_calls() {
        let ledger = Ledger::new();
        let sim = Counted::new(SimulatorKind::AnalyticToy.build(), ledger.clone());
        let mut r = rng::stream(0, &[]);
        for _ in 0..5 {
            sim.simulate(&[1.0], &[1.0, 0.0], &mut r).unwrap();
        }
        assert_eq!(ledger.calls(), 5);
        assert_eq!(sim.name(), "analytic_toy");
    }
}
