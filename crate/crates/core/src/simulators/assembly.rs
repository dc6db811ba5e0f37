//! Two-machine assembly line.
//!
//! One ASSEMBLY machine builds products back to back; each build takes an
//! independent `N(theta_1, theta_2)` time. Finished products queue for a single
//! INSPECTION machine that processes batches of four at once, taking
//! `N(theta_3, theta_4)` per batch. A batch starts as soon as four products are
//! waiting and the inspector is idle; once assembly has finished, a trailing
//! partial batch is inspected on its own. Inspection overlaps later assembly.
//! Buffers are unbounded and parts never run out. Negative service draws are
//! clamped to zero.
//!
//! Random draws happen in event order: one assembly draw per product, then one
//! inspection draw when each batch is released.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Simulator;
use crate::error::{check_dim, Error, Result};
use crate::rng::StreamRng;

pub const INSPECTION_BATCH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyParams {
    pub assembly_mean: f64,
    pub assembly_std: f64,
    pub inspection_mean: f64,
    pub inspection_std: f64,
}

impl AssemblyParams {
    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        check_dim(4, theta.len())?;
        let p = Self {
            assembly_mean: theta[0],
            assembly_std: theta[1],
            inspection_mean: theta[2],
            inspection_std: theta[3],
        };
        if theta.iter().any(|v| !v.is_finite()) || p.assembly_std < 0.0 || p.inspection_std < 0.0 {
            return Err(Error::Simulator {
                theta: theta.to_vec(),
                message: "assembly parameters must be finite with nonnegative standard deviations".into(),
            });
        }
        Ok(p)
    }
}

fn service_time(mean: f64, std: f64, rng: &mut StreamRng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (mean + std * z).max(0.0)
}

/// Completion time of the last inspection for `x` products (rounded to the
/// nearest nonnegative integer).
pub fn simulate_assembly(x: f64, params: &AssemblyParams, rng: &mut StreamRng) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("product count must be finite, got {x}")));
    }
    let count = x.round().max(0.0) as usize;
    let mut assembly_clock = 0.0;
    let mut inspector_free = 0.0f64;
    let mut waiting = 0usize;
    for product in 0..count {
        assembly_clock += service_time(params.assembly_mean, params.assembly_std, rng);
        waiting += 1;
        if waiting == INSPECTION_BATCH || product + 1 == count {
            let start = inspector_free.max(assembly_clock);
            inspector_free = start + service_time(params.inspection_mean, params.inspection_std, rng);
            waiting = 0;
        }
    }
    Ok(inspector_free)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AssemblyLine;

impl Simulator for AssemblyLine {
    fn name(&self) -> &str {
        "assembly"
    }

    fn theta_dim(&self) -> usize {
        4
    }

    fn simulate(&self, x: &[f64], theta: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
        check_dim(1, x.len())?;
        let params = AssemblyParams::from_slice(theta)?;
        Ok(vec![simulate_assembly(x[0], &params, rng)?])
    }
}
