//! Kernel herding over a finite candidate set.
//!
//! Sample `j` (1-based) maximizes
//! `mu(theta) - (1/j) * sum_{j' < j} k(theta, theta_j')`
//! where `mu` is the target embedding evaluated at `theta`. Bridged means are
//! herded through the same path once flattened, because
//! `sum_l v_l sum_j w_{l,j} k(theta, theta_{l,j})` is just a plain weighted
//! sum over the concatenated atoms.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::{rkhs_distance_sq, EmpiricalKernelMean};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateSource {
    /// The target's own atoms.
    Atoms,
    /// A regular grid with `resolution[d]` points spanning `[lower[d], upper[d]]`.
    Grid { resolution: Vec<usize>, lower: Vec<f64>, upper: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HerdingConfig {
    pub sample_count: usize,
    #[serde(default = "default_candidates")]
    pub candidates: CandidateSource,
    /// Recorded for provenance; the greedy search itself is deterministic.
    #[serde(default)]
    pub seed: u64,
}

fn default_candidates() -> CandidateSource {
    CandidateSource::Atoms
}

impl HerdingConfig {
    pub fn atoms(sample_count: usize) -> Self {
        Self { sample_count, candidates: CandidateSource::Atoms, seed: 0 }
    }

    pub fn grid(sample_count: usize, resolution: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { sample_count, candidates: CandidateSource::Grid { resolution, lower, upper }, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::invalid("herding needs sample_count >= 1"));
        }
        if let CandidateSource::Grid { resolution, lower, upper } = &self.candidates {
            check_dim(resolution.len(), lower.len())?;
            check_dim(resolution.len(), upper.len())?;
            if resolution.iter().any(|&r| r < 2) {
                return Err(Error::invalid("grid resolution must be >= 2 per dimension"));
            }
            if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
                return Err(Error::invalid("grid bounds need lower < upper"));
            }
        }
        Ok(())
    }
}

/// All points of a regular grid; the last coordinate varies fastest.
pub fn grid_points(resolution: &[usize], lower: &[f64], upper: &[f64]) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = resolution
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&r, (&l, &u))| (0..r).map(|i| l + (u - l) * i as f64 / (r - 1) as f64).collect())
        .collect();
    let total: usize = resolution.iter().product();
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; axes.len()];
            for d in (0..axes.len()).rev() {
                p[d] = axes[d][idx % axes[d].len()];
                idx /= axes[d].len();
            }
            p
        })
        .collect()
}

pub fn candidates_for(target: &EmpiricalKernelMean, source: &CandidateSource) -> Result<Vec<Vec<f64>>> {
    match source {
        CandidateSource::Atoms => {
            // a repeated atom scores the same as its first copy and loses the tie
            let mut seen = HashSet::new();
            Ok(target
                .atoms()
                .iter()
                .filter(|a| seen.insert(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
                .cloned()
                .collect())
        }
        CandidateSource::Grid { resolution, lower, upper } => {
            check_dim(target.dim(), resolution.len())?;
            Ok(grid_points(resolution, lower, upper))
        }
    }
}

/// Herds `config.sample_count` samples from `target`, in selection order.
pub fn herd(target: &EmpiricalKernelMean, config: &HerdingConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let candidates = candidates_for(target, &config.candidates)?;
    herd_over(target, &candidates, config.sample_count)
}

/// Herding with an explicit candidate set. Ties go to the lowest index.
pub fn herd_over(target: &EmpiricalKernelMean, candidates: &[Vec<f64>], count: usize) -> Result<Vec<Vec<f64>>> {
    if candidates.is_empty() {
        return Err(Error::invalid("herding candidate set is empty"));
    }
    for c in candidates {
        check_dim(target.dim(), c.len())?;
    }
    let kernel = target.kernel();
    let attraction: Vec<f64> = candidates.par_iter().map(|c| target.evaluate(c)).collect();
    let mut repulsion = vec![0.0; candidates.len()];
    let mut chosen = Vec::with_capacity(count);
    for j in 1..=count {
        let inv_j = 1.0 / j as f64;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (c, (a, r)) in attraction.iter().zip(&repulsion).enumerate() {
            let score = a - inv_j * r;
            if score > best_score {
                best_score = score;
                best = c;
            }
        }
        let pick = candidates[best].clone();
        repulsion.par_iter_mut().zip(candidates.par_iter()).for_each(|(r, c)| *r += kernel.eval(c, &pick));
        chosen.push(pick);
    }
    Ok(chosen)
}

/// Squared RKHS distance between the uniform mean over `samples` and `target`.
pub fn mmd_to_target(samples: &[Vec<f64>], target: &EmpiricalKernelMean) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    for s in samples {
        check_dim(target.dim(), s.len())?;
    }
    let empirical = EmpiricalKernelMean::uniform(samples.to_vec(), target.kernel())?;
    rkhs_distance_sq(&empirical, target)
}

/// CSV with header `theta1..theta_d`, one row per sample, LF endings.
pub fn samples_to_csv(samples: &[Vec<f64>]) -> String {
    let dim = samples.first().map_or(0, Vec::len);
    let mut out = (1..=dim).map(|i| format!("theta{i}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for s in samples {
        out.push_str(&s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// Per-coordinate `(mean, std)` of a sample set.
pub fn summarize(samples: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let n = samples.len() as f64;
    let dim = samples.first().map_or(0, Vec::len);
    (0..dim)
        .map(|d| {
            let mean = samples.iter().map(|s| s[d]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[d] - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect()
}
