use serde::{Deserialize, Serialize};

use super::{KernelSpec, DISTANCE_CLAMP};
use crate::error::{check_dim, Error, Result};

/// A weighted sum of kernel features `sum_j w_j k(., a_j)`.
///
/// Weights are unrestricted reals: kernel-ABC weights can be negative and
/// need not sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeanRepr", into = "MeanRepr")]
pub struct EmpiricalKernelMean {
    kernel: KernelSpec,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeanRepr {
    bandwidth: f64,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<MeanRepr> for EmpiricalKernelMean {
    type Error = Error;
    fn try_from(r: MeanRepr) -> Result<Self> {
        EmpiricalKernelMean::new(r.atoms, r.weights, KernelSpec::new(r.bandwidth)?)
    }
}

impl From<EmpiricalKernelMean> for MeanRepr {
    fn from(m: EmpiricalKernelMean) -> Self {
        MeanRepr { bandwidth: m.kernel.bandwidth(), atoms: m.atoms, weights: m.weights }
    }
}

impl EmpiricalKernelMean {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>, kernel: KernelSpec) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("kernel mean needs at least one atom"));
        }
        check_dim(atoms.len(), weights.len())?;
        let dim = atoms[0].len();
        for a in &atoms {
            check_dim(dim, a.len())?;
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("kernel mean atoms must be finite"));
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("kernel mean weights must be finite"));
        }
        Ok(Self { kernel, atoms, weights })
    }

    /// Equal weights `1/m` over `atoms`.
    pub fn uniform(atoms: Vec<Vec<f64>>, kernel: KernelSpec) -> Result<Self> {
        let w = 1.0 / atoms.len().max(1) as f64;
        let weights = vec![w; atoms.len()];
        Self::new(atoms, weights, kernel)
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `sum_j w_j a_j`, the weighted atom average without renormalization.
    pub fn weighted_sum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            for (o, v) in out.iter_mut().zip(a) {
                *o += w * v;
            }
        }
        out
    }

    /// Weighted atom average normalized by the weight sum.
    pub fn point_estimate(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weighted_sum().into_iter().map(|v| v / total).collect()
    }

    /// Evaluates the embedded function at `x`: `sum_j w_j k(x, a_j)`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| w * self.kernel.eval(x, a)).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { kernel: self.kernel, atoms: self.atoms.clone(), weights: self.weights.iter().map(|w| w * c).collect() }
    }

    pub fn into_parts(self) -> (Vec<Vec<f64>>, Vec<f64>, KernelSpec) {
        (self.atoms, self.weights, self.kernel)
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.kernel != other.kernel {
            return Err(Error::Incompatible(format!(
                "bandwidths differ ({} vs {})",
                self.kernel.bandwidth(),
                other.kernel.bandwidth()
            )));
        }
        if self.dim() != other.dim() {
            return Err(Error::Incompatible(format!("atom dimensions differ ({} vs {})", self.dim(), other.dim())));
        }
        Ok(())
    }
}

/// `<a, b> = sum_j sum_j' w_j w'_j' k(a_j, b_j')`.
pub fn inner_product(a: &EmpiricalKernelMean, b: &EmpiricalKernelMean) -> Result<f64> {
    a.check_compatible(b)?;
    Ok(inner_unchecked(a, b))
}

pub(crate) fn inner_unchecked(a: &EmpiricalKernelMean, b: &EmpiricalKernelMean) -> f64 {
    a.atoms.iter().zip(&a.weights).map(|(x, wx)| wx * b.evaluate(x)).sum()
}

/// `|a - b|^2` in the RKHS, clamped at zero.
pub fn rkhs_distance_sq(a: &EmpiricalKernelMean, b: &EmpiricalKernelMean) -> Result<f64> {
    a.check_compatible(b)?;
    let d = inner_unchecked(a, a) - 2.0 * inner_unchecked(a, b) + inner_unchecked(b, b);
    Ok(clamp_distance(d))
}

pub(crate) fn clamp_distance(d: f64) -> f64 {
    if d < 0.0 && d > -DISTANCE_CLAMP {
        0.0
    } else {
        d.max(0.0)
    }
}

/// Squared RKHS gap between a bridged and a directly calibrated mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormGap {
    /// `2 (1 - <mb, sim>)`, exact only when both means have unit norm.
    pub unit_norm_form: f64,
    /// Full expansion `<mb,mb> - 2<mb,sim> + <sim,sim>`.
    pub exact: f64,
}

pub fn bridging_norm_gap(mb: &EmpiricalKernelMean, sim: &EmpiricalKernelMean) -> Result<NormGap> {
    mb.check_compatible(sim)?;
    let cross = inner_unchecked(mb, sim);
    let exact = clamp_distance(inner_unchecked(mb, mb) - 2.0 * cross + inner_unchecked(sim, sim));
    Ok(NormGap { unit_norm_form: 2.0 * (1.0 - cross), exact })
}
