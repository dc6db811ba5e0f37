//! Distribution-to-distribution regression between kernel means.
//!
//! Kernel ridge regression with the Gaussian-like meta-kernel
//! `kappa(mu, mu') = exp(-|mu - mu'|_H^2 / (2 sigma_mu^2))` on input means.
//! By the representer theorem the regressor maps a new input to
//! `sum_l v_l mu_out_l` with `v = (G_mu + lambda L I)^{-1} k_mu(mu_new)`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::{clamp_distance, median_in_place, Bandwidth, EmpiricalKernelMean, GramFactorization};

pub const MODEL_VERSION: &str = "mb-v1";

/// Fallback meta-kernel width when the median heuristic is undefined (fewer
/// than two distinct training inputs).
pub const FALLBACK_SIGMA_MU: f64 = 1.0;

pub fn kappa_from_sq_dist(d2: f64, sigma_mu: f64) -> f64 {
    (-d2 / (2.0 * sigma_mu * sigma_mu)).exp()
}

/// Meta-kernel on kernel means using the full RKHS distance.
pub fn kappa(a: &EmpiricalKernelMean, b: &EmpiricalKernelMean, sigma_mu: f64) -> Result<f64> {
    check_sigma(sigma_mu)?;
    Ok(kappa_from_sq_dist(crate::kernels::rkhs_distance_sq(a, b)?, sigma_mu))
}

fn check_sigma(sigma_mu: f64) -> Result<()> {
    if sigma_mu.is_finite() && sigma_mu > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("sigma_mu must be positive and finite, got {sigma_mu}")))
    }
}

/// Pairwise inner products `<means[a], means[b]>`.
pub fn inner_product_matrix(means: &[EmpiricalKernelMean]) -> Result<DMatrix<f64>> {
    if let Some(first) = means.first() {
        for m in means {
            first.check_compatible(m)?;
        }
    }
    let n = means.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|a| (a..n).map(|b| crate::kernels::inner_unchecked(&means[a], &means[b])).collect())
        .collect();
    Ok(DMatrix::from_fn(n, n, |i, j| if i <= j { rows[i][j - i] } else { rows[j][i - j] }))
}

/// Squared RKHS distances from an inner-product matrix.
pub fn sq_distances(ip: &DMatrix<f64>) -> DMatrix<f64> {
    let n = ip.nrows();
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { clamp_distance(ip[(i, i)] - 2.0 * ip[(i, j)] + ip[(j, j)]) })
}

/// Median of pairwise RKHS distances, or `None` when undefined.
pub fn median_rkhs_distance(sq_dist: &DMatrix<f64>) -> Option<f64> {
    let n = sq_dist.nrows();
    let mut d: Vec<f64> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| sq_dist[(i, j)].sqrt()).collect();
    if d.is_empty() {
        return None;
    }
    let med = median_in_place(&mut d);
    (med > 0.0 && med.is_finite()).then_some(med)
}

/// The fitted bridging regressor.
#[derive(Debug, Clone)]
pub struct BridgingModel {
    inputs: Vec<EmpiricalKernelMean>,
    outputs: Vec<EmpiricalKernelMean>,
    lambda: f64,
    sigma_mu: f64,
    input_sq_norms: Vec<f64>,
    factor: GramFactorization,
}

/// A bridged prediction: the flattened mean and the regression coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgedMean {
    pub mean: EmpiricalKernelMean,
    pub v: Vec<f64>,
}

impl BridgingModel {
    pub fn fit(inputs: Vec<EmpiricalKernelMean>, outputs: Vec<EmpiricalKernelMean>, lambda: f64, sigma_mu: Bandwidth) -> Result<Self> {
        let ip = inner_product_matrix(&inputs)?;
        Self::fit_with_inner_products(inputs, outputs, lambda, sigma_mu, &ip)
    }

    /// Fit from a precomputed input inner-product matrix.
    pub fn fit_with_inner_products(
        inputs: Vec<EmpiricalKernelMean>,
        outputs: Vec<EmpiricalKernelMean>,
        lambda: f64,
        sigma_mu: Bandwidth,
        ip: &DMatrix<f64>,
    ) -> Result<Self> {
        let l = inputs.len();
        if l == 0 {
            return Err(Error::invalid("bridging needs at least one training pair"));
        }
        check_dim(l, outputs.len())?;
        check_dim(l, ip.nrows())?;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        for m in &inputs[1..] {
            inputs[0].check_compatible(m)?;
        }
        for m in &outputs[1..] {
            outputs[0].check_compatible(m)?;
        }
        let d2 = sq_distances(ip);
        let sigma_mu = match sigma_mu {
            Bandwidth::Fixed(s) => {
                check_sigma(s)?;
                s
            }
            Bandwidth::MedianAuto => median_rkhs_distance(&d2).unwrap_or(FALLBACK_SIGMA_MU),
        };
        let gram = d2.map(|d| kappa_from_sq_dist(d, sigma_mu));
        let factor = GramFactorization::new(&gram, lambda * l as f64)?;
        let input_sq_norms = (0..l).map(|i| ip[(i, i)]).collect();
        Ok(Self { inputs, outputs, lambda, sigma_mu, input_sq_norms, factor })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma_mu(&self) -> f64 {
        self.sigma_mu
    }

    pub fn inputs(&self) -> &[EmpiricalKernelMean] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[EmpiricalKernelMean] {
        &self.outputs
    }

    pub fn factorization(&self) -> &GramFactorization {
        &self.factor
    }

    /// `k_mu(input) = (kappa(input, mu_1), ..., kappa(input, mu_L))`.
    pub fn kernel_vector(&self, input: &EmpiricalKernelMean) -> Result<Vec<f64>> {
        self.inputs[0].check_compatible(input)?;
        let self_ip = crate::kernels::inner_unchecked(input, input);
        let cross: Vec<f64> = self.inputs.par_iter().map(|m| crate::kernels::inner_unchecked(input, m)).collect();
        Ok(self.kernel_vector_from_inner(self_ip, &cross))
    }

    fn kernel_vector_from_inner(&self, self_ip: f64, cross: &[f64]) -> Vec<f64> {
        cross
            .iter()
            .zip(&self.input_sq_norms)
            .map(|(c, n)| kappa_from_sq_dist(clamp_distance(self_ip - 2.0 * c + n), self.sigma_mu))
            .collect()
    }

    /// Regression coefficients `v` for a new input.
    pub fn coefficients(&self, input: &EmpiricalKernelMean) -> Result<Vec<f64>> {
        self.factor.solve(&self.kernel_vector(input)?)
    }

    /// Coefficients from precomputed `<input, input>` and `<input, mu_l>`.
    pub fn coefficients_from_inner(&self, self_ip: f64, cross: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.len(), cross.len())?;
        self.factor.solve(&self.kernel_vector_from_inner(self_ip, cross))
    }

    /// `sum_l v_l mu_out_l` flattened into one mean over the concatenated
    /// output atoms with weights `v_l w_{l,j}`.
    pub fn flatten(&self, v: &[f64]) -> Result<EmpiricalKernelMean> {
        check_dim(self.len(), v.len())?;
        let mut atoms = Vec::with_capacity(self.outputs.iter().map(EmpiricalKernelMean::len).sum());
        let mut weights = Vec::with_capacity(atoms.capacity());
        for (vl, out) in v.iter().zip(&self.outputs) {
            atoms.extend_from_slice(out.atoms());
            weights.extend(out.weights().iter().map(|w| vl * w));
        }
        EmpiricalKernelMean::new(atoms, weights, self.outputs[0].kernel())
    }

    pub fn predict(&self, input: &EmpiricalKernelMean) -> Result<BridgedMean> {
        let v = self.coefficients(input)?;
        Ok(BridgedMean { mean: self.flatten(&v)?, v })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelRepr::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: ModelRepr = serde_json::from_str(text).map_err(|e| Error::invalid(format!("bridging model JSON: {e}")))?;
        repr.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    version: String,
    lambda: f64,
    sigma_mu: f64,
    train_inputs: Vec<EmpiricalKernelMean>,
    train_outputs: Vec<EmpiricalKernelMean>,
}

impl From<&BridgingModel> for ModelRepr {
    fn from(m: &BridgingModel) -> Self {
        ModelRepr {
            version: MODEL_VERSION.to_string(),
            lambda: m.lambda,
            sigma_mu: m.sigma_mu,
            train_inputs: m.inputs.clone(),
            train_outputs: m.outputs.clone(),
        }
    }
}

impl TryFrom<ModelRepr> for BridgingModel {
    type Error = Error;
    fn try_from(r: ModelRepr) -> Result<Self> {
        if r.version != MODEL_VERSION {
            return Err(Error::invalid(format!("unsupported model version {:?}", r.version)));
        }
        BridgingModel::fit(r.train_inputs, r.train_outputs, r.lambda, Bandwidth::Fixed(r.sigma_mu))
    }
}

impl Serialize for BridgingModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for BridgingModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ModelRepr::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}
