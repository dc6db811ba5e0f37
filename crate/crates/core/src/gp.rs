//! Kernel ridge / GP-mean regression read as a conditional kernel mean.
//!
//! With `u(x) = (G_x + n lambda' I)^{-1} k_x(x)`, the predictive mean embedding
//! at `x` is `sum_i u_i(x) k_y(., Y_i)`; its point prediction is
//! `sum_i u_i(x) Y_i`. A whole dataset is embedded by averaging `u` over the
//! dataset's own inputs, which gives one kernel mean over the `Y` space.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::{gram_matrix, kernel_vector, Bandwidth, EmpiricalKernelMean, GramFactorization, KernelSpec};
use crate::simulators::Dataset;

#[derive(Debug, Clone)]
pub struct GpModel {
    train_x: Vec<Vec<f64>>,
    train_y: Vec<Vec<f64>>,
    x_kernel: KernelSpec,
    y_kernel: KernelSpec,
    lambda_prime: f64,
    factor: GramFactorization,
}

impl GpModel {
    /// Fits on `dataset`. `Bandwidth::MedianAuto` resolves against the
    /// dataset's own inputs or outputs.
    pub fn fit(dataset: &Dataset, x_kernel: Bandwidth, y_kernel: Bandwidth, lambda_prime: f64) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::invalid("cannot fit a GP on an empty dataset"));
        }
        let xk = x_kernel.resolve_lenient(dataset.x())?;
        let yk = y_kernel.resolve_lenient(dataset.y())?;
        Self::fit_with(dataset.x().to_vec(), dataset.y().to_vec(), xk, yk, lambda_prime)
    }

    pub fn fit_with(
        train_x: Vec<Vec<f64>>,
        train_y: Vec<Vec<f64>>,
        x_kernel: KernelSpec,
        y_kernel: KernelSpec,
        lambda_prime: f64,
    ) -> Result<Self> {
        let n = train_x.len();
        if n == 0 {
            return Err(Error::invalid("cannot fit a GP without data"));
        }
        check_dim(n, train_y.len())?;
        if !(lambda_prime >= 0.0) || !lambda_prime.is_finite() {
            return Err(Error::invalid(format!("lambda' must be >= 0, got {lambda_prime}")));
        }
        let gram = gram_matrix(&train_x, &x_kernel);
        let factor = GramFactorization::new(&gram, n as f64 * lambda_prime)?;
        Ok(Self { train_x, train_y, x_kernel, y_kernel, lambda_prime, factor })
    }

    pub fn len(&self) -> usize {
        self.train_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_x.is_empty()
    }

    pub fn x_kernel(&self) -> KernelSpec {
        self.x_kernel
    }

    pub fn y_kernel(&self) -> KernelSpec {
        self.y_kernel
    }

    pub fn lambda_prime(&self) -> f64 {
        self.lambda_prime
    }

    pub fn factorization(&self) -> &GramFactorization {
        &self.factor
    }

    /// `u(x) = (G_x + n lambda' I)^{-1} k_x(x)`.
    pub fn weights_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.train_x[0].len(), x.len())?;
        self.factor.solve(&kernel_vector(&self.train_x, x, &self.x_kernel))
    }

    /// Point prediction `sum_i u_i(x) Y_i`, componentwise for vector outputs.
    pub fn predict_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = self.weights_at(x)?;
        let dy = self.train_y[0].len();
        let mut out = vec![0.0; dy];
        for (ui, yi) in u.iter().zip(&self.train_y) {
            for (o, v) in out.iter_mut().zip(yi) {
                *o += ui * v;
            }
        }
        Ok(out)
    }

    /// Conditional-mean weights averaged over the training inputs,
    /// `ubar_i = (1/n) sum_p u_i(X_p)`, computed with a single solve against
    /// the row means of `G_x`.
    pub fn marginal_weights(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let gram = gram_matrix(&self.train_x, &self.x_kernel);
        let mean_k: Vec<f64> = (0..n).map(|i| gram.row(i).sum() / n as f64).collect();
        self.factor.solve(&mean_k)
    }

    /// The dataset embedding `sum_i ubar_i k_y(., Y_i)`.
    pub fn dataset_embedding(&self) -> Result<EmpiricalKernelMean> {
        EmpiricalKernelMean::new(self.train_y.clone(), self.marginal_weights()?, self.y_kernel)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GpRepr::from(self)).expect("GP serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: GpRepr = serde_json::from_str(text).map_err(|e| Error::invalid(format!("GP model JSON: {e}")))?;
        Self::fit_with(r.train_x, r.train_y, r.x_kernel, r.y_kernel, r.lambda_prime)
    }
}

#[derive(Serialize, Deserialize)]
struct GpRepr {
    train_x: Vec<Vec<f64>>,
    train_y: Vec<Vec<f64>>,
    x_kernel: KernelSpec,
    y_kernel: KernelSpec,
    lambda_prime: f64,
}

impl From<&GpModel> for GpRepr {
    fn from(m: &GpModel) -> Self {
        GpRepr {
            train_x: m.train_x.clone(),
            train_y: m.train_y.clone(),
            x_kernel: m.x_kernel,
            y_kernel: m.y_kernel,
            lambda_prime: m.lambda_prime,
        }
    }
}

/// Dense regularized Gram for external checks.
pub fn regularized_gram(x: &[Vec<f64>], kernel: &KernelSpec, lambda_prime: f64) -> DMatrix<f64> {
    let n = x.len();
    gram_matrix(x, kernel) + DMatrix::identity(n, n) * (n as f64 * lambda_prime)
}
