use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramSolveConfig {
    /// Diagonal term added to the Gram matrix (`m * delta`, `L * lambda`, ...).
    pub regularizer: f64,
    /// Relative residual accepted by [`solve_regularized`].
    pub tolerance: f64,
}

impl GramSolveConfig {
    pub fn new(regularizer: f64) -> Self {
        Self { regularizer, tolerance: 1e-9 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.regularizer >= 0.0) || !self.regularizer.is_finite() {
            return Err(Error::invalid(format!("regularizer must be >= 0, got {}", self.regularizer)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid(format!("solver tolerance must be > 0, got {}", self.tolerance)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Cholesky(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
}

/// Cached factorization of `G + reg * I`.
///
/// Cholesky is tried first; if round-off breaks positive definiteness the
/// factorization falls back to partially pivoted LU. Either way the system is
/// rejected when the pivot spread exceeds what double precision resolves.
#[derive(Debug, Clone)]
pub struct GramFactorization {
    matrix: DMatrix<f64>,
    factor: Factor,
}

impl GramFactorization {
    pub fn new(gram: &DMatrix<f64>, regularizer: f64) -> Result<Self> {
        if !gram.is_square() {
            return Err(Error::invalid(format!("Gram matrix is {}x{}", gram.nrows(), gram.ncols())));
        }
        if gram.nrows() == 0 {
            return Err(Error::invalid("empty Gram matrix"));
        }
        if !(regularizer >= 0.0) || !regularizer.is_finite() {
            return Err(Error::invalid(format!("regularizer must be >= 0, got {regularizer}")));
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("Gram matrix has non-finite entries".into()));
        }
        let n = gram.nrows();
        let mut matrix = gram.clone();
        for i in 0..n {
            matrix[(i, i)] += regularizer;
        }
        let limit = n as f64 * f64::EPSILON;

        if let Some(chol) = Cholesky::new(matrix.clone()) {
            let (lo, hi) = pivot_range(chol.l_dirty().diagonal().iter().map(|d| d * d));
            if lo > limit * hi {
                return Ok(Self { matrix, factor: Factor::Cholesky(chol) });
            }
        }
        let lu = matrix.clone().lu();
        let (lo, hi) = pivot_range(lu.u().diagonal().iter().map(|d| d.abs()));
        if !(lo > limit * hi) {
            return Err(Error::Singular(format!(
                "{n}x{n} Gram system with regularizer {regularizer:e} is numerically singular \
                 (pivot ratio {:.3e}); increase the regularizer or remove duplicate inputs",
                if hi > 0.0 { lo / hi } else { 0.0 }
            )));
        }
        Ok(Self { matrix, factor: Factor::Lu(lu) })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self.factor, Factor::Cholesky(_))
    }

    /// The regularized matrix `G + reg * I`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn raw_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            Factor::Cholesky(c) => c.solve(rhs),
            // LU pivots were checked at construction.
            Factor::Lu(lu) => lu.solve(rhs).expect("LU factor checked nonsingular"),
        }
    }

    /// Solves with two steps of iterative refinement.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), rhs.len())?;
        let b = DVector::from_column_slice(rhs);
        let mut x = self.raw_solve(&b);
        for _ in 0..2 {
            let r = &b - &self.matrix * &x;
            x += self.raw_solve(&r);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("Gram solve produced non-finite values".into()));
        }
        Ok(x.as_slice().to_vec())
    }

    /// `|(G + reg I) x - rhs|`.
    pub fn residual_norm(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        let b = DVector::from_column_slice(rhs);
        (&self.matrix * x - b).norm()
    }
}

fn pivot_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Solves `(G + reg I) w = rhs` and verifies the relative residual.
pub fn solve_regularized(gram: &DMatrix<f64>, config: &GramSolveConfig, rhs: &[f64]) -> Result<Vec<f64>> {
    config.validate()?;
    let f = GramFactorization::new(gram, config.regularizer)?;
    let w = f.solve(rhs)?;
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let res = f.residual_norm(&w, rhs);
    if res > config.tolerance * rhs_norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Singular(format!(
            "residual {res:.3e} exceeds tolerance {:.1e} * |rhs| = {:.3e}",
            config.tolerance,
            config.tolerance * rhs_norm
        )));
    }
    Ok(w)
}
