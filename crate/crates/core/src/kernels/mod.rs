//! Gaussian kernels, bandwidth selection, empirical kernel means and
//! regularized Gram solves.
//!
//! Every kernel in the crate has the form `k(x, y) = exp(-|x - y|^2 / (2 s^2))`
//! with a single isotropic bandwidth `s`, whether it acts on raw inputs,
//! stacked pseudo-datasets, simulator parameters or network weights.

mod gram;
mod mean;

pub use gram::{solve_regularized, GramFactorization, GramSolveConfig};
pub(crate) use mean::{clamp_distance, inner_unchecked};
pub use mean::{bridging_norm_gap, inner_product, rkhs_distance_sq, EmpiricalKernelMean, NormGap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Distances squared below this are treated as exact cancellation noise.
pub const DISTANCE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct KernelSpec {
    bandwidth: f64,
}

impl KernelSpec {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if bandwidth.is_finite() && bandwidth > 0.0 {
            Ok(Self { bandwidth })
        } else {
            Err(Error::invalid(format!("kernel bandwidth must be positive and finite, got {bandwidth}")))
        }
    }

    /// Bandwidth from the median heuristic over `points`.
    pub fn median(points: &[Vec<f64>]) -> Result<Self> {
        Self::new(median_heuristic(points)?)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Kernel value from a precomputed squared distance.
    #[inline]
    pub fn from_sq_dist(&self, d2: f64) -> f64 {
        (-d2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }

    /// Unchecked evaluation; callers guarantee equal lengths.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.from_sq_dist(sq_dist(x, y))
    }
}

impl TryFrom<f64> for KernelSpec {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        KernelSpec::new(v)
    }
}

impl From<KernelSpec> for f64 {
    fn from(k: KernelSpec) -> f64 {
        k.bandwidth
    }
}

/// A bandwidth that is either fixed or resolved from data by the median heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    #[default]
    MedianAuto,
    Fixed(f64),
}

impl Bandwidth {
    pub fn resolve(&self, points: &[Vec<f64>]) -> Result<KernelSpec> {
        match *self {
            Bandwidth::Fixed(b) => KernelSpec::new(b),
            Bandwidth::MedianAuto => KernelSpec::median(points),
        }
    }

    /// As [`Bandwidth::resolve`], but a lone point (no pairwise distance)
    /// gets a unit bandwidth instead of an error.
    pub fn resolve_lenient(&self, points: &[Vec<f64>]) -> Result<KernelSpec> {
        match self {
            Bandwidth::MedianAuto if points.len() < 2 => KernelSpec::new(1.0),
            other => other.resolve(points),
        }
    }
}

#[inline]
pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn gauss_kernel(x: &[f64], y: &[f64], spec: &KernelSpec) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    Ok(spec.eval(x, y))
}

/// Median of pairwise Euclidean distances over distinct unordered pairs.
pub fn median_heuristic(points: &[Vec<f64>]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("median heuristic needs at least two points"));
    }
    let dim = points[0].len();
    for p in points {
        check_dim(dim, p.len())?;
    }
    let mut dists: Vec<f64> = (0..points.len())
        .into_par_iter()
        .flat_map_iter(|i| points[i + 1..].iter().map(move |q| sq_dist(&points[i], q).sqrt()))
        .collect();
    let med = median_in_place(&mut dists);
    if !(med > 0.0) || !med.is_finite() {
        return Err(Error::invalid(format!("median pairwise distance is {med}; points are degenerate")));
    }
    Ok(med)
}

/// Median with midpoint averaging for even lengths. Reorders `values`.
pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (lower, upper_mid, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper_mid = *upper_mid;
    if n % 2 == 1 {
        upper_mid
    } else {
        let lower_mid = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_mid + upper_mid)
    }
}

/// Symmetric Gram matrix `G[i][j] = k(points[i], points[j])`.
///
/// Rows are filled in parallel; every entry is a single independent
/// evaluation so the result does not depend on scheduling.
pub fn gram_matrix(points: &[Vec<f64>], spec: &KernelSpec) -> nalgebra::DMatrix<f64> {
    let n = points.len();
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| points.iter().map(|q| spec.eval(p, q)).collect())
        .collect();
    nalgebra::DMatrix::from_fn(n, n, |i, j| if i <= j { rows[i][j] } else { rows[j][i] })
}

/// Vector `(k(points[0], x), ..., k(points[n-1], x))`.
pub fn kernel_vector(points: &[Vec<f64>], x: &[f64], spec: &KernelSpec) -> Vec<f64> {
    points.iter().map(|p| spec.eval(p, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k1() -> KernelSpec {
        KernelSpec::new(1.0).unwrap()
    }

    #[test]
    fn gauss_kernel_examples() {
        assert_eq!(gauss_kernel(&[0.0], &[0.0], &k1()).unwrap(), 1.0);
        assert!((gauss_kernel(&[0.0], &[1.0], &k1()).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!((gauss_kernel(&[0.0, 0.0], &[1.0, 1.0], &k1()).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gauss_kernel_dimension_mismatch() {
        assert!(matches!(
            gauss_kernel(&[0.0], &[0.0, 1.0], &k1()),
            Err(Error::DimensionMismatch { expected: 1, actual: 2 })
        ));
    }

    #[test]
    fn kernel_spec_rejects_bad_bandwidth() {
        assert!(KernelSpec::new(0.0).is_err());
        assert!(KernelSpec::new(-1.0).is_err());
        assert!(KernelSpec::new(f64::NAN).is_err());
        assert!(KernelSpec::new(f64::INFINITY).is_err());
    }

    #[test]
    fn median_heuristic_examples() {
        let pts = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
        assert_eq!(median_heuristic(&pts(&[0.0, 1.0, 3.0])).unwrap(), 2.0);
        assert_eq!(median_heuristic(&pts(&[0.0, 1.0])).unwrap(), 1.0);
        assert!(median_heuristic(&pts(&[0.0, 0.0, 0.0])).is_err());
        assert!(median_heuristic(&pts(&[0.0])).is_err());
        // four points -> six distances {1,3,6,2,5,3}; central values 3 and 3
        assert_eq!(median_heuristic(&pts(&[0.0, 1.0, 3.0, 6.0])).unwrap(), 3.0);
        // {0,1,2,4}: distances {1,2,4,1,3,2} sorted 1,1,2,2,3,4 -> midpoint of 2,2
        assert_eq!(median_heuristic(&pts(&[0.0, 1.0, 2.0, 4.0])).unwrap(), 2.0);
        // {0,1,10}: distances {1,10,9} -> 9
        assert_eq!(median_heuristic(&pts(&[0.0, 1.0, 10.0])).unwrap(), 9.0);
    }

    #[test]
    fn median_even_count_uses_midpoint() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(median_in_place(&mut v), 2.5);
    }

    fn points_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..4).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), 2..12))
    }

    proptest! {
        #[test]
        fn kernel_symmetric_and_bounded(x in prop::collection::vec(-5.0f64..5.0, 3), y in prop::collection::vec(-5.0f64..5.0, 3), s in 0.5f64..4.0) {
            let k = KernelSpec::new(s).unwrap();
            let a = k.eval(&x, &y);
            prop_assert_eq!(a, k.eval(&y, &x));
            prop_assert!(a > 0.0 && a <= 1.0);
            prop_assert_eq!(a == 1.0, x == y);
        }

        #[test]
        fn gram_is_psd(points in points_strategy(), s in 0.2f64..3.0, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let k = KernelSpec::new(s).unwrap();
            let g = gram_matrix(&points, &k);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..5 {
                let v: Vec<f64> = (0..points.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let v = nalgebra::DVector::from_vec(v);
                prop_assert!((v.transpose() * &g * &v)[(0, 0)] >= -1e-10);
            }
        }
    }
}
