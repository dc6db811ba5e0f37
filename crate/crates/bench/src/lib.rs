//! Seeded fixtures shared by the benchmarks.

use mb_core::kernels::{EmpiricalKernelMean, KernelSpec};
use mb_core::rng::stream;
use rand::Rng;

pub fn points(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = stream(seed, &[]);
    (0..count).map(|_| (0..dim).map(|_| r.random::<f64>()).collect()).collect()
}

pub fn mean(count: usize, dim: usize, seed: u64) -> EmpiricalKernelMean {
    let atoms = points(count, dim, seed);
    let mut r = stream(seed, &[1]);
    let weights = (0..count).map(|_| r.random::<f64>() / count as f64).collect();
    EmpiricalKernelMean::new(atoms, weights, KernelSpec::new(0.3).unwrap()).unwrap()
}
