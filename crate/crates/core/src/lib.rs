//! Model bridging between machine-learning models and simulators.
//!
//! For each training dataset the crate computes two kernel mean embeddings:
//! the ML model's view of the data (a GP conditional mean or BNN weight
//! posterior) and the simulator-parameter posterior from kernel ABC. A kernel
//! ridge regression between the two embedding spaces then maps a new
//! dataset's ML embedding straight to a simulator-parameter embedding, from
//! which representative parameters are drawn by kernel herding. Prediction
//! never calls the simulator.
//!
//! | module | contents |
//! |---|---|
//! | [`kernels`] | Gaussian kernels, median heuristic, kernel means, Gram solves |
//! | [`abc`] | kernel ABC calibration |
//! | [`herding`] | kernel herding and MMD diagnostics |
//! | [`dist2dist`] | the bridging regressor |
//! | [`gp`] | GP / kernel ridge conditional mean |
//! | [`bnn`] | Bayesian MLP sampled by Metropolis–Hastings |
//! | [`simulators`] | assembly line, analytic toy, regime-shift datasets |
//! | [`pipeline`] | pre-learning, training, prediction, convergence study |

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abc;
pub mod bnn;
pub mod dist2dist;
pub mod error;
pub mod gp;
pub mod herding;
pub mod kernels;
pub mod pipeline;
pub mod rng;
pub mod simulators;

pub use abc::{kernel_abc, run_calibration, sample_prior, AbcConfig, Calibration, PriorBox};
pub use dist2dist::{kappa, BridgedMean, BridgingModel};
pub use error::{Error, Result};
pub use gp::GpModel;
pub use herding::{herd, mmd_to_target, CandidateSource, HerdingConfig};
pub use kernels::{
    bridging_norm_gap, gauss_kernel, inner_product, median_heuristic, rkhs_distance_sq, solve_regularized, Bandwidth,
    EmpiricalKernelMean, GramSolveConfig, KernelSpec, NormGap,
};
pub use simulators::{Dataset, Ledger, RegimeShiftConfig, Simulator, SimulatorKind};
