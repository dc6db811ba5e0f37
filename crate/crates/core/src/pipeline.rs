//! The end-to-end bridging workflow.
//!
//! 1. Pre-learning: for every training dataset, fit the ML model and embed it,
//!    and calibrate the simulator by kernel ABC. This is the only phase that
//!    runs the simulator.
//! 2. Training: fit the distribution-to-distribution regressor on the pairs.
//! 3. Prediction: for a new dataset, fit the ML model on it alone, bridge its
//!    embedding to a simulator-parameter embedding and herd samples from it.
//!
//! All embeddings in one run share kernels: one `k_theta` over simulator
//! parameters and one kernel over the ML embedding space, both fixed during
//! pre-learning and carried by the trained model.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abc::{run_calibration, sample_prior, AbcConfig, Calibration, PriorBox};
use crate::bnn::{bnn_embedding, bnn_forward, sample_posterior_mh, BnnArchitecture, BnnPosterior, BnnSamplerConfig};
use crate::dist2dist::{inner_product_matrix, BridgingModel};
use crate::error::{check_dim, Error, Result};
use crate::gp::GpModel;
use crate::herding::{herd, summarize, HerdingConfig};
use crate::kernels::{
    clamp_distance, inner_unchecked, Bandwidth, EmpiricalKernelMean, KernelSpec, NormGap,
};
use crate::rng::{derive_seed, tag};
use crate::simulators::{generate_dataset, Dataset, RegimeShiftConfig, Simulator, SimulatorKind};

/// Regularizer used by the simple production experiment.
pub const DEFAULT_LAMBDA: f64 = 1e-6;
/// Candidate values for leave-one-out selection of `lambda`.
pub const LAMBDA_GRID: [f64; 4] = [1e-6, 1e-4, 1e-2, 1e-1];
/// Pooled points used for a shared median-heuristic bandwidth are thinned to
/// at most this many.
pub const BANDWIDTH_POOL_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlPath {
    #[default]
    Gp,
    Bnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpPathConfig {
    /// `lambda'`; the Gram diagonal receives `n * lambda'`.
    pub lambda_prime: f64,
    /// Per-dataset input kernel.
    pub x_kernel: Bandwidth,
    /// Output kernel shared by every dataset embedding.
    pub y_kernel: Bandwidth,
}

impl Default for GpPathConfig {
    fn default() -> Self {
        Self { lambda_prime: 1e-3, x_kernel: Bandwidth::MedianAuto, y_kernel: Bandwidth::MedianAuto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BnnPathConfig {
    pub hidden: Vec<usize>,
    pub sampler: BnnSamplerConfig,
    /// Kernel on weight vectors shared by every posterior embedding.
    pub xi_kernel: Bandwidth,
}

impl Default for BnnPathConfig {
    fn default() -> Self {
        Self { hidden: vec![3, 3], sampler: BnnSamplerConfig::new(30_000, 10_000, 100, 0), xi_kernel: Bandwidth::MedianAuto }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlConfig {
    pub path: MlPath,
    pub gp: GpPathConfig,
    pub bnn: BnnPathConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BridgeConfig {
    pub lambda: f64,
    pub sigma_mu: Bandwidth,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self { lambda: DEFAULT_LAMBDA, sigma_mu: Bandwidth::MedianAuto }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub simulator: SimulatorKind,
    /// Number of datasets generated for the pool.
    pub datasets: usize,
    /// Root seed for dataset generation.
    #[serde(default)]
    pub seed: u64,
    pub regime: RegimeShiftConfig,
    pub prior: PriorBox,
    pub abc: AbcConfig,
    #[serde(default)]
    pub bridge: BridgeConfig,
    /// Defaults to herding `abc.m` samples over the mean's atoms.
    #[serde(default)]
    pub herding: Option<HerdingConfig>,
    #[serde(default)]
    pub ml: MlConfig,
    /// Training-set sizes for the convergence study.
    #[serde(default)]
    pub l_grid: Vec<usize>,
}

impl ExperimentConfig {
    /// Two-regime setup on the analytic toy simulator.
    pub fn toy(datasets: usize, n: usize, m: usize) -> Self {
        Self {
            simulator: SimulatorKind::AnalyticToy,
            datasets,
            seed: 0,
            regime: RegimeShiftConfig {
                theta0: vec![1.0, 0.5],
                theta1: vec![2.0, 1.5],
                switch_point: 50.0,
                scale: 5.0,
                chi_low: 20.0,
                chi_high: 80.0,
                input_std: 5.0,
                n,
                output_noise_std: 0.0,
            },
            prior: PriorBox::new(vec![0.0, 0.0], vec![3.0, 3.0]).expect("valid box"),
            abc: AbcConfig::new(m, 0),
            bridge: BridgeConfig::default(),
            herding: None,
            ml: MlConfig::default(),
            l_grid: vec![],
        }
    }

    /// The simple production experiment: 100 datasets of 50 points, 100
    /// prior draws, `lambda = 1e-6`.
    pub fn assembly(datasets: usize, n: usize, m: usize) -> Self {
        Self {
            simulator: SimulatorKind::Assembly,
            datasets,
            seed: 0,
            regime: RegimeShiftConfig { n, ..RegimeShiftConfig::assembly_default() },
            prior: PriorBox::assembly_default(),
            abc: AbcConfig::new(m, 0),
            bridge: BridgeConfig::default(),
            herding: None,
            ml: MlConfig::default(),
            l_grid: vec![],
        }
    }

    pub fn herding(&self) -> HerdingConfig {
        self.herding.clone().unwrap_or_else(|| HerdingConfig::atoms(self.abc.m))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        if self.datasets == 0 {
            return Err(Error::Config("datasets must be >= 1".into()));
        }
        self.regime.validate().map_err(cfg)?;
        self.abc.validate().map_err(cfg)?;
        self.herding().validate().map_err(cfg)?;
        let sim = self.simulator.build();
        if sim.theta_dim() != self.prior.dim() || sim.theta_dim() != self.regime.theta0.len() {
            return Err(Error::Config(format!(
                "simulator {} has {} parameters; prior has {}, regime has {}",
                sim.name(),
                sim.theta_dim(),
                self.prior.dim(),
                self.regime.theta0.len()
            )));
        }
        if !(self.bridge.lambda >= 0.0) {
            return Err(Error::Config(format!("bridge.lambda must be >= 0, got {}", self.bridge.lambda)));
        }
        if !(self.ml.gp.lambda_prime >= 0.0) {
            return Err(Error::Config("ml.gp.lambda_prime must be >= 0".into()));
        }
        if self.l_grid.contains(&0) {
            return Err(Error::Config("l_grid entries must be >= 1".into()));
        }
        Ok(())
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Generates the dataset pool `0..config.datasets`.
pub fn generate_datasets(config: &ExperimentConfig, sim: &dyn Simulator) -> Result<Vec<Dataset>> {
    (0..config.datasets).into_par_iter().map(|l| generate_dataset(l, &config.regime, sim, config.seed)).collect()
}

/// Affine standardization applied before the BNN sees the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_std: Vec<f64>,
}

fn column_stats(rows: impl Iterator<Item = Vec<f64>> + Clone) -> (Vec<f64>, Vec<f64>) {
    let n = rows.clone().count() as f64;
    let dim = rows.clone().next().map_or(0, |r| r.len());
    let mut mean = vec![0.0; dim];
    for r in rows.clone() {
        for (m, v) in mean.iter_mut().zip(&r) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(&r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let std = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    (mean, std)
}

impl Standardizer {
    pub fn fit(datasets: &[Dataset]) -> Self {
        let (x_mean, x_std) = column_stats(datasets.iter().flat_map(|d| d.x().iter().cloned()));
        let (y_mean, y_std) = column_stats(datasets.iter().flat_map(|d| d.y().iter().cloned()));
        Self { x_mean, x_std, y_mean, y_std }
    }

    fn scale(v: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
        v.iter().zip(mean.iter().zip(std)).map(|(x, (m, s))| (x - m) / s).collect()
    }

    pub fn transform(&self, d: &Dataset) -> Result<Dataset> {
        check_dim(self.x_mean.len(), d.x_dim())?;
        check_dim(self.y_mean.len(), d.y_dim())?;
        Dataset::new(
            d.x().iter().map(|x| Self::scale(x, &self.x_mean, &self.x_std)).collect(),
            d.y().iter().map(|y| Self::scale(y, &self.y_mean, &self.y_std)).collect(),
        )
    }

    pub fn scale_x(&self, x: &[f64]) -> Vec<f64> {
        Self::scale(x, &self.x_mean, &self.x_std)
    }

    pub fn unscale_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(self.y_mean.iter().zip(&self.y_std)).map(|(v, (m, s))| v * s + m).collect()
    }
}

/// A fitted per-dataset ML model.
#[derive(Debug, Clone)]
pub enum MlModel {
    Gp(GpModel),
    Bnn(BnnPosterior),
}

/// Fits ML models and embeds them with kernels shared across a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlEmbedder {
    pub config: MlConfig,
    /// Kernel of the embedding space (`k_y` for GP, `k_xi` for BNN).
    pub kernel: KernelSpec,
    #[serde(default)]
    pub standardizer: Option<Standardizer>,
}

/// Every `k`-th point so that at most `cap` remain.
fn thinned<'a>(points: impl Iterator<Item = &'a Vec<f64>> + Clone, cap: usize) -> Vec<Vec<f64>> {
    let total = points.clone().count();
    let step = total.div_ceil(cap).max(1);
    points.step_by(step).cloned().collect()
}

impl MlEmbedder {
    /// Resolves the shared kernels from the training pool and fits every model.
    pub fn prepare(config: &MlConfig, datasets: &[Dataset]) -> Result<(Self, Vec<MlModel>)> {
        match config.path {
            MlPath::Gp => {
                let pool = thinned(datasets.iter().flat_map(|d| d.y().iter()), BANDWIDTH_POOL_CAP);
                let kernel = config.gp.y_kernel.resolve_lenient(&pool)?;
                let embedder = Self { config: config.clone(), kernel, standardizer: None };
                let models = datasets
                    .par_iter()
                    .enumerate()
                    .map(|(l, d)| embedder.fit_model(d).map_err(|e| e.in_dataset(l)))
                    .collect::<Result<Vec<_>>>()?;
                Ok((embedder, models))
            }
            MlPath::Bnn => {
                let standardizer = Standardizer::fit(datasets);
                let mut embedder =
                    Self { config: config.clone(), kernel: KernelSpec::new(1.0)?, standardizer: Some(standardizer) };
                let models = datasets
                    .par_iter()
                    .enumerate()
                    .map(|(l, d)| embedder.fit_model(d).map_err(|e| e.in_dataset(l)))
                    .collect::<Result<Vec<_>>>()?;
                let pool = thinned(
                    models.iter().flat_map(|m| match m {
                        MlModel::Bnn(p) => p.samples.iter(),
                        MlModel::Gp(_) => [].iter(),
                    }),
                    BANDWIDTH_POOL_CAP,
                );
                embedder.kernel = config.bnn.xi_kernel.resolve_lenient(&pool)?;
                Ok((embedder, models))
            }
        }
    }

    pub fn fit_model(&self, dataset: &Dataset) -> Result<MlModel> {
        match self.config.path {
            MlPath::Gp => {
                let gp = &self.config.gp;
                Ok(MlModel::Gp(GpModel::fit(dataset, gp.x_kernel, Bandwidth::Fixed(self.kernel.bandwidth()), gp.lambda_prime)?))
            }
            MlPath::Bnn => {
                let st = self.standardizer.as_ref().ok_or_else(|| Error::invalid("BNN path needs a standardizer"))?;
                let scaled = st.transform(dataset)?;
                let mut widths = vec![dataset.x_dim()];
                widths.extend(&self.config.bnn.hidden);
                widths.push(dataset.y_dim());
                let arch = BnnArchitecture::new(widths.clone(), vec![true; widths.len() - 1])?;
                Ok(MlModel::Bnn(sample_posterior_mh(&scaled, &arch, &self.config.bnn.sampler)?))
            }
        }
    }

    pub fn embed(&self, model: &MlModel) -> Result<EmpiricalKernelMean> {
        match model {
            MlModel::Gp(gp) => gp.dataset_embedding(),
            MlModel::Bnn(p) => bnn_embedding(p, Bandwidth::Fixed(self.kernel.bandwidth())),
        }
    }

    /// Point prediction of the ML model at `x`.
    pub fn predict(&self, model: &MlModel, x: &[f64]) -> Result<Vec<f64>> {
        match model {
            MlModel::Gp(gp) => gp.predict_mean(x),
            MlModel::Bnn(p) => {
                let st = self.standardizer.as_ref().ok_or_else(|| Error::invalid("BNN path needs a standardizer"))?;
                let xs = st.scale_x(x);
                let mut acc = vec![0.0; p.arch.output_dim()];
                for xi in &p.samples {
                    for (a, v) in acc.iter_mut().zip(bnn_forward(&p.arch, xi, &xs)?) {
                        *a += v;
                    }
                }
                let n = p.samples.len() as f64;
                Ok(st.unscale_y(&acc.into_iter().map(|v| v / n).collect::<Vec<_>>()))
            }
        }
    }
}

/// Per-dataset embedding pairs from pre-learning.
#[derive(Debug, Clone)]
pub struct PreLearnResult {
    pub embedder: MlEmbedder,
    pub ml_models: Vec<MlModel>,
    pub ml_embeddings: Vec<EmpiricalKernelMean>,
    pub calibrations: Vec<Calibration>,
    pub theta_kernel: KernelSpec,
    /// Total simulator evaluations spent, `sum_l m * n_l`.
    pub simulator_calls: u64,
}

impl PreLearnResult {
    pub fn len(&self) -> usize {
        self.calibrations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calibrations.is_empty()
    }

    pub fn sim_embeddings(&self) -> Vec<EmpiricalKernelMean> {
        self.calibrations.iter().map(|c| c.posterior.clone()).collect()
    }
}

/// Resolves `k_theta` once for a run so every calibration shares it.
pub fn resolve_theta_kernel(prior: &PriorBox, abc: &AbcConfig) -> Result<KernelSpec> {
    match abc.theta_kernel {
        Bandwidth::Fixed(b) => KernelSpec::new(b),
        Bandwidth::MedianAuto => {
            let draws = sample_prior(prior, abc.m.max(2), derive_seed(abc.seed, &[tag::KERNEL]))?;
            KernelSpec::median(&draws)
        }
    }
}

/// Pre-learning over `datasets`. Every dataset is calibrated with the same
/// ABC seed, so all posteriors share prior draws and identical datasets give
/// identical pairs.
pub fn pre_learn(datasets: &[Dataset], sim: &dyn Simulator, config: &ExperimentConfig) -> Result<PreLearnResult> {
    if datasets.is_empty() {
        return Err(Error::invalid("pre-learning needs at least one dataset"));
    }
    let theta_kernel = resolve_theta_kernel(&config.prior, &config.abc)?;
    let abc = AbcConfig { theta_kernel: Bandwidth::Fixed(theta_kernel.bandwidth()), ..config.abc.clone() };
    let (embedder, ml_models) = MlEmbedder::prepare(&config.ml, datasets)?;
    let ml_embeddings = ml_models
        .iter()
        .enumerate()
        .map(|(l, m)| embedder.embed(m).map_err(|e| e.in_dataset(l)))
        .collect::<Result<Vec<_>>>()?;
    let calibrations = datasets
        .par_iter()
        .enumerate()
        .map(|(l, d)| run_calibration(sim, d, &config.prior, &abc).map_err(|e| e.in_dataset(l)))
        .collect::<Result<Vec<_>>>()?;
    let simulator_calls = calibrations.iter().map(|c| c.simulator_calls).sum();
    Ok(PreLearnResult { embedder, ml_models, ml_embeddings, calibrations, theta_kernel, simulator_calls })
}

/// Fits the bridging regressor on all pre-learned pairs.
pub fn train_bridge(result: &PreLearnResult, lambda: f64, sigma_mu: Bandwidth) -> Result<BridgingModel> {
    BridgingModel::fit(result.ml_embeddings.clone(), result.sim_embeddings(), lambda, sigma_mu)
        .map_err(|e| match e {
            Error::Singular(msg) => Error::Singular(format!("training the bridge on {} datasets: {msg}", result.len())),
            other => other,
        })
}

/// A trained model plus the context needed to embed new data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineModel {
    pub bridge: BridgingModel,
    pub embedder: MlEmbedder,
    pub herding: HerdingConfig,
}

impl PipelineModel {
    pub fn train(result: &PreLearnResult, config: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            bridge: train_bridge(result, config.bridge.lambda, config.bridge.sigma_mu)?,
            embedder: result.embedder.clone(),
            herding: config.herding(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("pipeline model JSON: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgePrediction {
    pub y_hat: Vec<f64>,
    pub theta_samples: Vec<Vec<f64>>,
    /// Per-coordinate `(mean, std)` of `theta_samples`.
    pub theta_summary: Vec<(f64, f64)>,
    pub mu_mb: EmpiricalKernelMean,
    pub v: Vec<f64>,
}

/// Prediction for a new dataset. Uses only the ML model and the trained
/// bridge; no simulator is involved.
pub fn bridge_predict(model: &PipelineModel, new_dataset: &Dataset, x_new: &[f64]) -> Result<BridgePrediction> {
    if new_dataset.is_empty() {
        return Err(Error::invalid("new dataset is empty"));
    }
    let ml = model.embedder.fit_model(new_dataset)?;
    let y_hat = model.embedder.predict(&ml, x_new)?;
    let embedding = model.embedder.embed(&ml)?;
    let bridged = model.bridge.predict(&embedding)?;
    let theta_samples = herd(&bridged.mean, &model.herding)?;
    Ok(BridgePrediction {
        y_hat,
        theta_summary: summarize(&theta_samples),
        theta_samples,
        mu_mb: bridged.mean,
        v: bridged.v,
    })
}

/// Inner products among all pre-learned embeddings, computed once so that
/// leave-one-out folds never touch atoms again.
#[derive(Debug, Clone)]
pub struct PoolGeometry {
    pub input_ip: DMatrix<f64>,
    pub output_ip: DMatrix<f64>,
}

impl PoolGeometry {
    pub fn new(result: &PreLearnResult) -> Result<Self> {
        Ok(Self { input_ip: inner_product_matrix(&result.ml_embeddings)?, output_ip: inner_product_matrix(&result.sim_embeddings())? })
    }
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// One held-out dataset predicted from a training subset.
#[derive(Debug, Clone)]
pub struct Fold {
    pub held_out: usize,
    pub train: Vec<usize>,
    pub model: BridgingModel,
    pub v: Vec<f64>,
    /// Gap between the bridged and the directly calibrated posterior.
    pub gap: NormGap,
}

/// Fits on `train` and bridges to `held_out`. The gap uses
/// `|sum v_l mu_l - mu*|^2 = v'Hv - 2 v'c + <mu*, mu*>` from the cached
/// inner products.
pub fn fit_fold(
    result: &PreLearnResult,
    geometry: &PoolGeometry,
    held_out: usize,
    train: &[usize],
    lambda: f64,
    sigma_mu: Bandwidth,
) -> Result<Fold> {
    if train.is_empty() || train.contains(&held_out) {
        return Err(Error::invalid("fold needs a nonempty training set without the held-out dataset"));
    }
    let ip = submatrix(&geometry.input_ip, train, train);
    let inputs = train.iter().map(|&i| result.ml_embeddings[i].clone()).collect();
    let outputs = train.iter().map(|&i| result.calibrations[i].posterior.clone()).collect();
    let model = BridgingModel::fit_with_inner_products(inputs, outputs, lambda, sigma_mu, &ip)
        .map_err(|e| e.in_dataset(held_out))?;
    let cross: Vec<f64> = train.iter().map(|&i| geometry.input_ip[(held_out, i)]).collect();
    let v = model.coefficients_from_inner(geometry.input_ip[(held_out, held_out)], &cross)?;
    let h = submatrix(&geometry.output_ip, train, train);
    let c: Vec<f64> = train.iter().map(|&i| geometry.output_ip[(i, held_out)]).collect();
    let vv = nalgebra::DVector::from_column_slice(&v);
    let vhv = (vv.transpose() * h * &vv)[(0, 0)];
    let vc: f64 = v.iter().zip(&c).map(|(a, b)| a * b).sum();
    let gap = NormGap {
        unit_norm_form: 2.0 * (1.0 - vc),
        exact: clamp_distance(vhv - 2.0 * vc + geometry.output_ip[(held_out, held_out)]),
    };
    Ok(Fold { held_out, train: train.to_vec(), model, v, gap })
}

/// The first `size` pool indices other than `held_out`.
pub fn training_indices(pool: usize, held_out: usize, size: usize) -> Vec<usize> {
    (0..pool).filter(|&i| i != held_out).take(size).collect()
}

/// Bridged versus direct calibration on one held-out dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeldOutComparison {
    pub index: usize,
    pub chi: Option<f64>,
    pub bridged_mean: Vec<f64>,
    pub direct_mean: Vec<f64>,
    pub gap: NormGap,
    pub v: Vec<f64>,
}

/// Leave-one-out over the pool: each dataset is bridged from the others
/// (or the first `train_size` of them) and both its bridged and its directly
/// calibrated posteriors are herded.
pub fn leave_one_out(
    result: &PreLearnResult,
    datasets: &[Dataset],
    bridge: &BridgeConfig,
    herding: &HerdingConfig,
    train_size: Option<usize>,
) -> Result<Vec<HeldOutComparison>> {
    let n = result.len();
    check_dim(n, datasets.len())?;
    if n < 2 {
        return Err(Error::invalid("leave-one-out needs at least two datasets"));
    }
    let geometry = PoolGeometry::new(result)?;
    let size = train_size.unwrap_or(n - 1).min(n - 1);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let fold = fit_fold(result, &geometry, i, &training_indices(n, i, size), bridge.lambda, bridge.sigma_mu)?;
            let bridged = fold.model.flatten(&fold.v)?;
            let mb = summarize(&herd(&bridged, herding)?);
            let direct = summarize(&herd(&result.calibrations[i].posterior, herding)?);
            Ok(HeldOutComparison {
                index: i,
                chi: datasets[i].meta.chi,
                bridged_mean: mb.iter().map(|s| s.0).collect(),
                direct_mean: direct.iter().map(|s| s.0).collect(),
                gap: fold.gap,
                v: fold.v,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub l: usize,
    pub mean_gap: f64,
    /// Sample standard deviation over folds (0 for a single fold).
    pub std_gap: f64,
    /// Mean gap of the prior-only embedding over the same folds.
    pub baseline: f64,
    /// Mean of `2 (1 - <mb, sim>)` over folds.
    pub mean_gap_unit_norm: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Prior-only baseline embedding: uniform weights over fresh prior draws.
pub fn prior_baseline(prior: &PriorBox, m: usize, seed: u64, theta_kernel: KernelSpec) -> Result<EmpiricalKernelMean> {
    EmpiricalKernelMean::uniform(sample_prior(prior, m, derive_seed(seed, &[tag::BASELINE]))?, theta_kernel)
}

/// Gap between bridged and directly calibrated posteriors as a function of
/// the number of training datasets. Every pool dataset is held out once; its
/// training set is the first `L` of the remaining datasets.
pub fn convergence_experiment(
    result: &PreLearnResult,
    l_grid: &[usize],
    bridge: &BridgeConfig,
    baseline: &EmpiricalKernelMean,
) -> Result<Vec<ConvergenceRow>> {
    let n = result.len();
    let max_l = l_grid.iter().copied().max().ok_or_else(|| Error::invalid("empty L grid"))?;
    if l_grid.contains(&0) {
        return Err(Error::invalid("L grid entries must be >= 1"));
    }
    if max_l + 1 > n {
        return Err(Error::invalid(format!("L = {max_l} needs {} datasets, have {n}", max_l + 1)));
    }
    let geometry = PoolGeometry::new(result)?;
    let baseline_gaps: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let sim = &result.calibrations[i].posterior;
            baseline.check_compatible(sim)?;
            Ok(clamp_distance(inner_unchecked(baseline, baseline) - 2.0 * inner_unchecked(baseline, sim) + geometry.output_ip[(i, i)]))
        })
        .collect::<Result<_>>()?;
    let (baseline_mean, _) = mean_std(&baseline_gaps);
    l_grid
        .iter()
        .map(|&l| {
            let folds = (0..n)
                .into_par_iter()
                .map(|i| fit_fold(result, &geometry, i, &training_indices(n, i, l), bridge.lambda, bridge.sigma_mu))
                .collect::<Result<Vec<_>>>()?;
            let exact: Vec<f64> = folds.iter().map(|f| f.gap.exact).collect();
            let unit: Vec<f64> = folds.iter().map(|f| f.gap.unit_norm_form).collect();
            let (mean_gap, std_gap) = mean_std(&exact);
            Ok(ConvergenceRow { l, mean_gap, std_gap, baseline: baseline_mean, mean_gap_unit_norm: mean_std(&unit).0 })
        })
        .collect()
}

/// CSV with header `L,mean_gap,std_gap,baseline`.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("L,mean_gap,std_gap,baseline\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.l, r.mean_gap, r.std_gap, r.baseline));
    }
    out
}

/// Leave-one-out selection of `lambda` over `grid` (all other datasets used
/// for training). Returns the best value and the mean gap per candidate.
pub fn select_lambda(result: &PreLearnResult, grid: &[f64], sigma_mu: Bandwidth) -> Result<(f64, Vec<(f64, f64)>)> {
    let n = result.len();
    if n < 2 || grid.is_empty() {
        return Err(Error::invalid("lambda selection needs >= 2 datasets and a nonempty grid"));
    }
    let geometry = PoolGeometry::new(result)?;
    let mut table = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let gaps = (0..n)
            .into_par_iter()
            .map(|i| Ok(fit_fold(result, &geometry, i, &training_indices(n, i, n - 1), lambda, sigma_mu)?.gap.exact))
            .collect::<Result<Vec<f64>>>();
        // an unusable lambda scores as infinitely bad
        let score = match gaps {
            Ok(g) => mean_std(&g).0,
            Err(Error::Singular(_)) | Err(Error::Dataset { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        table.push((lambda, score));
    }
    let best = table.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).map(|(l, _)| l).expect("nonempty grid");
    Ok((best, table))
}
