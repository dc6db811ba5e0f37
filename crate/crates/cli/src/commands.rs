use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mb_core::herding::{herd, samples_to_csv, summarize};
use mb_core::pipeline::{
    bridge_predict, convergence_csv, convergence_experiment, generate_datasets, pre_learn, prior_baseline,
    resolve_theta_kernel, ExperimentConfig, PipelineModel,
};
use mb_core::simulators::{Counted, Dataset, Ledger, Simulator};
use mb_core::{run_calibration, AbcConfig, Bandwidth};

use crate::error::CliError;
use crate::manifest::{manifest_beside, sha256_hex, write_atomic, RunManifest, Seeds};

const DEFAULT_L_GRID: [usize; 5] = [1, 5, 10, 20, 30];

struct LoadedConfig {
    config: ExperimentConfig,
    hash: String,
}

/// `--seed` replaces both the dataset seed and the calibration seed.
fn load_config(path: &Path, seed: Option<u64>) -> Result<LoadedConfig, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
        config.abc.seed = s;
    }
    Ok(LoadedConfig { config, hash: sha256_hex(&bytes) })
}

fn manifest_for(command: &str, loaded: &LoadedConfig) -> RunManifest {
    let mut m = RunManifest::new(command);
    m.config_hash = Some(loaded.hash.clone());
    m.seeds = Some(Seeds { data: loaded.config.seed, abc: loaded.config.abc.seed });
    m
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn counted(config: &ExperimentConfig) -> Counted<dyn Simulator> {
    Counted::new(config.simulator.build(), Ledger::new())
}

pub fn dataset_file_name(index: usize) -> String {
    format!("dataset_{index:03}.csv")
}

pub fn gen_data(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let started = Instant::now();
    let loaded = load_config(config_path, seed)?;
    let sim = counted(&loaded.config);
    let datasets = generate_datasets(&loaded.config, &sim)?;
    create_dir(out_dir)?;
    let mut manifest = manifest_for("gen-data", &loaded);
    for (l, d) in datasets.iter().enumerate() {
        let path = out_dir.join(dataset_file_name(l));
        d.save(&path)?;
        manifest.artifacts.push(Dataset::sidecar_path(&path));
        manifest.artifacts.push(path);
    }
    manifest.simulator_calls = sim.ledger().calls();
    println!("wrote {} datasets to {}", datasets.len(), out_dir.display());
    manifest.finish(started, &out_dir.join("manifest.json"))
}

pub fn calibrate(dataset_path: &Path, config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let started = Instant::now();
    let loaded = load_config(config_path, seed)?;
    let config = &loaded.config;
    let dataset = Dataset::load(dataset_path)?;
    let sim = counted(config);
    let theta_kernel = resolve_theta_kernel(&config.prior, &config.abc)?;
    let abc = AbcConfig { theta_kernel: Bandwidth::Fixed(theta_kernel.bandwidth()), ..config.abc.clone() };
    let calibration = run_calibration(&sim, &dataset, &config.prior, &abc)?;
    let samples = herd(&calibration.posterior, &config.herding())?;
    create_dir(out_dir)?;
    let posterior_path = out_dir.join("posterior.json");
    let samples_path = out_dir.join("theta_samples.csv");
    write_atomic(&posterior_path, serde_json::to_string_pretty(&calibration).expect("serializes").as_bytes())?;
    write_atomic(&samples_path, samples_to_csv(&samples).as_bytes())?;
    print_summary(&samples);
    println!("simulator calls: {}", sim.ledger().calls());
    let mut manifest = manifest_for("calibrate", &loaded);
    manifest.artifacts = vec![posterior_path, samples_path];
    manifest.simulator_calls = sim.ledger().calls();
    manifest.finish(started, &out_dir.join("manifest.json"))
}

/// Dataset CSVs in `dir`, sorted by file name.
fn dataset_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("{}: no dataset CSV files", dir.display())));
    }
    Ok(files)
}

pub fn bridge(prelearn_dir: &Path, config_path: &Path, model_out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let started = Instant::now();
    let loaded = load_config(config_path, seed)?;
    let datasets = dataset_files(prelearn_dir)?
        .iter()
        .map(|p| Dataset::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let sim = counted(&loaded.config);
    let result = pre_learn(&datasets, &sim, &loaded.config)?;
    let model = PipelineModel::train(&result, &loaded.config)?;
    if let Some(parent) = model_out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_atomic(model_out, model.to_json().as_bytes())?;
    println!(
        "trained on {} datasets (sigma_mu {:.6}, lambda {:e}); simulator calls: {}",
        datasets.len(),
        model.bridge.sigma_mu(),
        model.bridge.lambda(),
        sim.ledger().calls()
    );
    let mut manifest = manifest_for("bridge", &loaded);
    manifest.artifacts = vec![model_out.to_path_buf()];
    manifest.simulator_calls = sim.ledger().calls();
    manifest.finish(started, &manifest_beside(model_out))
}

pub fn predict(model_path: &Path, dataset_path: &Path, x_new: &[f64], out_dir: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let text = fs::read_to_string(model_path).map_err(|e| CliError::io(model_path, e))?;
    let model = PipelineModel::from_json(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", model_path.display())))?;
    let dataset = Dataset::load(dataset_path)?;
    let prediction = bridge_predict(&model, &dataset, x_new)?;
    create_dir(out_dir)?;
    let samples_path = out_dir.join("theta_samples.csv");
    let prediction_path = out_dir.join("prediction.json");
    write_atomic(&samples_path, samples_to_csv(&prediction.theta_samples).as_bytes())?;
    write_atomic(&prediction_path, serde_json::to_string_pretty(&prediction).expect("serializes").as_bytes())?;
    let y: Vec<String> = prediction.y_hat.iter().map(|v| format!("{v:.6}")).collect();
    println!("y_hat at {x_new:?}: {}", y.join(", "));
    print_summary(&prediction.theta_samples);
    let mut manifest = RunManifest::new("predict");
    manifest.artifacts = vec![samples_path, prediction_path];
    manifest.finish(started, &out_dir.join("manifest.json"))
}

pub fn convergence(config_path: &Path, out_csv: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let started = Instant::now();
    let loaded = load_config(config_path, seed)?;
    let config = &loaded.config;
    let grid: Vec<usize> = if config.l_grid.is_empty() {
        DEFAULT_L_GRID.iter().copied().filter(|&l| l < config.datasets).collect()
    } else {
        config.l_grid.clone()
    };
    if grid.is_empty() || grid.iter().any(|&l| l >= config.datasets) {
        return Err(mb_core::Error::Config(format!(
            "convergence study needs every L below datasets = {} (grid {grid:?})",
            config.datasets
        ))
        .into());
    }
    let sim = counted(config);
    let datasets = generate_datasets(config, &sim)?;
    let result = pre_learn(&datasets, &sim, config)?;
    let baseline = prior_baseline(&config.prior, config.abc.m, config.abc.seed, result.theta_kernel)?;
    let rows = convergence_experiment(&result, &grid, &config.bridge, &baseline)?;
    if let Some(parent) = out_csv.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_atomic(out_csv, convergence_csv(&rows).as_bytes())?;
    println!("{:>4}  {:>12}  {:>12}  {:>12}", "L", "mean gap", "std gap", "baseline");
    for r in &rows {
        println!("{:>4}  {:>12.4e}  {:>12.4e}  {:>12.4e}", r.l, r.mean_gap, r.std_gap, r.baseline);
    }
    let mut manifest = manifest_for("convergence", &loaded);
    manifest.artifacts = vec![out_csv.to_path_buf()];
    manifest.simulator_calls = sim.ledger().calls();
    manifest.finish(started, &manifest_beside(out_csv))
}

fn print_summary(samples: &[Vec<f64>]) {
    println!("{:<10} {:>12} {:>12}", "parameter", "mean", "std");
    for (k, (mean, std)) in summarize(samples).iter().enumerate() {
        println!("{:<10} {:>12.6} {:>12.6}", format!("theta{}", k + 1), mean, std);
    }
}
