//! Experiment configuration: a flat key-value file with typed keys, strict
//! unknown-key rejection, and CLI flag overrides. The output directory can
//! additionally be overridden through `FLEXREC_OUTPUT_DIR`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use flexrec_core::loss::LossWeights;
use flexrec_core::network::{Activation, NetworkConfig};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "FLEXREC_OUTPUT_DIR";

/// Everything a command run can depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub samples_per_class: usize,
    pub train_fraction: f64,
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    pub activation: Activation,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda_reg: f64,
    pub lambda_kl_max: f64,
    pub kl_warmup_fraction: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_resolution: usize,
    pub probe_radius: f64,
    pub probe_count: usize,
    pub fgsm_epsilons: Vec<f64>,
    pub belief_threshold: f64,
    pub output_dir: PathBuf,
    pub train_file: Option<PathBuf>,
    pub test_file: Option<PathBuf>,
    pub probes_file: Option<PathBuf>,
    pub model_file: Option<PathBuf>,
    pub features_file: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let net = NetworkConfig::default();
        ExperimentConfig {
            seed: net.seed,
            samples_per_class: 500,
            train_fraction: 0.8,
            input_dim: net.input_dim,
            hidden_dims: net.hidden_dims.clone(),
            num_classes: net.num_classes,
            activation: net.activation,
            learning_rate: net.learning_rate,
            momentum: net.momentum,
            batch_size: net.batch_size,
            epochs: net.epochs,
            lambda_reg: net.loss.lambda_reg,
            lambda_kl_max: net.loss.lambda_kl_max,
            kl_warmup_fraction: net.loss.kl_warmup_fraction,
            grid_min: -20.0,
            grid_max: 20.0,
            grid_resolution: 200,
            probe_radius: 30.0,
            probe_count: 500,
            fgsm_epsilons: vec![0.0, 0.1, 0.2, 0.4],
            belief_threshold: 0.5,
            output_dir: PathBuf::from("out"),
            train_file: None,
            test_file: None,
            probes_file: None,
            model_file: None,
            features_file: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a `key = value` file; unknown keys are an error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config = ExperimentConfig::default();
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    path.display(),
                    lineno + 1
                );
            };
            let key = key.trim().to_string();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                bail!("{}: duplicate key `{key}`", path.display());
            }
        }
        for (key, value) in entries {
            config
                .set(&key, &value)
                .with_context(|| format!("{}: key `{key}`", path.display()))?;
        }
        Ok(config)
    }

    /// Sets one typed key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = value.parse().context("expected unsigned integer")?,
            "samples_per_class" => {
                self.samples_per_class = value.parse().context("expected unsigned integer")?
            }
            "train_fraction" => self.train_fraction = parse_f64(value)?,
            "input_dim" => self.input_dim = value.parse().context("expected unsigned integer")?,
            "hidden_dims" => self.hidden_dims = parse_usize_list(value)?,
            "num_classes" => {
                self.num_classes = value.parse().context("expected unsigned integer")?
            }
            "activation" => self.activation = Activation::parse(value)?,
            "learning_rate" => self.learning_rate = parse_f64(value)?,
            "momentum" => self.momentum = parse_f64(value)?,
            "batch_size" => self.batch_size = value.parse().context("expected unsigned integer")?,
            "epochs" => self.epochs = value.parse().context("expected unsigned integer")?,
            "lambda_reg" => self.lambda_reg = parse_f64(value)?,
            "lambda_kl_max" => self.lambda_kl_max = parse_f64(value)?,
            "kl_warmup_fraction" => self.kl_warmup_fraction = parse_f64(value)?,
            "grid_min" => self.grid_min = parse_f64(value)?,
            "grid_max" => self.grid_max = parse_f64(value)?,
            "grid_resolution" => {
                self.grid_resolution = value.parse().context("expected unsigned integer")?
            }
            "probe_radius" => self.probe_radius = parse_f64(value)?,
            "probe_count" => {
                self.probe_count = value.parse().context("expected unsigned integer")?
            }
            "fgsm_epsilons" => self.fgsm_epsilons = parse_f64_list(value)?,
            "belief_threshold" => self.belief_threshold = parse_f64(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "train_file" => self.train_file = Some(PathBuf::from(value)),
            "test_file" => self.test_file = Some(PathBuf::from(value)),
            "probes_file" => self.probes_file = Some(PathBuf::from(value)),
            "model_file" => self.model_file = Some(PathBuf::from(value)),
            "features_file" => self.features_file = Some(PathBuf::from(value)),
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    /// Applies the environment override for the output directory.
    pub fn apply_env(&mut self) {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            input_dim: self.input_dim,
            hidden_dims: self.hidden_dims.clone(),
            num_classes: self.num_classes,
            activation: self.activation,
            seed: self.seed,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            batch_size: self.batch_size,
            epochs: self.epochs,
            loss: LossWeights {
                lambda_reg: self.lambda_reg,
                lambda_kl_max: self.lambda_kl_max,
                kl_warmup_fraction: self.kl_warmup_fraction,
            },
        }
    }

    /// Tag that distinguishes ablation runs in file names and reports.
    pub fn run_label(&self) -> &'static str {
        if self.lambda_reg == 0.0 {
            "no-reg"
        } else {
            "reg"
        }
    }

    pub fn resolve_train_file(&self) -> PathBuf {
        self.train_file
            .clone()
            .unwrap_or_else(|| self.output_dir.join("train.csv"))
    }

    pub fn resolve_test_file(&self) -> PathBuf {
        self.test_file
            .clone()
            .unwrap_or_else(|| self.output_dir.join("test.csv"))
    }

    pub fn resolve_probes_file(&self) -> PathBuf {
        self.probes_file
            .clone()
            .unwrap_or_else(|| self.output_dir.join("probes.csv"))
    }

    pub fn resolve_model_file(&self) -> PathBuf {
        self.model_file.clone().unwrap_or_else(|| {
            self.output_dir
                .join(format!("model-{}.txt", self.run_label()))
        })
    }
}

fn parse_f64(value: &str) -> Result<f64> {
    let parsed: f64 = value.parse().context("expected a number")?;
    if !parsed.is_finite() {
        bail!("expected a finite number, got {parsed}");
    }
    Ok(parsed)
}

fn parse_usize_list(value: &str) -> Result<Vec<usize>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .with_context(|| format!("bad list entry `{v}`"))
        })
        .collect()
}

fn parse_f64_list(value: &str) -> Result<Vec<f64>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| parse_f64(v.trim()))
        .collect()
}
