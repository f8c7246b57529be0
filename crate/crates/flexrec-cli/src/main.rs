//! `flexrec`: train and probe an evidential classifier whose uncertainty
//! splits into confusion and ignorance, and emit flexible predictive sets.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use flexrec_cli::commands;
use flexrec_cli::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "flexrec",
    about = "Flexible recognition with evidential confusion/ignorance estimates",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flag overrides shared by every subcommand; unset flags fall back to the
/// config file and then to defaults.
#[derive(Args, Default)]
struct Overrides {
    /// Key-value experiment config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for generation, shuffling, and initialization
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (FLEXREC_OUTPUT_DIR overrides this)
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl Overrides {
    fn build(&self, extra: impl FnOnce(&mut ExperimentConfig) -> Result<()>) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        extra(&mut config)?;
        config.apply_env();
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic three-Gaussian dataset, split it, and write
    /// train/test CSVs plus far-field probes
    Gen {
        #[command(flatten)]
        common: Overrides,
        /// Samples drawn per class
        #[arg(long)]
        samples_per_class: Option<usize>,
        /// Fraction of samples in the train split
        #[arg(long)]
        train_fraction: Option<f64>,
        /// Radius of the far-field probe circle
        #[arg(long)]
        probe_radius: Option<f64>,
        /// Number of far-field probes
        #[arg(long)]
        probe_count: Option<usize>,
    },
    /// Train the plausibility network and persist model plus training log
    Train {
        #[command(flatten)]
        common: Overrides,
        /// Training CSV (defaults to <output_dir>/train.csv)
        #[arg(long)]
        train_file: Option<PathBuf>,
        /// Comma-separated hidden layer sizes, e.g. 64,64
        #[arg(long)]
        hidden_dims: Option<String>,
        /// Hidden activation: relu or tanh
        #[arg(long)]
        activation: Option<String>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        momentum: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Regularization weight; 0 runs the no-reg ablation
        #[arg(long)]
        lambda_reg: Option<f64>,
        #[arg(long)]
        lambda_kl_max: Option<f64>,
        #[arg(long)]
        kl_warmup_fraction: Option<f64>,
        /// Where to write the model (defaults to <output_dir>/model-<label>.txt)
        #[arg(long)]
        model_file: Option<PathBuf>,
    },
    /// Evaluate a model: closed-set metrics, confusion ranking sweep, and
    /// the ignorance-based open-set section when probes exist
    Eval {
        #[command(flatten)]
        common: Overrides,
        #[arg(long)]
        model_file: Option<PathBuf>,
        #[arg(long)]
        test_file: Option<PathBuf>,
        #[arg(long)]
        probes_file: Option<PathBuf>,
    },
    /// Export per-quantity heatmap files over a 2-D lattice
    Grid {
        #[command(flatten)]
        common: Overrides,
        #[arg(long)]
        model_file: Option<PathBuf>,
        #[arg(long)]
        grid_min: Option<f64>,
        #[arg(long)]
        grid_max: Option<f64>,
        #[arg(long)]
        grid_resolution: Option<usize>,
    },
    /// FGSM robustness sweep over a list of perturbation strengths
    Attack {
        #[command(flatten)]
        common: Overrides,
        #[arg(long)]
        model_file: Option<PathBuf>,
        #[arg(long)]
        test_file: Option<PathBuf>,
        /// Comma-separated epsilon list, e.g. 0,0.1,0.2,0.4
        #[arg(long)]
        epsilons: Option<String>,
    },
    /// Emit flexible predictive sets (reject / single / combined) for a
    /// feature file
    Predict {
        #[command(flatten)]
        common: Overrides,
        #[arg(long)]
        model_file: Option<PathBuf>,
        #[arg(long)]
        features_file: Option<PathBuf>,
        /// Belief threshold the accumulated mass must reach
        #[arg(long)]
        threshold: Option<f64>,
    },
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen {
            common,
            samples_per_class,
            train_fraction,
            probe_radius,
            probe_count,
        } => {
            let config = common.build(|c| {
                if let Some(v) = samples_per_class {
                    c.samples_per_class = v;
                }
                if let Some(v) = train_fraction {
                    c.train_fraction = v;
                }
                if let Some(v) = probe_radius {
                    c.probe_radius = v;
                }
                if let Some(v) = probe_count {
                    c.probe_count = v;
                }
                Ok(())
            })?;
            commands::cmd_gen(&config)?;
        }
        Command::Train {
            common,
            train_file,
            hidden_dims,
            activation,
            learning_rate,
            momentum,
            batch_size,
            epochs,
            lambda_reg,
            lambda_kl_max,
            kl_warmup_fraction,
            model_file,
        } => {
            let config = common.build(|c| {
                if let Some(v) = train_file {
                    c.train_file = Some(v);
                }
                if let Some(v) = hidden_dims {
                    c.set("hidden_dims", &v)?;
                }
                if let Some(v) = activation {
                    c.set("activation", &v)?;
                }
                if let Some(v) = learning_rate {
                    c.learning_rate = v;
                }
                if let Some(v) = momentum {
                    c.momentum = v;
                }
                if let Some(v) = batch_size {
                    c.batch_size = v;
                }
                if let Some(v) = epochs {
                    c.epochs = v;
                }
                if let Some(v) = lambda_reg {
                    c.lambda_reg = v;
                }
                if let Some(v) = lambda_kl_max {
                    c.lambda_kl_max = v;
                }
                if let Some(v) = kl_warmup_fraction {
                    c.kl_warmup_fraction = v;
                }
                if let Some(v) = model_file {
                    c.model_file = Some(v);
                }
                Ok(())
            })?;
            commands::cmd_train(&config)?;
        }
        Command::Eval {
            common,
            model_file,
            test_file,
            probes_file,
        } => {
            let config = common.build(|c| {
                if let Some(v) = model_file {
                    c.model_file = Some(v);
                }
                if let Some(v) = test_file {
                    c.test_file = Some(v);
                }
                if let Some(v) = probes_file {
                    c.probes_file = Some(v);
                }
                Ok(())
            })?;
            commands::cmd_eval(&config)?;
        }
        Command::Grid {
            common,
            model_file,
            grid_min,
            grid_max,
            grid_resolution,
        } => {
            let config = common.build(|c| {
                if let Some(v) = model_file {
                    c.model_file = Some(v);
                }
                if let Some(v) = grid_min {
                    c.grid_min = v;
                }
                if let Some(v) = grid_max {
                    c.grid_max = v;
                }
                if let Some(v) = grid_resolution {
                    c.grid_resolution = v;
                }
                Ok(())
            })?;
            commands::cmd_grid(&config)?;
        }
        Command::Attack {
            common,
            model_file,
            test_file,
            epsilons,
        } => {
            let config = common.build(|c| {
                if let Some(v) = model_file {
                    c.model_file = Some(v);
                }
                if let Some(v) = test_file {
                    c.test_file = Some(v);
                }
                if let Some(v) = epsilons {
                    c.set("fgsm_epsilons", &v)?;
                }
                Ok(())
            })?;
            commands::cmd_attack(&config)?;
        }
        Command::Predict {
            common,
            model_file,
            features_file,
            threshold,
        } => {
            let config = common.build(|c| {
                if let Some(v) = model_file {
                    c.model_file = Some(v);
                }
                if let Some(v) = features_file {
                    c.features_file = Some(v);
                }
                if let Some(v) = threshold {
                    c.belief_threshold = v;
                }
                Ok(())
            })?;
            commands::cmd_predict(&config)?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
