//! Integration tests for the command pipeline: determinism, error exits,
//! labeling, and the decision behavior of `predict`.

use std::path::{Path, PathBuf};
use std::process::Command;

use flexrec_cli::commands::{cmd_attack, cmd_eval, cmd_gen, cmd_grid, cmd_predict, cmd_train};
use flexrec_cli::config::ExperimentConfig;
use flexrec_core::data::triplet_means;
use flexrec_core::network::{load_model, ModelState};

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("flexrec-it-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        seed: 11,
        samples_per_class: 60,
        hidden_dims: vec![16, 16],
        batch_size: 32,
        epochs: 30,
        output_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn gen_split_sizes_and_byte_identical_rerun() {
    let dir = temp_dir("gen");
    let mut config = ExperimentConfig {
        samples_per_class: 500,
        seed: 42,
        output_dir: dir.join("a"),
        ..ExperimentConfig::default()
    };
    let out = cmd_gen(&config).unwrap();
    let train_rows = std::fs::read_to_string(&out.train_csv).unwrap().lines().count() - 1;
    let test_rows = std::fs::read_to_string(&out.test_csv).unwrap().lines().count() - 1;
    assert_eq!(train_rows, 1200);
    assert_eq!(test_rows, 300);

    config.output_dir = dir.join("b");
    let out2 = cmd_gen(&config).unwrap();
    assert_eq!(
        std::fs::read(&out.train_csv).unwrap(),
        std::fs::read(&out2.train_csv).unwrap()
    );
    assert_eq!(
        std::fs::read(&out.probes_csv).unwrap(),
        std::fs::read(&out2.probes_csv).unwrap()
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn full_split_leaves_empty_test_file() {
    let dir = temp_dir("split1");
    let mut config = small_config(&dir);
    config.train_fraction = 1.0;
    let out = cmd_gen(&config).unwrap();
    let test_text = std::fs::read_to_string(&out.test_csv).unwrap();
    assert_eq!(test_text.lines().count(), 1, "header only");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn train_eval_attack_are_deterministic_and_labeled() {
    let dir = temp_dir("determinism");
    let config_a = small_config(&dir.join("a"));
    let config_b = small_config(&dir.join("b"));

    for config in [&config_a, &config_b] {
        cmd_gen(config).unwrap();
        cmd_train(config).unwrap();
        cmd_eval(config).unwrap();
        cmd_attack(config).unwrap();
    }
    for file in [
        "model-reg.txt",
        "train_log-reg.csv",
        "eval_report.kv",
        "eval_report.txt",
        "ranking_sweep.csv",
        "attack_report.csv",
    ] {
        let a = std::fs::read(dir.join("a").join(file)).unwrap();
        let b = std::fs::read(dir.join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }

    let report = std::fs::read_to_string(dir.join("a").join("eval_report.kv")).unwrap();
    assert!(report.starts_with("run_label reg\n"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn ablation_outputs_are_labeled_no_reg() {
    let dir = temp_dir("ablation");
    let mut config = small_config(&dir);
    config.lambda_reg = 0.0;
    config.epochs = 5;
    cmd_gen(&config).unwrap();
    let out = cmd_train(&config).unwrap();
    assert!(out.model_file.ends_with("model-no-reg.txt"));
    assert!(out.log_file.ends_with("train_log-no-reg.csv"));
    let log = std::fs::read_to_string(&out.log_file).unwrap();
    assert!(log.starts_with("# run_label no-reg"));
    let report = cmd_eval(&config).unwrap();
    let kv = std::fs::read_to_string(&report.report_kv).unwrap();
    assert!(kv.starts_with("run_label no-reg\n"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn zero_epochs_model_equals_initialization() {
    let dir = temp_dir("zeroepochs");
    let mut config = small_config(&dir);
    config.epochs = 0;
    cmd_gen(&config).unwrap();
    let out = cmd_train(&config).unwrap();
    let trained = load_model(&out.model_file).unwrap();
    let init = ModelState::init(&config.network_config()).unwrap();
    let x = [1.5, -2.5];
    assert_eq!(init.forward(&x).unwrap(), trained.forward(&x).unwrap());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn eval_without_probes_skips_the_open_set_section() {
    let dir = temp_dir("noprobes");
    let config = small_config(&dir);
    cmd_gen(&config).unwrap();
    cmd_train(&config).unwrap();
    std::fs::remove_file(dir.join("probes.csv")).unwrap();
    let out = cmd_eval(&config).unwrap();
    let kv = std::fs::read_to_string(&out.report_kv).unwrap();
    assert!(kv.contains("open_set_section skipped"));
    assert!(!kv.contains("open_auroc"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn grid_files_are_consistent_with_the_mass_identity() {
    let dir = temp_dir("grid");
    let mut config = small_config(&dir);
    config.grid_resolution = 20;
    cmd_gen(&config).unwrap();
    cmd_train(&config).unwrap();
    let out = cmd_grid(&config).unwrap();

    let parse = |path: &Path| -> Vec<f64> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
            .collect()
    };
    let beliefs: Vec<Vec<f64>> = out.belief_files.iter().map(|p| parse(p)).collect();
    let confusion = parse(&out.confusion_file);
    let ignorance = parse(&out.ignorance_file);
    assert_eq!(confusion.len(), 400);
    assert_eq!(ignorance.len(), 400);
    for cell in 0..400 {
        let belief_sum: f64 = beliefs.iter().map(|b| b[cell]).sum();
        let total = belief_sum + confusion[cell] + ignorance[cell];
        // Serialized with 12 significant digits, so the identity holds to
        // the serialization precision rather than 1e-9 of the raw values.
        assert!((total - 1.0).abs() < 1e-9, "cell {cell}: {total}");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn predict_modes_follow_the_threshold_contract() {
    let dir = temp_dir("predict");
    let config = small_config(&dir);
    cmd_gen(&config).unwrap();
    cmd_train(&config).unwrap();

    // Class-mean inputs are confidently single at a moderate threshold.
    let means_file = dir.join("means.csv");
    flexrec_core::data::write_features_csv(
        &means_file,
        &triplet_means().iter().map(|m| m.to_vec()).collect::<Vec<_>>(),
    )
    .unwrap();
    let mut config_means = config.clone();
    config_means.features_file = Some(means_file);
    config_means.belief_threshold = 0.5;
    let out = cmd_predict(&config_means).unwrap();
    let lines: Vec<String> = std::fs::read_to_string(&out.predictions_csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(String::from)
        .collect();
    assert_eq!(lines.len(), 3);
    let singles = lines.iter().filter(|l| l.starts_with("single,")).count();
    assert!(singles >= 2, "class means should be mostly single: {lines:?}");

    // Threshold zero never rejects.
    let mut config_zero = config.clone();
    config_zero.features_file = Some(dir.join("probes.csv"));
    config_zero.belief_threshold = 0.0;
    let out = cmd_predict(&config_zero).unwrap();
    let text = std::fs::read_to_string(&out.predictions_csv).unwrap();
    assert!(!text.contains("rejected"));

    // A threshold above 1 - ignorance forces rejection everywhere.
    let mut config_high = config.clone();
    config_high.features_file = Some(dir.join("probes.csv"));
    config_high.belief_threshold = 1.0;
    let out = cmd_predict(&config_high).unwrap();
    let rejected = std::fs::read_to_string(&out.predictions_csv)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("rejected,"))
        .count();
    assert!(rejected > 450, "almost all probes reject at threshold 1");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn binary_reports_errors_with_nonzero_exit() {
    let dir = temp_dir("exitcodes");
    let binary = env!("CARGO_BIN_EXE_flexrec");

    // Missing training data.
    let output = Command::new(binary)
        .args(["train", "--output-dir"])
        .arg(dir.join("none"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("error"));

    // Unknown config key.
    let bad_config = dir.join("bad.cfg");
    std::fs::write(&bad_config, "not_a_key = 1\n").unwrap();
    let output = Command::new(binary)
        .args(["gen", "--config"])
        .arg(&bad_config)
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("unknown config key"));

    // Happy path exits zero.
    let output = Command::new(binary)
        .args(["gen", "--samples-per-class", "10", "--output-dir"])
        .arg(dir.join("ok"))
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn output_dir_env_var_overrides_config() {
    // apply_env is what main() calls after flag merging.
    let dir = temp_dir("envvar");
    let mut config = small_config(&dir);
    std::env::set_var("FLEXREC_OUTPUT_DIR", dir.join("from-env"));
    config.apply_env();
    std::env::remove_var("FLEXREC_OUTPUT_DIR");
    assert_eq!(config.output_dir, dir.join("from-env"));
    std::fs::remove_dir_all(&dir).unwrap();
}
