//! The command implementations behind the CLI: dataset generation, training,
//! evaluation, heatmap export, adversarial sweeps, and flexible prediction.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use flexrec_core::data::{
    far_field_probes, gen_gaussian_triplet, grid_points, read_features_csv, LabeledDataset,
};
use flexrec_core::decision::{predict_flexible, ranking_sweep};
use flexrec_core::metrics::{
    aupr, auroc, macro_f1_open, tpr95_threshold, weighted_confusion_auroc, OpenSetLabel,
    PositiveClass, ScoredBinary,
};
use flexrec_core::network::{fgsm_attack, load_model, save_model, train, ModelState};
use flexrec_core::opinion::HyperOpinion;

use crate::config::ExperimentConfig;
use crate::report::{fmt_g12, KeyValueReport};

/// Paths produced by `gen`.
#[derive(Debug, Clone)]
pub struct GenOutputs {
    pub train_csv: PathBuf,
    pub test_csv: PathBuf,
    pub probes_csv: PathBuf,
}

/// Generates the synthetic dataset, splits it, and writes train/test CSVs
/// with metadata sidecars plus the far-field probe file.
pub fn cmd_gen(config: &ExperimentConfig) -> Result<GenOutputs> {
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    let dataset = gen_gaussian_triplet(config.seed, config.samples_per_class);
    let (train_split, test_split) = dataset.split(config.train_fraction, config.seed)?;
    if test_split.is_empty() {
        eprintln!("warning: train_fraction {} leaves the test split empty", config.train_fraction);
    }

    let train_csv = config.output_dir.join("train.csv");
    let test_csv = config.output_dir.join("test.csv");
    train_split.write_csv(&train_csv)?;
    train_split.write_metadata(&config.output_dir.join("train.meta"))?;
    test_split.write_csv(&test_csv)?;
    test_split.write_metadata(&config.output_dir.join("test.meta"))?;

    let probes = far_field_probes(&dataset, config.probe_radius, config.probe_count, config.seed)?;
    let probes_csv = config.output_dir.join("probes.csv");
    flexrec_core::data::write_features_csv(&probes_csv, &probes)?;

    println!(
        "gen: wrote {} train rows, {} test rows, {} probes under {}",
        train_split.len(),
        test_split.len(),
        probes.len(),
        config.output_dir.display()
    );
    Ok(GenOutputs {
        train_csv,
        test_csv,
        probes_csv,
    })
}

/// Paths produced by `train`.
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub model_file: PathBuf,
    pub log_file: PathBuf,
}

/// Trains on the configured dataset and persists the model plus a per-epoch
/// log; ablation runs (`lambda_reg = 0`) are labeled `no-reg` in both.
pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainOutputs> {
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    let train_path = config.resolve_train_file();
    let meta_path = train_path.with_extension("meta");
    let train_set = LabeledDataset::read_csv(&train_path, Some(&meta_path))
        .with_context(|| format!("loading training data from {}", train_path.display()))?;

    let net_config = config.network_config();
    let (state, log) = train(&net_config, &train_set)?;

    let model_file = config.resolve_model_file();
    save_model(&state, &model_file)?;

    let label = config.run_label();
    let log_file = config.output_dir.join(format!("train_log-{label}.csv"));
    let mut out = String::new();
    let _ = writeln!(out, "# run_label {label}");
    let _ = writeln!(
        out,
        "epoch,edl,reg,kl,total,lambda_kl_effective,train_accuracy"
    );
    for record in &log {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            record.epoch,
            fmt_g12(record.edl),
            fmt_g12(record.reg),
            fmt_g12(record.kl),
            fmt_g12(record.total),
            fmt_g12(record.lambda_kl_effective),
            fmt_g12(record.train_accuracy),
        );
    }
    std::fs::write(&log_file, out).with_context(|| format!("writing {}", log_file.display()))?;

    println!(
        "train [{label}]: {} epochs on {} samples -> {}",
        net_config.epochs,
        train_set.len(),
        model_file.display()
    );
    Ok(TrainOutputs {
        model_file,
        log_file,
    })
}

fn load_model_for(config: &ExperimentConfig) -> Result<ModelState> {
    let path = config.resolve_model_file();
    load_model(&path).with_context(|| format!("loading model {}", path.display()))
}

fn opinions_for(state: &ModelState, features: &[Vec<f64>]) -> Result<Vec<HyperOpinion>> {
    features
        .iter()
        .map(|x| Ok(state.forward(x)?.hyper_opinion()?))
        .collect()
}

/// Classes ranked by plausibility, best first.
fn plausibility_ranking(opinion: &HyperOpinion) -> Vec<usize> {
    let values = opinion.source().values();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)));
    order
}

fn model_run_label(state: &ModelState) -> &'static str {
    if state.config().loss.lambda_reg == 0.0 {
        "no-reg"
    } else {
        "reg"
    }
}

/// Paths produced by `eval`.
#[derive(Debug, Clone)]
pub struct EvalOutputs {
    pub report_kv: PathBuf,
    pub report_txt: PathBuf,
    pub sweep_csv: PathBuf,
}

/// Closed-set metrics, the confusion-ranking sweep over misclassified
/// samples, and — when probes are available — the ignorance-based open-set
/// section (TPR-95 threshold, Macro-F1 over K+1, AUROC, AUPR both ways).
pub fn cmd_eval(config: &ExperimentConfig) -> Result<EvalOutputs> {
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    let state = load_model_for(config)?;
    let test_path = config.resolve_test_file();
    let test_set = LabeledDataset::read_csv(&test_path, Some(&test_path.with_extension("meta")))
        .with_context(|| format!("loading test data from {}", test_path.display()))?;
    if test_set.is_empty() {
        bail!("test set {} is empty", test_path.display());
    }

    let opinions = opinions_for(&state, test_set.features())?;
    let k = state.config().num_classes;

    let mut top1_hits = 0usize;
    let mut top2_hits = 0usize;
    let mut mis_opinions = Vec::new();
    let mut mis_predictions = Vec::new();
    let mut mis_truths = Vec::new();
    let mut closed_ignorance = Vec::with_capacity(opinions.len());
    for (opinion, &label) in opinions.iter().zip(test_set.labels()) {
        let ranking = plausibility_ranking(opinion);
        if ranking[0] == label {
            top1_hits += 1;
        } else {
            mis_opinions.push(opinion.clone());
            mis_predictions.push(ranking[0]);
            mis_truths.push(label);
        }
        if ranking[..2.min(k)].contains(&label) {
            top2_hits += 1;
        }
        closed_ignorance.push(opinion.ignorance());
    }
    let n = test_set.len() as f64;

    let mut report = KeyValueReport::new();
    report.text("run_label", model_run_label(&state));
    report.integer("test_samples", test_set.len());
    report.number("accuracy", top1_hits as f64 / n);
    report.number("top2_accuracy", top2_hits as f64 / n);
    report.integer("misclassified", mis_truths.len());

    match weighted_confusion_auroc(&mis_opinions, &mis_predictions, &mis_truths) {
        Ok(value) => report.number("weighted_confusion_auroc", value),
        Err(err) => report.text("weighted_confusion_auroc", format!("skipped ({err})")),
    }

    let sweep = ranking_sweep(&mis_opinions, &mis_predictions, &mis_truths)?;
    let sweep_csv = config.output_dir.join("ranking_sweep.csv");
    let mut sweep_out = String::from("avg_predictions,precision,recall,precision_defined\n");
    for point in &sweep {
        let _ = writeln!(
            sweep_out,
            "{},{},{},{}",
            fmt_g12(point.avg_predictions),
            fmt_g12(point.precision),
            fmt_g12(point.recall),
            point.precision_defined,
        );
    }
    std::fs::write(&sweep_csv, sweep_out)
        .with_context(|| format!("writing {}", sweep_csv.display()))?;
    report.integer("ranking_sweep_points", sweep.len());

    let probes_path = config.resolve_probes_file();
    if probes_path.exists() {
        let probes = read_features_csv(&probes_path)?;
        let probe_opinions = opinions_for(&state, &probes)?;
        let threshold = tpr95_threshold(&closed_ignorance)?;

        let mut predictions = Vec::new();
        let mut truths = Vec::new();
        for (opinion, &label) in opinions.iter().zip(test_set.labels()) {
            predictions.push(open_set_prediction(opinion, threshold));
            truths.push(OpenSetLabel::Known(label));
        }
        for opinion in &probe_opinions {
            predictions.push(open_set_prediction(opinion, threshold));
            truths.push(OpenSetLabel::Unknown);
        }
        let f1 = macro_f1_open(&predictions, &truths, k)?;

        let mut scores = closed_ignorance.clone();
        let mut flags = vec![false; scores.len()];
        scores.extend(probe_opinions.iter().map(|o| o.ignorance()));
        flags.extend(std::iter::repeat_n(true, probe_opinions.len()));
        let scored = ScoredBinary::new(scores, flags)?;

        report.text("open_set_section", "present");
        report.integer("probe_samples", probe_opinions.len());
        report.number("tpr95_threshold", threshold);
        report.number("macro_f1_open", f1);
        report.number("open_auroc", auroc(&scored)?);
        report.number("aupr_closed", aupr(&scored, PositiveClass::Closed)?);
        report.number("aupr_open", aupr(&scored, PositiveClass::Open)?);
    } else {
        report.text(
            "open_set_section",
            format!("skipped (no probes at {})", probes_path.display()),
        );
    }

    let report_kv = config.output_dir.join("eval_report.kv");
    std::fs::write(&report_kv, report.render())
        .with_context(|| format!("writing {}", report_kv.display()))?;

    let report_txt = config.output_dir.join("eval_report.txt");
    std::fs::write(&report_txt, human_eval_report(&report))
        .with_context(|| format!("writing {}", report_txt.display()))?;

    println!(
        "eval [{}]: accuracy {} -> {}",
        model_run_label(&state),
        report.get("accuracy").unwrap_or("?"),
        report_kv.display()
    );
    Ok(EvalOutputs {
        report_kv,
        report_txt,
        sweep_csv,
    })
}

fn open_set_prediction(opinion: &HyperOpinion, threshold: f64) -> OpenSetLabel {
    if opinion.ignorance() <= threshold {
        OpenSetLabel::Known(opinion.dominant_class())
    } else {
        OpenSetLabel::Unknown
    }
}

fn human_eval_report(report: &KeyValueReport) -> String {
    let get = |key: &str| report.get(key).unwrap_or("-").to_string();
    let mut out = String::new();
    let _ = writeln!(out, "Evaluation report [{}]", get("run_label"));
    let _ = writeln!(out, "====================================");
    let _ = writeln!(out, "Closed set ({} samples)", get("test_samples"));
    let _ = writeln!(out, "  accuracy:        {}", get("accuracy"));
    let _ = writeln!(out, "  top-2 accuracy:  {}", get("top2_accuracy"));
    let _ = writeln!(out, "  misclassified:   {}", get("misclassified"));
    let _ = writeln!(out, "Confusion on misclassified samples");
    let _ = writeln!(out, "  weighted AUROC:  {}", get("weighted_confusion_auroc"));
    let _ = writeln!(out, "  sweep points:    {}", get("ranking_sweep_points"));
    if report.get("open_set_section") == Some("present") {
        let _ = writeln!(out, "Open set ({} probes)", get("probe_samples"));
        let _ = writeln!(out, "  TPR-95 threshold: {}", get("tpr95_threshold"));
        let _ = writeln!(out, "  macro-F1 (K+1):   {}", get("macro_f1_open"));
        let _ = writeln!(out, "  AUROC:            {}", get("open_auroc"));
        let _ = writeln!(out, "  AUPR closed:      {}", get("aupr_closed"));
        let _ = writeln!(out, "  AUPR open:        {}", get("aupr_open"));
    } else {
        let _ = writeln!(out, "Open set: {}", get("open_set_section"));
    }
    out
}

/// Paths produced by `grid`.
#[derive(Debug, Clone)]
pub struct GridOutputs {
    pub belief_files: Vec<PathBuf>,
    pub confusion_file: PathBuf,
    pub ignorance_file: PathBuf,
}

/// Evaluates the model over a 2-D lattice and writes one `x,y,value` file
/// per quantity: each singleton belief, total confusion, and ignorance.
pub fn cmd_grid(config: &ExperimentConfig) -> Result<GridOutputs> {
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    let state = load_model_for(config)?;
    if state.config().input_dim != 2 {
        bail!(
            "grid export needs a 2-D model, this one has input_dim {}",
            state.config().input_dim
        );
    }
    let grid = grid_points(
        [
            (config.grid_min, config.grid_max),
            (config.grid_min, config.grid_max),
        ],
        config.grid_resolution,
    )?;
    let k = state.config().num_classes;
    let header = "x,y,value\n";
    let mut belief_out = vec![String::from(header); k];
    let mut confusion_out = String::from(header);
    let mut ignorance_out = String::from(header);
    for point in &grid {
        let opinion = state.forward(point)?.hyper_opinion()?;
        let x = fmt_g12(point[0]);
        let y = fmt_g12(point[1]);
        for (c, out) in belief_out.iter_mut().enumerate() {
            let _ = writeln!(out, "{x},{y},{}", fmt_g12(opinion.beliefs()[c]));
        }
        let _ = writeln!(confusion_out, "{x},{y},{}", fmt_g12(opinion.total_confusion()));
        let _ = writeln!(ignorance_out, "{x},{y},{}", fmt_g12(opinion.ignorance()));
    }

    let mut belief_files = Vec::with_capacity(k);
    for (c, out) in belief_out.iter().enumerate() {
        let path = config.output_dir.join(format!("belief_class{c}.csv"));
        std::fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
        belief_files.push(path);
    }
    let confusion_file = config.output_dir.join("confusion.csv");
    std::fs::write(&confusion_file, confusion_out)?;
    let ignorance_file = config.output_dir.join("ignorance.csv");
    std::fs::write(&ignorance_file, ignorance_out)?;

    println!(
        "grid: {} points per quantity under {}",
        grid.len(),
        config.output_dir.display()
    );
    Ok(GridOutputs {
        belief_files,
        confusion_file,
        ignorance_file,
    })
}

/// Paths produced by `attack`.
#[derive(Debug, Clone)]
pub struct AttackOutputs {
    pub report_csv: PathBuf,
    pub report_txt: PathBuf,
}

/// FGSM robustness sweep: per-epsilon top-1 and top-2 accuracy, ranking
/// classes by plausibility.
pub fn cmd_attack(config: &ExperimentConfig) -> Result<AttackOutputs> {
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    let state = load_model_for(config)?;
    let test_path = config.resolve_test_file();
    let test_set = LabeledDataset::read_csv(&test_path, Some(&test_path.with_extension("meta")))
        .with_context(|| format!("loading test data from {}", test_path.display()))?;
    if test_set.is_empty() {
        bail!("test set {} is empty", test_path.display());
    }
    let k = state.config().num_classes;

    let mut table = String::from("epsilon,top1_accuracy,top2_accuracy\n");
    for &epsilon in &config.fgsm_epsilons {
        let mut top1 = 0usize;
        let mut top2 = 0usize;
        for (x, &label) in test_set.features().iter().zip(test_set.labels()) {
            let perturbed = fgsm_attack(&state, x, label, epsilon)?;
            let opinion = state.forward(&perturbed)?.hyper_opinion()?;
            let ranking = plausibility_ranking(&opinion);
            if ranking[0] == label {
                top1 += 1;
            }
            if ranking[..2.min(k)].contains(&label) {
                top2 += 1;
            }
        }
        let n = test_set.len() as f64;
        let _ = writeln!(
            table,
            "{},{},{}",
            fmt_g12(epsilon),
            fmt_g12(top1 as f64 / n),
            fmt_g12(top2 as f64 / n)
        );
    }

    let report_csv = config.output_dir.join("attack_report.csv");
    std::fs::write(&report_csv, &table)
        .with_context(|| format!("writing {}", report_csv.display()))?;
    let report_txt = config.output_dir.join("attack_report.txt");
    let mut human = format!(
        "FGSM robustness [{}] on {} samples\n",
        model_run_label(&state),
        test_set.len()
    );
    human.push_str(&table.replace(',', "\t"));
    std::fs::write(&report_txt, human)
        .with_context(|| format!("writing {}", report_txt.display()))?;

    println!("attack: {} epsilons -> {}", config.fgsm_epsilons.len(), report_csv.display());
    Ok(AttackOutputs {
        report_csv,
        report_txt,
    })
}

/// Path produced by `predict`.
#[derive(Debug, Clone)]
pub struct PredictOutputs {
    pub predictions_csv: PathBuf,
}

/// Flexible predictions for a feature file: one line per sample with the
/// decision mode, chosen classes, their beliefs, ignorance, and confusion.
pub fn cmd_predict(config: &ExperimentConfig) -> Result<PredictOutputs> {
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    let state = load_model_for(config)?;
    let features_path = config
        .features_file
        .clone()
        .ok_or_else(|| anyhow::anyhow!("predict needs a features file (--features-file)"))?;
    let features = read_features_csv(&features_path)?;

    let mut out = String::from("mode,classes,beliefs,ignorance,confusion\n");
    for x in &features {
        let opinion = state.forward(x)?.hyper_opinion()?;
        let set = predict_flexible(&opinion, config.belief_threshold)?;
        let classes: Vec<String> = set.classes().iter().map(|c| c.to_string()).collect();
        let beliefs: Vec<String> = set
            .classes()
            .iter()
            .map(|&c| fmt_g12(opinion.beliefs()[c]))
            .collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            set.mode().name(),
            classes.join(";"),
            beliefs.join(";"),
            fmt_g12(opinion.ignorance()),
            fmt_g12(opinion.total_confusion()),
        );
    }
    let predictions_csv = config.output_dir.join("predictions.csv");
    std::fs::write(&predictions_csv, out)
        .with_context(|| format!("writing {}", predictions_csv.display()))?;

    println!(
        "predict: {} samples at threshold {} -> {}",
        features.len(),
        fmt_g12(config.belief_threshold),
        predictions_csv.display()
    );
    Ok(PredictOutputs { predictions_csv })
}
