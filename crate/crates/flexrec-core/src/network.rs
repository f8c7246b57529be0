//! Feature-embedding network with sigmoid plausibility heads, deterministic
//! minibatch training with momentum SGD, gradient checking, and FGSM input
//! perturbation.
//!
//! The backbone is a plain MLP; the head is a single multi-output linear
//! layer without bias whose sigmoid outputs are the per-class plausibilities.
//! Training is single-threaded and fully determined by the seed: identical
//! config and seed give bit-identical weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::loss::{loss_gradient, total_loss, LossWeights};
use crate::opinion::PlausibilityVector;

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation `{other}` (expected relu or tanh)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative given the pre-activation `z` and the activation `a`.
    fn derivative(&self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    pub activation: Activation,
    pub seed: u64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: LossWeights,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            input_dim: 2,
            hidden_dims: vec![64, 64],
            num_classes: 3,
            activation: Activation::Tanh,
            seed: 42,
            learning_rate: 0.004,
            momentum: 0.9,
            batch_size: 128,
            epochs: 600,
            loss: LossWeights::default(),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be >= 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::InvalidConfig("hidden dims must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0,1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        self.loss.validate()
    }

    /// Embedding dimension seen by the head.
    fn embed_dim(&self) -> usize {
        self.hidden_dims.last().copied().unwrap_or(self.input_dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weight = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        DenseLayer {
            in_dim,
            out_dim,
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    fn matvec(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let mut z = self.bias[o];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            out.push(z);
        }
    }
}

/// Network weights plus optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    config: NetworkConfig,
    layers: Vec<DenseLayer>,
    /// Head weights, row-major `num_classes x embed_dim`, no bias.
    head: Vec<f64>,
    velocity_layers: Vec<(Vec<f64>, Vec<f64>)>,
    velocity_head: Vec<f64>,
    epoch: usize,
}

/// Activations recorded by one forward pass, enough to backpropagate.
struct ForwardTrace {
    /// Layer inputs: `activations[0]` is the sample, last entry the embedding.
    activations: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
    logits: Vec<f64>,
    plausibilities: Vec<f64>,
}

/// Gradients for every parameter plus the input.
struct Gradients {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
    head: Vec<f64>,
    input: Vec<f64>,
}

impl Gradients {
    fn zeros(state: &ModelState) -> Self {
        Gradients {
            layers: state
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weight.len()], vec![0.0; l.bias.len()]))
                .collect(),
            head: vec![0.0; state.head.len()],
            input: vec![0.0; state.config.input_dim],
        }
    }

    fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|g| *g *= factor);
            b.iter_mut().for_each(|g| *g *= factor);
        }
        self.head.iter_mut().for_each(|g| *g *= factor);
    }

    fn accumulate(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.iter_mut().zip(ow).for_each(|(g, o)| *g += o);
            b.iter_mut().zip(ob).for_each(|(g, o)| *g += o);
        }
        self.head.iter_mut().zip(&other.head).for_each(|(g, o)| *g += o);
    }
}

/// One line of the per-epoch training log. Loss terms are means over the
/// samples visited in the epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub edl: f64,
    pub reg: f64,
    pub kl: f64,
    pub total: f64,
    pub lambda_kl_effective: f64,
    pub train_accuracy: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl ModelState {
    /// Seeded initialization: uniform `+-sqrt(6/(fan_in+fan_out))` weights,
    /// zero biases, zero velocity.
    pub fn init(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::init_with_rng(config, &mut rng)
    }

    fn init_with_rng(config: &NetworkConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut layers = Vec::new();
        let mut in_dim = config.input_dim;
        for &out_dim in &config.hidden_dims {
            layers.push(DenseLayer::init(in_dim, out_dim, rng));
            in_dim = out_dim;
        }
        let embed = config.embed_dim();
        let bound = (6.0 / (embed + config.num_classes) as f64).sqrt();
        let head = (0..config.num_classes * embed)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let velocity_layers = layers
            .iter()
            .map(|l| (vec![0.0; l.weight.len()], vec![0.0; l.bias.len()]))
            .collect();
        Ok(ModelState {
            velocity_head: vec![0.0; config.num_classes * embed],
            velocity_layers,
            config: config.clone(),
            layers,
            head,
            epoch: 0,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Per-class plausibilities `sigmoid(head . embed(x))`.
    pub fn forward(&self, features: &[f64]) -> Result<PlausibilityVector> {
        let trace = self.forward_trace(features)?;
        PlausibilityVector::new(trace.plausibilities)
    }

    /// Raw head logits; exposed for saturation diagnostics.
    pub fn head_logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(features)?.logits)
    }

    fn forward_trace(&self, features: &[f64]) -> Result<ForwardTrace> {
        if features.len() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                got: features.len(),
            });
        }
        let mut activations = vec![features.to_vec()];
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = features.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers {
            layer.matvec(&current, &mut z);
            pre_activations.push(z.clone());
            current = z.iter().map(|v| self.config.activation.apply(*v)).collect();
            activations.push(current.clone());
        }
        let embed = self.config.embed_dim();
        let mut logits = Vec::with_capacity(self.config.num_classes);
        for c in 0..self.config.num_classes {
            let row = &self.head[c * embed..(c + 1) * embed];
            logits.push(row.iter().zip(&current).map(|(w, h)| w * h).sum());
        }
        let plausibilities = logits.iter().map(|z| sigmoid(*z)).collect();
        Ok(ForwardTrace {
            activations,
            pre_activations,
            logits,
            plausibilities,
        })
    }

    /// Backpropagates `dL/dpl` through the sigmoid head and the backbone.
    fn backward(&self, trace: &ForwardTrace, dpl: &[f64]) -> Gradients {
        let embed = self.config.embed_dim();
        let k = self.config.num_classes;
        let mut grads = Gradients::zeros(self);

        // dL/dlogit = dL/dpl * pl (1 - pl)
        let delta_head: Vec<f64> = (0..k)
            .map(|c| {
                let pl = trace.plausibilities[c];
                dpl[c] * pl * (1.0 - pl)
            })
            .collect();

        let embedding = trace.activations.last().expect("at least the input");
        let mut d_hidden = vec![0.0; embed];
        for c in 0..k {
            for j in 0..embed {
                grads.head[c * embed + j] = delta_head[c] * embedding[j];
                d_hidden[j] += self.head[c * embed + j] * delta_head[c];
            }
        }

        let mut d_out = d_hidden;
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let z = &trace.pre_activations[idx];
            let a = &trace.activations[idx + 1];
            let input = &trace.activations[idx];
            let delta: Vec<f64> = (0..layer.out_dim)
                .map(|o| d_out[o] * self.config.activation.derivative(z[o], a[o]))
                .collect();
            let (gw, gb) = &mut grads.layers[idx];
            for o in 0..layer.out_dim {
                for i in 0..layer.in_dim {
                    gw[o * layer.in_dim + i] = delta[o] * input[i];
                }
                gb[o] = delta[o];
            }
            let mut d_in = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                for i in 0..layer.in_dim {
                    d_in[i] += layer.weight[o * layer.in_dim + i] * delta[o];
                }
            }
            d_out = d_in;
        }
        grads.input = d_out;
        grads
    }

    fn apply_update(&mut self, grads: &Gradients) {
        let lr = self.config.learning_rate;
        let mu = self.config.momentum;
        for (layer, ((vw, vb), (gw, gb))) in self
            .layers
            .iter_mut()
            .zip(self.velocity_layers.iter_mut().zip(&grads.layers))
        {
            for (i, g) in gw.iter().enumerate() {
                vw[i] = mu * vw[i] + g;
                layer.weight[i] -= lr * vw[i];
            }
            for (i, g) in gb.iter().enumerate() {
                vb[i] = mu * vb[i] + g;
                layer.bias[i] -= lr * vb[i];
            }
        }
        for (i, g) in grads.head.iter().enumerate() {
            self.velocity_head[i] = mu * self.velocity_head[i] + g;
            self.head[i] -= lr * self.velocity_head[i];
        }
    }

    fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .chain(self.head.iter())
            .all(|v| v.is_finite())
    }

    /// Iterates all weights in persistence order: hidden layers, then head.
    fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .chain(self.head.iter().copied())
    }
}

/// Runs `epochs x ceil(N / batch)` momentum-SGD steps on the evidential
/// objective. Shuffling is driven only by the config seed; the returned log
/// has one record per epoch.
pub fn train(
    config: &NetworkConfig,
    dataset: &LabeledDataset,
) -> Result<(ModelState, Vec<EpochRecord>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("dataset is empty".into()));
    }
    if dataset.feature_dim() != config.input_dim {
        return Err(Error::DimensionMismatch {
            expected: config.input_dim,
            got: dataset.feature_dim(),
        });
    }
    if let Some(bad) = dataset.labels().iter().find(|l| **l >= config.num_classes) {
        return Err(Error::InvalidConfig(format!(
            "label {bad} out of range for {} classes",
            config.num_classes
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = ModelState::init_with_rng(config, &mut rng)?;
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let epoch_fraction = epoch as f64 / config.epochs as f64;
        let lambda_kl = config.loss.lambda_kl_at(epoch_fraction);
        // Fisher-Yates from the single seeded stream.
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }

        let mut sums = (0.0, 0.0, 0.0, 0.0);
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            step += 1;
            let mut batch_grads = Gradients::zeros(&state);
            for &sample in batch {
                let features = &dataset.features()[sample];
                let label = dataset.labels()[sample];
                let trace = state.forward_trace(features)?;
                let pl = PlausibilityVector::new(trace.plausibilities.clone())?;
                let breakdown = total_loss(&pl, label, &config.loss, epoch_fraction)?;
                if !breakdown.total.is_finite() {
                    return Err(Error::DivergedTraining {
                        step,
                        reason: format!("non-finite loss {}", breakdown.total),
                    });
                }
                sums.0 += breakdown.edl;
                sums.1 += breakdown.reg;
                sums.2 += breakdown.kl;
                sums.3 += breakdown.total;
                let predicted = argmax(&trace.plausibilities);
                if predicted == label {
                    correct += 1;
                }
                let dpl = loss_gradient(&pl, label, &config.loss, epoch_fraction)?;
                let sample_grads = state.backward(&trace, &dpl);
                batch_grads.accumulate(&sample_grads);
            }
            batch_grads.scale(1.0 / batch.len() as f64);
            state.apply_update(&batch_grads);
            if !state.all_finite() {
                return Err(Error::DivergedTraining {
                    step,
                    reason: "non-finite parameter after update".into(),
                });
            }
        }
        state.epoch = epoch + 1;
        let nf = n as f64;
        log.push(EpochRecord {
            epoch: epoch + 1,
            edl: sums.0 / nf,
            reg: sums.1 / nf,
            kl: sums.2 / nf,
            total: sums.3 / nf,
            lambda_kl_effective: lambda_kl,
            train_accuracy: correct as f64 / nf,
        });
    }
    Ok((state, log))
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Head logits beyond this magnitude make finite differences uninformative.
const SATURATION_LOGIT: f64 = 15.0;

/// Outcome of comparing backprop gradients against central differences over
/// every parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub num_parameters: usize,
    /// Some head logit exceeded the saturation bound, so the comparison
    /// carries little signal.
    pub low_signal: bool,
    pub passed: bool,
}

/// Gradient-check tolerance on the relative error.
pub const GRAD_CHECK_TOL: f64 = 1e-3;

/// Compares analytic parameter gradients against central finite differences
/// of the loss at `label`. The ignorance estimate in the regularizer is
/// frozen at the unperturbed point, matching its stop-gradient definition.
pub fn grad_check(state: &ModelState, features: &[f64], label: usize) -> Result<GradCheckReport> {
    let epoch_fraction = 1.0;
    let weights = state.config.loss;
    let trace = state.forward_trace(features)?;
    let base_pl = PlausibilityVector::new(trace.plausibilities.clone())?;
    let ignorance_frozen = base_pl.ignorance();
    let low_signal = trace.logits.iter().any(|z| z.abs() > SATURATION_LOGIT);

    let dpl = loss_gradient(&base_pl, label, &weights, epoch_fraction)?;
    let analytic = state.backward(&trace, &dpl);

    let eval = |s: &ModelState| -> Result<f64> {
        let t = s.forward_trace(features)?;
        let pl = PlausibilityVector::new(t.plausibilities)?;
        frozen_loss(&pl, label, ignorance_frozen, &weights, epoch_fraction)
    };

    let h = 1e-4;
    let mut max_rel_error: f64 = 0.0;
    let mut num_parameters = 0usize;
    let mut check = |get: &dyn Fn(&mut ModelState) -> &mut f64, analytic_grad: f64| -> Result<()> {
        let mut plus = state.clone();
        *get(&mut plus) += h;
        let mut minus = state.clone();
        *get(&mut minus) -= h;
        let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
        let denom = (analytic_grad.abs() + numeric.abs()).max(1e-6);
        max_rel_error = max_rel_error.max((analytic_grad - numeric).abs() / denom);
        num_parameters += 1;
        Ok(())
    };

    for (idx, layer) in state.layers.iter().enumerate() {
        for i in 0..layer.weight.len() {
            check(&|s: &mut ModelState| &mut s.layers[idx].weight[i], analytic.layers[idx].0[i])?;
        }
        for i in 0..layer.bias.len() {
            check(&|s: &mut ModelState| &mut s.layers[idx].bias[i], analytic.layers[idx].1[i])?;
        }
    }
    for i in 0..state.head.len() {
        check(&|s: &mut ModelState| &mut s.head[i], analytic.head[i])?;
    }

    let passed = max_rel_error < GRAD_CHECK_TOL || low_signal;
    Ok(GradCheckReport {
        max_rel_error,
        num_parameters,
        low_signal,
        passed,
    })
}

/// Total loss with the regularizer's ignorance estimate held constant.
fn frozen_loss(
    pl: &PlausibilityVector,
    label: usize,
    ignorance_estimate: f64,
    weights: &LossWeights,
    epoch_fraction: f64,
) -> Result<f64> {
    use crate::loss::{dirichlet_params, edl_loss, kl_uniform_dirichlet, mask_alpha, reg_loss};
    let beliefs = pl.singleton_beliefs();
    let uncertainty = 1.0 - beliefs.iter().sum::<f64>();
    let params = dirichlet_params(&beliefs, uncertainty)?;
    let edl = edl_loss(&params, label)?;
    let reg = reg_loss(pl, label, ignorance_estimate)?;
    let kl = kl_uniform_dirichlet(&mask_alpha(&params, label)?);
    Ok(edl + weights.lambda_reg * reg + weights.lambda_kl_at(epoch_fraction) * kl)
}

/// One-step fast-gradient-sign perturbation at the true label:
/// `x' = x + eps * sign(dL/dx)`. No clipping; tabular features are unbounded.
pub fn fgsm_attack(
    state: &ModelState,
    features: &[f64],
    label: usize,
    epsilon: f64,
) -> Result<Vec<f64>> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be finite and >= 0, got {epsilon}"
        )));
    }
    let trace = state.forward_trace(features)?;
    let pl = PlausibilityVector::new(trace.plausibilities.clone())?;
    let dpl = loss_gradient(&pl, label, &state.config.loss, 1.0)?;
    let grads = state.backward(&trace, &dpl);
    Ok(features
        .iter()
        .zip(&grads.input)
        .map(|(x, g)| x + epsilon * sign(*g))
        .collect())
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Persistence: a self-describing text format with an integrity digest.
// ---------------------------------------------------------------------------

const MODEL_FORMAT_VERSION: u32 = 1;

/// Serializes config, shapes, and row-major weights. Floats use the shortest
/// decimal that round-trips, so a reloaded model reproduces forward outputs
/// bit-exactly.
pub fn model_to_string(state: &ModelState) -> String {
    use std::fmt::Write as _;
    let c = &state.config;
    let mut out = String::new();
    let _ = writeln!(out, "format flexrec-model {MODEL_FORMAT_VERSION}");
    let _ = writeln!(out, "input_dim {}", c.input_dim);
    let dims: Vec<String> = c.hidden_dims.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "hidden_dims {}", dims.join(","));
    let _ = writeln!(out, "num_classes {}", c.num_classes);
    let _ = writeln!(out, "activation {}", c.activation.name());
    let _ = writeln!(out, "seed {}", c.seed);
    let _ = writeln!(out, "learning_rate {}", c.learning_rate);
    let _ = writeln!(out, "momentum {}", c.momentum);
    let _ = writeln!(out, "batch_size {}", c.batch_size);
    let _ = writeln!(out, "epochs {}", c.epochs);
    let _ = writeln!(out, "lambda_reg {}", c.loss.lambda_reg);
    let _ = writeln!(out, "lambda_kl_max {}", c.loss.lambda_kl_max);
    let _ = writeln!(out, "kl_warmup_fraction {}", c.loss.kl_warmup_fraction);
    let _ = writeln!(out, "epoch {}", state.epoch);
    for (idx, layer) in state.layers.iter().enumerate() {
        let _ = writeln!(out, "tensor hidden{idx}.weight {} {}", layer.out_dim, layer.in_dim);
        write_matrix(&mut out, &layer.weight, layer.in_dim);
        let _ = writeln!(out, "tensor hidden{idx}.bias 1 {}", layer.out_dim);
        write_matrix(&mut out, &layer.bias, layer.out_dim);
    }
    let embed = c.embed_dim();
    let _ = writeln!(out, "tensor head.weight {} {}", c.num_classes, embed);
    write_matrix(&mut out, &state.head, embed);
    let _ = writeln!(out, "digest {}", weight_digest(state));
    out
}

fn write_matrix(out: &mut String, values: &[f64], cols: usize) {
    use std::fmt::Write as _;
    for row in values.chunks(cols) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
}

/// FNV-1a over the bit patterns of all weights in persistence order,
/// rendered decimal.
fn weight_digest(state: &ModelState) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for v in state.parameters() {
        for byte in v.to_bits().to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

pub fn save_model(state: &ModelState, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, model_to_string(state))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_model(path: &std::path::Path) -> Result<ModelState> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    model_from_str(&text, &path.display().to_string())
}

pub fn model_from_str(text: &str, origin: &str) -> Result<ModelState> {
    let mut lines = text.lines().peekable();
    let mut fields = std::collections::BTreeMap::new();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(origin, "empty model file"))?;
    let mut header_parts = header.split_whitespace();
    if header_parts.next() != Some("format") || header_parts.next() != Some("flexrec-model") {
        return Err(Error::format(origin, "missing `format flexrec-model` header"));
    }
    let version: u32 = header_parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::format(origin, "missing format version"))?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::format(
            origin,
            format!("unsupported format version {version}"),
        ));
    }

    // Scalar fields come before the first tensor.
    while let Some(line) = lines.peek() {
        if line.starts_with("tensor ") {
            break;
        }
        let line = lines.next().unwrap();
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| Error::format(origin, format!("bad field line `{line}`")))?;
        fields.insert(key.to_string(), value.to_string());
    }

    let get = |key: &str| -> Result<&String> {
        fields
            .get(key)
            .ok_or_else(|| Error::format(origin, format!("missing field `{key}`")))
    };
    let parse_usize = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::format(origin, format!("bad integer for `{key}`")))
    };
    let parse_f64 = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| Error::format(origin, format!("bad float for `{key}`")))
    };

    let hidden_dims: Vec<usize> = {
        let raw = get("hidden_dims")?;
        if raw.is_empty() {
            Vec::new()
        } else {
            raw.split(',')
                .map(|d| {
                    d.parse()
                        .map_err(|_| Error::format(origin, format!("bad hidden dim `{d}`")))
                })
                .collect::<Result<_>>()?
        }
    };
    let config = NetworkConfig {
        input_dim: parse_usize("input_dim")?,
        hidden_dims,
        num_classes: parse_usize("num_classes")?,
        activation: Activation::parse(get("activation")?)?,
        seed: get("seed")?
            .parse()
            .map_err(|_| Error::format(origin, "bad integer for `seed`"))?,
        learning_rate: parse_f64("learning_rate")?,
        momentum: parse_f64("momentum")?,
        batch_size: parse_usize("batch_size")?,
        epochs: parse_usize("epochs")?,
        loss: LossWeights {
            lambda_reg: parse_f64("lambda_reg")?,
            lambda_kl_max: parse_f64("lambda_kl_max")?,
            kl_warmup_fraction: parse_f64("kl_warmup_fraction")?,
        },
    };
    config.validate()?;
    let epoch = parse_usize("epoch")?;

    let mut read_tensor = |name: &str, rows: usize, cols: usize| -> Result<Vec<f64>> {
        let header = lines
            .next()
            .ok_or_else(|| Error::format(origin, format!("missing tensor `{name}`")))?;
        let expect = format!("tensor {name} {rows} {cols}");
        if header != expect {
            return Err(Error::format(
                origin,
                format!("expected `{expect}`, found `{header}`"),
            ));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::format(origin, format!("truncated tensor `{name}`")))?;
            let row: Vec<f64> = line
                .split(' ')
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::format(origin, format!("bad weight `{v}`")))
                })
                .collect::<Result<_>>()?;
            if row.len() != cols {
                return Err(Error::format(
                    origin,
                    format!("tensor `{name}`: expected {cols} columns, got {}", row.len()),
                ));
            }
            values.extend(row);
        }
        Ok(values)
    };

    let mut layers = Vec::new();
    let mut in_dim = config.input_dim;
    for (idx, &out_dim) in config.hidden_dims.iter().enumerate() {
        let weight = read_tensor(&format!("hidden{idx}.weight"), out_dim, in_dim)?;
        let bias = read_tensor(&format!("hidden{idx}.bias"), 1, out_dim)?;
        layers.push(DenseLayer {
            in_dim,
            out_dim,
            weight,
            bias,
        });
        in_dim = out_dim;
    }
    let embed = config.embed_dim();
    let head = read_tensor("head.weight", config.num_classes, embed)?;

    let digest_line = lines
        .next()
        .ok_or_else(|| Error::format(origin, "missing digest"))?;
    let declared: u64 = digest_line
        .strip_prefix("digest ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::format(origin, "bad digest line"))?;

    let velocity_layers = layers
        .iter()
        .map(|l| (vec![0.0; l.weight.len()], vec![0.0; l.bias.len()]))
        .collect();
    let state = ModelState {
        velocity_head: vec![0.0; head.len()],
        velocity_layers,
        config,
        layers,
        head,
        epoch,
    };
    let actual = weight_digest(&state);
    if actual != declared {
        return Err(Error::format(
            origin,
            format!("digest mismatch: file says {declared}, weights hash to {actual}"),
        ));
    }
    Ok(state)
}
