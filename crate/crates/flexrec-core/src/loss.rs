//! Dirichlet parameter derivation and the three-term training objective,
//! with analytic gradients with respect to the plausibility vector.
//!
//! The objective is
//!
//! ```text
//! L = L_edl + lambda_reg * L_reg + lambda_kl * L_kl
//! ```
//!
//! where `L_edl = ln S - ln alpha_t` scores the Dirichlet evidence on the
//! true class, `L_reg = (pl_t - (1 - I))^2` pins the true-class plausibility
//! to one minus the current ignorance estimate, and `L_kl` is the KL
//! divergence from the label-masked Dirichlet to the uniform Dirichlet.
//! `lambda_kl` ramps linearly from zero to its maximum over a configurable
//! warmup fraction of training.

use crate::error::{Error, Result};
use crate::opinion::{stable_sum, PlausibilityVector};
use crate::special::{digamma, ln_gamma, trigamma};

/// Uncertainty below this floor makes the Dirichlet map undefined.
pub const DEGENERATE_UNCERTAINTY_EPS: f64 = 1e-8;

/// Dirichlet concentration parameters derived from an opinion.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
    strength: f64,
}

impl DirichletParams {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Sum of all concentration parameters.
    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn num_classes(&self) -> usize {
        self.alpha.len()
    }
}

/// Weights and schedule for the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_reg: f64,
    pub lambda_kl_max: f64,
    /// Fraction of training over which `lambda_kl` ramps from 0 to its max.
    pub kl_warmup_fraction: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_reg: 1.0,
            lambda_kl_max: 0.05,
            kl_warmup_fraction: 0.5,
        }
    }
}

impl LossWeights {
    /// The KL coefficient at a point in training, `epoch_fraction` in [0, 1].
    pub fn lambda_kl_at(&self, epoch_fraction: f64) -> f64 {
        self.lambda_kl_max * (epoch_fraction / self.kl_warmup_fraction).min(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_reg must be finite and >= 0, got {}",
                self.lambda_reg
            )));
        }
        if !(self.lambda_kl_max >= 0.0 && self.lambda_kl_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_kl_max must be finite and >= 0, got {}",
                self.lambda_kl_max
            )));
        }
        if !(self.kl_warmup_fraction > 0.0 && self.kl_warmup_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "kl_warmup_fraction must be in (0,1], got {}",
                self.kl_warmup_fraction
            )));
        }
        Ok(())
    }
}

/// The loss value split into its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub edl: f64,
    pub reg: f64,
    pub kl: f64,
    pub total: f64,
    pub lambda_kl_effective: f64,
    pub lambda_reg: f64,
}

/// Maps beliefs and uncertainty to Dirichlet concentrations:
/// `alpha_i = K * b_i / U + 1`.
pub fn dirichlet_params(beliefs: &[f64], uncertainty: f64) -> Result<DirichletParams> {
    if uncertainty <= DEGENERATE_UNCERTAINTY_EPS {
        return Err(Error::DegenerateOpinion {
            uncertainty,
            epsilon: DEGENERATE_UNCERTAINTY_EPS,
        });
    }
    let k = beliefs.len() as f64;
    let alpha: Vec<f64> = beliefs.iter().map(|b| k * b / uncertainty + 1.0).collect();
    let strength = alpha.iter().sum();
    Ok(DirichletParams { alpha, strength })
}

/// Evidence loss on the true class: `ln S - ln alpha_label`.
pub fn edl_loss(params: &DirichletParams, label: usize) -> Result<f64> {
    check_label(label, params.alpha.len())?;
    Ok(params.strength.ln() - params.alpha[label].ln())
}

/// Pins the true-class plausibility to `1 - ignorance_estimate`. The estimate
/// is a constant here: no gradient flows through it.
pub fn reg_loss(pl: &PlausibilityVector, label: usize, ignorance_estimate: f64) -> Result<f64> {
    check_label(label, pl.num_classes())?;
    let target = 1.0 - ignorance_estimate;
    let diff = pl.values()[label] - target;
    Ok(diff * diff)
}

/// Replaces the true-class concentration with 1, leaving the rest:
/// the Dirichlet whose remaining evidence the KL term penalizes.
pub fn mask_alpha(params: &DirichletParams, label: usize) -> Result<DirichletParams> {
    check_label(label, params.alpha.len())?;
    let mut alpha = params.alpha.clone();
    alpha[label] = 1.0;
    let strength = alpha.iter().sum();
    Ok(DirichletParams { alpha, strength })
}

/// Closed-form `KL(Dir(alpha) || Dir(1,...,1))`:
/// `lnG(S) - lnG(K) - sum lnG(alpha_i) + sum (alpha_i - 1)(psi(alpha_i) - psi(S))`.
pub fn kl_uniform_dirichlet(params: &DirichletParams) -> f64 {
    let k = params.alpha.len() as f64;
    let s = params.strength;
    let mut kl = ln_gamma(s) - ln_gamma(k);
    let psi_s = digamma(s);
    for &a in &params.alpha {
        kl -= ln_gamma(a);
        kl += (a - 1.0) * (digamma(a) - psi_s);
    }
    kl.max(0.0)
}

/// Evaluates all three terms at the given point in training.
pub fn total_loss(
    pl: &PlausibilityVector,
    label: usize,
    weights: &LossWeights,
    epoch_fraction: f64,
) -> Result<LossBreakdown> {
    check_label(label, pl.num_classes())?;
    check_epoch_fraction(epoch_fraction)?;
    weights.validate()?;

    let beliefs = pl.singleton_beliefs();
    let ignorance = pl.ignorance();
    let uncertainty = 1.0 - stable_sum(beliefs.iter().copied());
    let params = dirichlet_params(&beliefs, uncertainty)?;

    let edl = edl_loss(&params, label)?;
    let reg = reg_loss(pl, label, ignorance)?;
    let masked = mask_alpha(&params, label)?;
    let kl = kl_uniform_dirichlet(&masked);

    let lambda_kl_effective = weights.lambda_kl_at(epoch_fraction);
    let total = edl + weights.lambda_reg * reg + lambda_kl_effective * kl;
    Ok(LossBreakdown {
        edl,
        reg,
        kl,
        total,
        lambda_kl_effective,
        lambda_reg: weights.lambda_reg,
    })
}

/// Analytic `dL/dpl_i` of [`total_loss`].
///
/// The ignorance estimate inside the regularization term is treated as a
/// constant, matching the loss definition; everything else is differentiated
/// through beliefs, uncertainty, and the Dirichlet map.
pub fn loss_gradient(
    pl: &PlausibilityVector,
    label: usize,
    weights: &LossWeights,
    epoch_fraction: f64,
) -> Result<Vec<f64>> {
    check_label(label, pl.num_classes())?;
    check_epoch_fraction(epoch_fraction)?;
    weights.validate()?;

    let k = pl.num_classes();
    let kf = k as f64;
    let v = pl.values();
    let one_minus: Vec<f64> = v.iter().map(|p| 1.0 - *p).collect();

    // Exclusion products over (1 - pl): excl[i] = prod_{j != i} (1 - pl_j).
    let excl = exclusion_products(&one_minus);
    let beliefs: Vec<f64> = (0..k).map(|i| v[i] * excl[i]).collect();
    let ignorance: f64 = one_minus.iter().product();
    let uncertainty = 1.0 - beliefs.iter().sum::<f64>();
    if uncertainty <= DEGENERATE_UNCERTAINTY_EPS {
        return Err(Error::DegenerateOpinion {
            uncertainty,
            epsilon: DEGENERATE_UNCERTAINTY_EPS,
        });
    }

    // d b_m / d pl_i.
    let mut db = vec![vec![0.0; k]; k];
    for m in 0..k {
        for i in 0..k {
            if m == i {
                db[m][i] = excl[i];
            } else {
                db[m][i] = -v[m] * pair_exclusion_product(&one_minus, m, i);
            }
        }
    }

    let du: Vec<f64> = (0..k).map(|i| -(0..k).map(|m| db[m][i]).sum::<f64>()).collect();

    let alpha: Vec<f64> = beliefs
        .iter()
        .map(|b| kf * b / uncertainty + 1.0)
        .collect();
    let strength: f64 = alpha.iter().sum();
    let u2 = uncertainty * uncertainty;
    let mut dalpha = vec![vec![0.0; k]; k];
    for m in 0..k {
        for i in 0..k {
            dalpha[m][i] = kf * (db[m][i] * uncertainty - beliefs[m] * du[i]) / u2;
        }
    }
    let dstrength: Vec<f64> = (0..k).map(|i| (0..k).map(|m| dalpha[m][i]).sum()).collect();

    // KL term over the masked parameters; the true-class entry is pinned
    // to 1 and contributes no gradient.
    let strength_tilde = strength - alpha[label] + 1.0;
    let trigamma_s = trigamma(strength_tilde);
    let kl_common = trigamma_s * (strength_tilde - kf);
    let lambda_kl = weights.lambda_kl_at(epoch_fraction);

    let mut grad = vec![0.0; k];
    for i in 0..k {
        let g_edl = dstrength[i] / strength - dalpha[label][i] / alpha[label];
        let g_reg = if i == label {
            2.0 * (v[label] - (1.0 - ignorance))
        } else {
            0.0
        };
        let mut g_kl = 0.0;
        for m in 0..k {
            if m == label {
                continue;
            }
            let coeff = (alpha[m] - 1.0) * trigamma(alpha[m]) - kl_common;
            g_kl += coeff * dalpha[m][i];
        }
        grad[i] = g_edl + weights.lambda_reg * g_reg + lambda_kl * g_kl;
    }
    Ok(grad)
}

/// `result[i] = prod_{j != i} values[j]` via prefix/suffix products.
fn exclusion_products(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut prefix = vec![1.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * values[i];
    }
    let mut suffix = vec![1.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] * values[i];
    }
    (0..n).map(|i| prefix[i] * suffix[i + 1]).collect()
}

/// `prod_{j != a, b} values[j]`.
fn pair_exclusion_product(values: &[f64], a: usize, b: usize) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != a && *j != b)
        .map(|(_, v)| *v)
        .product()
}

fn check_label(label: usize, num_classes: usize) -> Result<()> {
    if label >= num_classes {
        return Err(Error::InvalidSubset {
            index: label,
            num_classes,
        });
    }
    Ok(())
}

fn check_epoch_fraction(epoch_fraction: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epoch_fraction) {
        return Err(Error::InvalidConfig(format!(
            "epoch_fraction must be in [0,1], got {epoch_fraction}"
        )));
    }
    Ok(())
}
