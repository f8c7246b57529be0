//! Flexible recognition by evidential modeling of confusion and ignorance.
//!
//! A classifier's uncertainty is split into two masses with different
//! meanings: confusion (evidence shared between classes that cannot tell
//! them apart) and ignorance (absence of evidence, the open-set signal).
//! The crate provides:
//!
//! - [`opinion`] — the belief-mass algebra that derives singleton beliefs,
//!   confusion, and ignorance from per-class plausibilities;
//! - [`loss`] — the Dirichlet evidential training objective and its analytic
//!   gradient;
//! - [`network`] — a small deterministic MLP with sigmoid plausibility heads,
//!   momentum-SGD training, gradient checking, FGSM perturbation, and text
//!   persistence;
//! - [`decision`] — flexible predictive sets (reject / single / combined)
//!   and the confusion-ranking sweep;
//! - [`metrics`] — AUROC, AUPR, open-set Macro-F1, and TPR-95 thresholding;
//! - [`data`] — the three-Gaussian synthetic benchmark, evaluation grids,
//!   far-field open-set probes, and a Bayes-accuracy oracle.

pub mod data;
pub mod decision;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod opinion;
pub mod special;

pub use error::{Error, Result};
pub use loss::{DirichletParams, LossBreakdown, LossWeights};
pub use opinion::{ClassSubset, HyperOpinion, PlausibilityVector};
