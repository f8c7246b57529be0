//! Synthetic benchmark data: three isotropic 2-D Gaussians, evaluation
//! grids, far-field open-set probes, and a Bayes-accuracy oracle.
//!
//! The class means sit at the vertices of an equilateral triangle with side
//! [`TRIPLET_MEAN_DISTANCE`] centered at the origin, one vertex on the +y
//! axis, and every class shares the isotropic [`TRIPLET_SIGMA`]. The
//! orientation is recorded in dataset metadata so exports are comparable
//! across runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Standard deviation of every class Gaussian.
pub const TRIPLET_SIGMA: f64 = 4.0;

/// Pairwise distance between the class means.
pub const TRIPLET_MEAN_DISTANCE: f64 = 9.0;

/// Number of classes in the synthetic benchmark.
pub const TRIPLET_CLASSES: usize = 3;

/// The three class means: an equilateral triangle of side 9 centered at the
/// origin with one vertex on the +y axis.
pub fn triplet_means() -> [[f64; 2]; 3] {
    let circumradius = TRIPLET_MEAN_DISTANCE / 3.0f64.sqrt();
    [
        [0.0, circumradius],
        [-TRIPLET_MEAN_DISTANCE / 2.0, -circumradius / 2.0],
        [TRIPLET_MEAN_DISTANCE / 2.0, -circumradius / 2.0],
    ]
}

/// A feature matrix with one label per row plus generator metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    metadata: BTreeMap<String, String>,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        if let Some(first) = features.first() {
            let dim = first.len();
            for row in &features {
                if row.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: row.len(),
                    });
                }
            }
        }
        Ok(LabeledDataset {
            features,
            labels,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// Highest label + 1.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Per-class feature means, indexed by label.
    pub fn class_means(&self) -> Vec<Vec<f64>> {
        let k = self.num_classes();
        let dim = self.feature_dim();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (row, &label) in self.features.iter().zip(&self.labels) {
            counts[label] += 1;
            for (d, v) in row.iter().enumerate() {
                sums[label][d] += v;
            }
        }
        for (sum, count) in sums.iter_mut().zip(&counts) {
            if *count > 0 {
                for v in sum.iter_mut() {
                    *v /= *count as f64;
                }
            }
        }
        sums
    }

    /// Seeded shuffle followed by a train/test cut at `train_fraction`.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must be in [0,1], got {train_fraction}"
            )));
        }
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let n_train = ((n as f64) * train_fraction).round() as usize;
        let take = |idx: &[usize], split: &str| -> LabeledDataset {
            let mut meta = self.metadata.clone();
            meta.insert("split".into(), split.into());
            meta.insert("split_fraction".into(), format!("{train_fraction}"));
            meta.insert("split_seed".into(), format!("{seed}"));
            LabeledDataset {
                features: idx.iter().map(|&i| self.features[i].clone()).collect(),
                labels: idx.iter().map(|&i| self.labels[i]).collect(),
                metadata: meta,
            }
        };
        Ok((
            take(&order[..n_train], "train"),
            take(&order[n_train..], "test"),
        ))
    }

    /// Writes the delimited-text form: a header naming the feature columns
    /// and a final label column, one row per sample.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let dim = self.feature_dim();
        for d in 0..dim {
            let _ = write!(out, "x{d},");
        }
        out.push_str("label\n");
        for (row, label) in self.features.iter().zip(&self.labels) {
            for v in row {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{label}");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Writes the sidecar key-value metadata file.
    pub fn write_metadata(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (key, value) in &self.metadata {
            let _ = writeln!(out, "{key} = {value}");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Reads a dataset written by [`LabeledDataset::write_csv`]; the sidecar
    /// is optional.
    pub fn read_csv(path: &Path, metadata_path: Option<&Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let display = path.display().to_string();
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(&display, "empty file"))?;
        let columns: Vec<&str> = header.split(',').collect();
        if columns.last() != Some(&"label") {
            return Err(Error::format(&display, "last column must be `label`"));
        }
        let dim = columns.len() - 1;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(Error::format(
                    &display,
                    format!("row {}: expected {} fields, got {}", lineno + 2, dim + 1, fields.len()),
                ));
            }
            let row: Vec<f64> = fields[..dim]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::format(&display, format!("bad float `{f}`")))
                })
                .collect::<Result<_>>()?;
            let label = fields[dim]
                .parse::<usize>()
                .map_err(|_| Error::format(&display, format!("bad label `{}`", fields[dim])))?;
            features.push(row);
            labels.push(label);
        }
        let metadata = match metadata_path {
            Some(mp) if mp.exists() => read_metadata(mp)?,
            _ => BTreeMap::new(),
        };
        LabeledDataset::new(features, labels, metadata)
    }
}

/// Reads a sidecar `key = value` metadata file.
pub fn read_metadata(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::format(path.display().to_string(), format!("bad line `{line}`"))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Writes a feature matrix (no labels) as delimited text.
pub fn write_features_csv(path: &Path, features: &[Vec<f64>]) -> Result<()> {
    let dim = features.first().map_or(2, Vec::len);
    let mut out = String::new();
    for d in 0..dim {
        if d > 0 {
            out.push(',');
        }
        let _ = write!(out, "x{d}");
    }
    out.push('\n');
    for row in features {
        for (d, v) in row.iter().enumerate() {
            if d > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a feature matrix; a trailing `label` column, if present, is dropped.
pub fn read_features_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let display = path.display().to_string();
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(&display, "empty file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    let has_label = columns.last() == Some(&"label");
    let dim = columns.len() - usize::from(has_label);
    let mut features = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::format(&display, "inconsistent column count"));
        }
        let row: Vec<f64> = fields[..dim]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::format(&display, format!("bad float `{f}`")))
            })
            .collect::<Result<_>>()?;
        features.push(row);
    }
    Ok(features)
}

/// Draws `samples_per_class` points from each of the three Gaussians.
/// Rows are class-major; deterministic for a given seed.
pub fn gen_gaussian_triplet(seed: u64, samples_per_class: usize) -> LabeledDataset {
    let means = triplet_means();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(3 * samples_per_class);
    let mut labels = Vec::with_capacity(3 * samples_per_class);
    for (label, mean) in means.iter().enumerate() {
        for _ in 0..samples_per_class {
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            features.push(vec![
                mean[0] + TRIPLET_SIGMA * zx,
                mean[1] + TRIPLET_SIGMA * zy,
            ]);
            labels.push(label);
        }
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("generator".into(), "gaussian_triplet".into());
    metadata.insert("seed".into(), format!("{seed}"));
    metadata.insert("samples_per_class".into(), format!("{samples_per_class}"));
    metadata.insert("sigma".into(), format!("{TRIPLET_SIGMA}"));
    metadata.insert("mean_distance".into(), format!("{TRIPLET_MEAN_DISTANCE}"));
    for (i, mean) in means.iter().enumerate() {
        metadata.insert(format!("mean_{i}"), format!("{},{}", mean[0], mean[1]));
    }
    metadata.insert(
        "orientation".into(),
        "equilateral, centered at origin, vertex on +y axis".into(),
    );
    LabeledDataset {
        features,
        labels,
        metadata,
    }
}

/// Row-major lattice of `resolution^2` points covering the given per-axis
/// bounds; the first axis is the outer loop.
pub fn grid_points(bounds: [(f64, f64); 2], resolution: usize) -> Result<Vec<Vec<f64>>> {
    if resolution < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid resolution must be >= 2, got {resolution}"
        )));
    }
    for (lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "grid bounds must be finite with min < max, got ({lo}, {hi})"
            )));
        }
    }
    let step = |axis: usize, i: usize| -> f64 {
        let (lo, hi) = bounds[axis];
        lo + (hi - lo) * (i as f64) / ((resolution - 1) as f64)
    };
    let mut points = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            points.push(vec![step(0, i), step(1, j)]);
        }
    }
    Ok(points)
}

/// `count` points uniform on the circle of `radius` around the origin.
/// The radius must clear every class mean of the dataset, so each probe is
/// at least `radius - max_mean_norm` away from every mean.
pub fn far_field_probes(
    dataset: &LabeledDataset,
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let means = dataset.class_means();
    let max_norm = means
        .iter()
        .map(|m| m.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if radius <= max_norm {
        return Err(Error::ProbeRadiusTooSmall {
            radius,
            required: max_norm,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        points.push(vec![radius * angle.cos(), radius * angle.sin()]);
    }
    Ok(points)
}

/// Monte-Carlo estimate of the accuracy of the true-density argmax
/// classifier on fresh generator samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesEstimate {
    pub accuracy: f64,
    pub std_error: f64,
    pub num_samples: usize,
}

/// With equal priors and equal isotropic covariances the density argmax is
/// the nearest mean, so the oracle reduces to a seeded nearest-mean count.
pub fn bayes_accuracy_oracle(num_mc: usize, seed: u64) -> BayesEstimate {
    let means = triplet_means();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut correct = 0usize;
    for _ in 0..num_mc {
        let class = rng.random_range(0..TRIPLET_CLASSES);
        let zx: f64 = rng.sample(StandardNormal);
        let zy: f64 = rng.sample(StandardNormal);
        let x = means[class][0] + TRIPLET_SIGMA * zx;
        let y = means[class][1] + TRIPLET_SIGMA * zy;
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, m) in means.iter().enumerate() {
            let d = (x - m[0]).powi(2) + (y - m[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        if best == class {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / num_mc as f64;
    BayesEstimate {
        accuracy,
        std_error: (accuracy * (1.0 - accuracy) / num_mc as f64).sqrt(),
        num_samples: num_mc,
    }
}
