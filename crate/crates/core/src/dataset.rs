//! Labeled datasets, class indicators and data sources.
//!
//! Labels follow the convention `0 = unlabeled`, `1..=L` = class index.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Points with class labels in `{0, 1, ..., L}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    points: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
    name: String,
}

impl LabeledDataset {
    pub fn new(
        points: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        name: impl Into<String>,
    ) -> Result<Self> {
        let n = points.rows();
        if n < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 points, got {n}"
            )));
        }
        if points.cols() < 1 {
            return Err(Error::InvalidDataset("points have no features".into()));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {n} points",
                labels.len()
            )));
        }
        if num_classes < 1 {
            return Err(Error::InvalidDataset("need at least one class".into()));
        }
        if let Some((i, &c)) = labels.iter().enumerate().find(|(_, &c)| c > num_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {c} of point {i} exceeds class count {num_classes}"
            )));
        }
        if labels.iter().all(|&c| c == 0) {
            return Err(Error::InvalidDataset("no labeled points".into()));
        }
        if let Some(pos) = points.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite coordinate in point {}",
                pos / points.cols()
            )));
        }
        Ok(Self {
            points,
            labels,
            num_classes,
            name: name.into(),
        })
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    /// `n_k` for `k = 1..=L`, stored at index `k - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &c in &self.labels {
            if c > 0 {
                counts[c - 1] += 1;
            }
        }
        counts
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labels.iter().all(|&c| c != 0)
    }

    /// Rows selected by index, keeping the class count.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(
            self.points.select_rows(indices),
            labels,
            self.num_classes,
            self.name.clone(),
        )
    }

    /// Copy with the labels of the given rows hidden (set to 0).
    pub fn with_hidden_labels(&self, hidden: &[usize]) -> Result<Self> {
        let mut labels = self.labels.clone();
        for &i in hidden {
            labels[i] = 0;
        }
        Self::new(
            self.points.clone(),
            labels,
            self.num_classes,
            self.name.clone(),
        )
    }

    /// Same points with different labels.
    pub fn relabeled(&self, labels: Vec<usize>) -> Result<Self> {
        Self::new(
            self.points.clone(),
            labels,
            self.num_classes,
            self.name.clone(),
        )
    }

    /// Per-column means and standard deviations (population form).
    pub fn column_stats(&self) -> (Vec<f64>, Vec<f64>) {
        let (n, d) = (self.len() as f64, self.dim());
        let mut mean = vec![0.0; d];
        for row in self.points.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in self.points.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd = var.into_iter().map(|s| libm::sqrt(s / n)).collect();
        (mean, sd)
    }

    /// Applies `(x - mean) / sd` per column; constant columns are only centered.
    pub fn standardized_with(&self, mean: &[f64], sd: &[f64]) -> Result<Self> {
        if mean.len() != self.dim() || sd.len() != self.dim() {
            return Err(Error::DimensionMismatch(
                "standardisation statistics".into(),
            ));
        }
        let points = Matrix::from_fn(self.len(), self.dim(), |i, j| {
            let centered = self.points[(i, j)] - mean[j];
            if sd[j] > 0.0 {
                centered / sd[j]
            } else {
                centered
            }
        });
        Self::new(
            points,
            self.labels.clone(),
            self.num_classes,
            self.name.clone(),
        )
    }
}

/// The `L x n` class membership matrix, `c_ki = 1` iff point `i` has label `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassIndicator {
    matrix: Matrix,
    labels: Vec<usize>,
}

impl ClassIndicator {
    /// Builds the indicator from raw labels in `{0, ..., num_classes}`.
    pub fn from_labels(labels: &[usize], num_classes: usize) -> Result<Self> {
        let mut matrix = Matrix::zeros(num_classes, labels.len());
        for (i, &c) in labels.iter().enumerate() {
            if c > num_classes {
                return Err(Error::InvalidArgument(format!(
                    "label {c} of point {i} exceeds class count {num_classes}"
                )));
            }
            if c > 0 {
                matrix[(c - 1, i)] = 1.0;
            }
        }
        Ok(Self {
            matrix,
            labels: labels.to_vec(),
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn num_classes(&self) -> usize {
        self.matrix.rows()
    }

    pub fn num_points(&self) -> usize {
        self.matrix.cols()
    }

    /// Label of point `i` (0 when unlabeled).
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Row sums `n_k`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &c in &self.labels {
            if c > 0 {
                counts[c - 1] += 1;
            }
        }
        counts
    }
}

pub fn make_indicator(ds: &LabeledDataset) -> ClassIndicator {
    ClassIndicator::from_labels(ds.labels(), ds.num_classes())
        .expect("dataset labels are validated on construction")
}

/// Maps raw file labels onto consecutive classes `1..=L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRemap {
    forward: BTreeMap<i64, usize>,
}

impl LabelRemap {
    /// The table must be a bijection onto `1..=table.len()`.
    pub fn new(pairs: impl IntoIterator<Item = (i64, usize)>) -> Result<Self> {
        let forward: BTreeMap<i64, usize> = pairs.into_iter().collect();
        let mut targets: Vec<usize> = forward.values().copied().collect();
        targets.sort_unstable();
        if targets.iter().enumerate().any(|(i, &t)| t != i + 1) {
            return Err(Error::InvalidArgument(
                "label remap must be a bijection onto 1..=L".into(),
            ));
        }
        Ok(Self { forward })
    }

    /// Satimage ships classes 1-5 and 7; class 7 becomes 6.
    pub fn statlog_satimage() -> Self {
        Self::new([(1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (7, 6)]).expect("valid table")
    }

    /// `k -> k` for `k = 1..=num_classes`.
    pub fn identity(num_classes: usize) -> Self {
        Self::new((1..=num_classes).map(|k| (k as i64, k))).expect("valid table")
    }

    pub fn num_classes(&self) -> usize {
        self.forward.len()
    }

    pub fn map(&self, raw: i64) -> Result<usize> {
        self.forward
            .get(&raw)
            .copied()
            .ok_or(Error::UnknownLabel(raw))
    }

    pub fn inverse(&self, class: usize) -> Option<i64> {
        self.forward
            .iter()
            .find(|(_, &c)| c == class)
            .map(|(&raw, _)| raw)
    }
}

/// Parses Statlog text: whitespace separated numbers, last column the label.
pub fn parse_statlog(text: &str, remap: &LabelRemap, name: &str) -> Result<LabeledDataset> {
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        match width {
            None if fields.len() < 2 => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "need at least one feature and a label".into(),
                })
            }
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {w} columns, found {}", fields.len()),
                })
            }
            Some(_) => {}
        }
        let (label_field, features) = fields.split_last().expect("non-empty");
        for f in features {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid number {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite value {f:?}"),
                });
            }
            data.push(v);
        }
        let raw: i64 = label_field.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("invalid label {label_field:?}"),
        })?;
        labels.push(remap.map(raw)?);
    }
    let d = width.map_or(0, |w| w - 1);
    let points = Matrix::from_vec(labels.len(), d, data)?;
    LabeledDataset::new(points, labels, remap.num_classes(), name)
}

/// Writes Statlog text, mapping classes back through `remap`.
///
/// Integral features are printed without a fractional part so that parsing
/// the output reproduces the features bit for bit.
pub fn format_statlog(ds: &LabeledDataset, remap: &LabelRemap) -> Result<String> {
    let mut out = String::new();
    for (row, &label) in ds.points().iter_rows().zip(ds.labels()) {
        for v in row {
            write_number(&mut out, *v);
            out.push(' ');
        }
        let raw = remap
            .inverse(label)
            .ok_or_else(|| Error::InvalidArgument(format!("class {label} has no raw label")))?;
        let _ = writeln!(out, "{raw}");
    }
    Ok(out)
}

fn write_number(out: &mut String, v: f64) {
    if libm::trunc(v) == v && v.abs() < 9.0e15 {
        let _ = write!(out, "{}", v as i64);
    } else {
        let _ = write!(out, "{v:?}");
    }
}

/// CSV with header `f1,...,fd,label`.
pub fn format_csv(ds: &LabeledDataset) -> String {
    let mut out = String::new();
    for j in 1..=ds.dim() {
        let _ = write!(out, "f{j},");
    }
    out.push_str("label\n");
    for (row, &label) in ds.points().iter_rows().zip(ds.labels()) {
        for v in row {
            write_number(&mut out, *v);
            out.push(',');
        }
        out.push_str(&label.to_string());
        out.push('\n');
    }
    out
}

/// Concentric noisy circles, one class per radius, class `k + 1` on `radii[k]`.
///
/// Angles are uniform on `[0, 2π)`; every coordinate gets independent
/// `N(0, noise_sd²)` noise. The output is a pure function of the arguments.
pub fn gen_circles(
    n_per_class: usize,
    radii: &[f64],
    noise_sd: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n_per_class < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 points per class, got {n_per_class}"
        )));
    }
    if radii.is_empty() || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidArgument(
            "radii must be positive and finite".into(),
        ));
    }
    for (i, a) in radii.iter().enumerate() {
        if radii[..i].contains(a) {
            return Err(Error::InvalidArgument(format!("duplicate radius {a}")));
        }
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise_sd must be >= 0, got {noise_sd}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if noise_sd > 0.0 {
        Some(Normal::new(0.0, noise_sd).expect("valid normal"))
    } else {
        None
    };
    let n = n_per_class * radii.len();
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for (k, &r) in radii.iter().enumerate() {
        for _ in 0..n_per_class {
            let theta = rng.random_range(0.0..core::f64::consts::TAU);
            let (mut x, mut y) = (r * libm::cos(theta), r * libm::sin(theta));
            if let Some(noise) = &noise {
                x += noise.sample(&mut rng);
                y += noise.sample(&mut rng);
            }
            data.push(x);
            data.push(y);
            labels.push(k + 1);
        }
    }
    LabeledDataset::new(
        Matrix::from_vec(n, 2, data)?,
        labels,
        radii.len(),
        format!("circles-{}x{n_per_class}", radii.len()),
    )
}

/// Stratified split with exactly `counts[k-1]` training rows of class `k`.
///
/// Returns `(train_indices, test_indices)`, both sorted ascending.
pub fn stratified_split(
    labels: &[usize],
    train_counts: &[usize],
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    for (k, &want) in train_counts.iter().enumerate() {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == k + 1)
            .map(|(i, _)| i)
            .collect();
        if members.len() < want {
            return Err(Error::InvalidArgument(format!(
                "class {} has {} rows, {want} requested",
                k + 1,
                members.len()
            )));
        }
        for i in 0..want {
            let j = rng.random_range(i..members.len());
            members.swap(i, j);
        }
        train.extend_from_slice(&members[..want]);
    }
    train.sort_unstable();
    let mut is_train = vec![false; labels.len()];
    train.iter().for_each(|&i| is_train[i] = true);
    let test = (0..labels.len()).filter(|&i| !is_train[i]).collect();
    Ok((train, test))
}
