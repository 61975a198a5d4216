//! Downstream classifiers and error rates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::nearest;
use crate::matrix::{backward_substitute_transposed, cholesky, dot, forward_substitute, Matrix};

/// Relative ridge on the normal equations.
pub const LINEAR_RIDGE: f64 = 1e-10;

fn check_labels(points: &Matrix, labels: &[usize], num_classes: usize) -> Result<()> {
    if labels.len() != points.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} points",
            labels.len(),
            points.rows()
        )));
    }
    if num_classes == 0 {
        return Err(Error::InvalidArgument("need at least one class".into()));
    }
    if let Some(&c) = labels.iter().find(|&&c| c == 0 || c > num_classes) {
        return Err(Error::InvalidDataset(format!(
            "label {c} outside 1..={num_classes}"
        )));
    }
    Ok(())
}

fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = c;
        }
    }
    best + 1
}

/// One-vs-all least squares: class `c` scores `yᵀα_c + α_0c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    /// `L x m`.
    weights: Matrix,
    intercepts: Vec<f64>,
}

impl LinearClassifier {
    /// Regresses each class indicator on `[Y | 1]` through the normal
    /// equations with a ridge of `1e-10 tr(Gram) / (m + 1)`.
    pub fn fit(points: &Matrix, labels: &[usize], num_classes: usize) -> Result<Self> {
        check_labels(points, labels, num_classes)?;
        let (n, m) = (points.rows(), points.cols());
        if n <= m {
            return Err(Error::InvalidArgument(format!(
                "need more than {m} points, got {n}"
            )));
        }
        let p = m + 1;
        let mut gram = Matrix::zeros(p, p);
        let mut rhs = Matrix::zeros(p, num_classes);
        let mut row = vec![1.0; p];
        for (y, &c) in points.iter_rows().zip(labels) {
            row[..m].copy_from_slice(y);
            for a in 0..p {
                let ra = row[a];
                for (g, rb) in gram.row_mut(a).iter_mut().zip(&row) {
                    *g += ra * rb;
                }
                rhs[(a, c - 1)] += ra;
            }
        }
        let trace: f64 = (0..p).map(|i| gram[(i, i)]).sum();
        let ridge = LINEAR_RIDGE * trace / p as f64;
        for i in 0..p {
            gram[(i, i)] += ridge;
        }
        let chol = cholesky(&gram)
            .ok_or_else(|| Error::InvalidDataset("design matrix is numerically singular".into()))?;
        let min_pivot = (0..p)
            .map(|i| chol[(i, i)] * chol[(i, i)])
            .fold(f64::INFINITY, f64::min);
        if min_pivot <= 1e3 * ridge {
            warn!("linear classifier: design is rank deficient, solution is ridge-regularized");
        }
        let mut weights = Matrix::zeros(num_classes, m);
        let mut intercepts = vec![0.0; num_classes];
        for c in 0..num_classes {
            let beta =
                backward_substitute_transposed(&chol, &forward_substitute(&chol, &rhs.column(c)));
            weights.row_mut(c).copy_from_slice(&beta[..m]);
            intercepts[c] = beta[m];
        }
        Ok(Self {
            weights,
            intercepts,
        })
    }

    pub fn from_parts(weights: Matrix, intercepts: Vec<f64>) -> Result<Self> {
        if weights.rows() != intercepts.len() || intercepts.is_empty() {
            return Err(Error::DimensionMismatch("one intercept per class".into()));
        }
        Ok(Self {
            weights,
            intercepts,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn num_classes(&self) -> usize {
        self.intercepts.len()
    }

    pub fn scores(&self, y: &[f64]) -> Vec<f64> {
        self.weights
            .iter_rows()
            .zip(&self.intercepts)
            .map(|(a, b)| dot(a, y) + b)
            .collect()
    }

    /// `argmax_c` score; ties go to the lowest class.
    pub fn predict(&self, y: &[f64]) -> usize {
        argmax_lowest(&self.scores(y))
    }

    pub fn predict_all(&self, points: &Matrix) -> Vec<usize> {
        points.iter_rows().map(|y| self.predict(y)).collect()
    }
}

/// Majority vote among the `k` nearest stored points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnClassifier {
    points: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
    k: usize,
}

impl KnnClassifier {
    pub fn new(points: Matrix, labels: Vec<usize>, num_classes: usize, k: usize) -> Result<Self> {
        check_labels(&points, &labels, num_classes)?;
        if k < 1 || k > points.rows() {
            return Err(Error::NeighborCount {
                k,
                n: points.rows(),
            });
        }
        Ok(Self {
            points,
            labels,
            num_classes,
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn with_k(mut self, k: usize) -> Result<Self> {
        if k < 1 || k > self.points.rows() {
            return Err(Error::NeighborCount {
                k,
                n: self.points.rows(),
            });
        }
        self.k = k;
        Ok(self)
    }

    fn vote(&self, neighbors: &[(f64, usize)], counts: &mut [usize]) -> usize {
        counts.iter_mut().for_each(|c| *c = 0);
        for &(_, j) in neighbors {
            counts[self.labels[j] - 1] += 1;
        }
        let mut best = 0;
        for c in 1..counts.len() {
            if counts[c] > counts[best] {
                best = c;
            }
        }
        best + 1
    }

    pub fn predict(&self, y: &[f64]) -> usize {
        let neighbors = nearest(&self.points, y, self.k, None);
        self.vote(&neighbors, &mut vec![0; self.num_classes])
    }

    pub fn predict_all(&self, queries: &Matrix) -> Vec<usize> {
        queries.iter_rows().map(|y| self.predict(y)).collect()
    }

    /// Predictions for every `k` in `ks` from one neighbor search per query.
    /// Returns one prediction vector per entry of `ks`.
    pub fn predict_all_multi(&self, queries: &Matrix, ks: &[usize]) -> Result<Vec<Vec<usize>>> {
        let n = self.points.rows();
        if let Some(&k) = ks.iter().find(|&&k| k < 1 || k > n) {
            return Err(Error::NeighborCount { k, n });
        }
        let kmax = ks.iter().copied().max().unwrap_or(0);
        let mut out = vec![Vec::with_capacity(queries.rows()); ks.len()];
        let mut counts = vec![0; self.num_classes];
        for y in queries.iter_rows() {
            let neighbors = nearest(&self.points, y, kmax, None);
            for (preds, &k) in out.iter_mut().zip(ks) {
                preds.push(self.vote(&neighbors[..k], &mut counts));
            }
        }
        Ok(out)
    }
}

/// Fraction of positions where `predictions` and `truth` differ.
pub fn error_rate(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("no predictions to score".into()));
    }
    let wrong = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p != t)
        .count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// `1 - error_rate`.
pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(1.0 - error_rate(predictions, truth)?)
}
