//! Classification constrained dimensionality reduction.
//!
//! The augmented graph has `L + n` vertices: one per class followed by one
//! per training point. Its adjacency is
//!
//! ```text
//! G = [ 0    C  ]     C: L x n class indicator
//!     [ Cᵀ  βW  ]     W: n x n heat-kernel kNN weights
//! ```
//!
//! With `D = diag(G 1)` and `Lap = D - G`, the embedding minimises
//! `tr(Z Lap Zᵀ)` subject to `Z D Zᵀ = I` and `Z D 1 = 0`, whose solution
//! is given by the generalized eigenvectors `u_2, ..., u_{m+1}` of
//! `(Lap, D)`. The first `L` entries of each eigenvector are the class
//! center coordinates, the remaining `n` the embedded points.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{make_indicator, ClassIndicator, LabeledDataset};
use crate::error::{Error, Result};
use crate::graph::{
    heat_weights, kernel_entries, kernel_entries_full, knn_graph, median_heuristic_eps,
    WeightMatrix,
};
use crate::matrix::{squared_distance, Matrix};
use crate::spectral::generalized_eig_owned;

/// Retained eigenvalues must stay below `1 - EIGENVALUE_MARGIN`.
pub const EIGENVALUE_MARGIN: f64 = 1e-9;

/// Eigenvalues at or below this are treated as part of the Laplacian null space.
pub const NULL_SPACE_TOL: f64 = 1e-10;

/// Which training points enter the out-of-sample kernel sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OosKernel {
    /// The query's `k` nearest training points.
    #[default]
    Neighbors,
    /// Every training point.
    Full,
}

/// The class-augmented graph and its degree vector.
#[derive(Debug, Clone)]
pub struct AugmentedLaplacian {
    indicator: ClassIndicator,
    weights: WeightMatrix,
    beta: f64,
    degrees: Vec<f64>,
}

impl AugmentedLaplacian {
    pub fn num_classes(&self) -> usize {
        self.indicator.num_classes()
    }

    pub fn num_points(&self) -> usize {
        self.weights.len()
    }

    /// `L + n`.
    pub fn size(&self) -> usize {
        self.num_classes() + self.num_points()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn indicator(&self) -> &ClassIndicator {
        &self.indicator
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    /// Diagonal of `D = diag(G 1)`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Entry `(a, b)` of `G`.
    pub fn g(&self, a: usize, b: usize) -> f64 {
        let l = self.num_classes();
        match (a < l, b < l) {
            (true, true) => 0.0,
            (true, false) => self.indicator.matrix()[(a, b - l)],
            (false, true) => self.indicator.matrix()[(b, a - l)],
            (false, false) => self.beta * self.weights.get(a - l, b - l),
        }
    }

    pub fn g_dense(&self) -> Matrix {
        let (l, size) = (self.num_classes(), self.size());
        let mut g = Matrix::zeros(size, size);
        for i in 0..self.num_points() {
            let c = self.indicator.label(i);
            if c > 0 {
                g[(c - 1, l + i)] = 1.0;
                g[(l + i, c - 1)] = 1.0;
            }
            for &(j, w) in self.weights.row(i) {
                g[(l + i, l + j)] = self.beta * w;
            }
        }
        g
    }

    /// `Lap = D - G`, dense.
    pub fn laplacian_dense(&self) -> Matrix {
        let mut lap = self.g_dense();
        lap.as_mut_slice().iter_mut().for_each(|x| *x = -*x);
        for (a, d) in self.degrees.iter().enumerate() {
            lap[(a, a)] += d;
        }
        lap
    }
}

/// Assembles `G`, `D` and checks that every degree is positive.
///
/// A zero degree means an empty class, or an unlabeled point without graph
/// edges (or with `beta = 0`); the error names the augmented row.
pub fn build_augmented(
    w: &WeightMatrix,
    c: &ClassIndicator,
    beta: f64,
) -> Result<AugmentedLaplacian> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    if c.num_points() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "indicator has {} points, weights have {}",
            c.num_points(),
            w.len()
        )));
    }
    let l = c.num_classes();
    let mut degrees: Vec<f64> = c.class_counts().into_iter().map(|n| n as f64).collect();
    degrees.extend((0..w.len()).map(|i| {
        let labeled = if c.label(i) != 0 { 1.0 } else { 0.0 };
        labeled + w.row(i).iter().map(|&(_, wij)| beta * wij).sum::<f64>()
    }));
    if let Some(a) = degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::SingularDegree(a));
    }
    debug_assert_eq!(degrees.len(), l + w.len());
    Ok(AugmentedLaplacian {
        indicator: c.clone(),
        weights: w.clone(),
        beta,
        degrees,
    })
}

/// Graph, scale and embedding parameters for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    /// kNN graph neighbor count.
    pub k: usize,
    /// Heat-kernel scale; `None` selects the median squared edge length.
    pub eps: Option<f64>,
    pub beta: f64,
    /// Embedding dimension.
    pub m: usize,
    pub oos_kernel: OosKernel,
}

impl FitParams {
    pub fn new(k: usize, beta: f64, m: usize) -> Self {
        Self {
            k,
            eps: None,
            beta,
            m,
            oos_kernel: OosKernel::Neighbors,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }

    pub fn with_oos_kernel(mut self, oos_kernel: OosKernel) -> Self {
        self.oos_kernel = oos_kernel;
        self
    }
}

/// Heat-kernel weights for `ds` under `params` (kNN graph then weights).
pub fn training_weights(ds: &LabeledDataset, params: &FitParams) -> Result<WeightMatrix> {
    let g = knn_graph(ds.points(), params.k)?;
    let eps = match params.eps {
        Some(eps) => eps,
        None => median_heuristic_eps(&g, ds.points()),
    };
    heat_weights(&g, ds.points(), eps)
}

/// kNN graph, heat weights, augmented Laplacian, eigenvectors.
pub fn fit(ds: &LabeledDataset, params: &FitParams) -> Result<CcdrModel> {
    let w = training_weights(ds, params)?;
    fit_with_weights(ds, &w, params)
}

/// Fits on precomputed weights. `params.k` is kept for out-of-sample
/// queries and the scale is taken from `w`; `params.eps` is ignored.
pub fn fit_with_weights(
    ds: &LabeledDataset,
    w: &WeightMatrix,
    params: &FitParams,
) -> Result<CcdrModel> {
    let c = make_indicator(ds);
    let aug = build_augmented(w, &c, params.beta)?;
    let (l, n, m) = (aug.num_classes(), aug.num_points(), params.m);
    if m < 1 || m + 1 > l + n {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension {m} must satisfy 1 <= m < L + n = {}",
            l + n
        )));
    }
    let mut sol = generalized_eig_owned(aug.laplacian_dense(), aug.degrees(), m + 1)?;
    sol.align_null_space_to_constant(NULL_SPACE_TOL);
    let top = sol.values()[m];
    if !(top < 1.0 - EIGENVALUE_MARGIN) {
        return Err(Error::EigenvalueTooLarge {
            index: m + 1,
            value: top,
        });
    }
    let u = sol.vectors();
    let centers = Matrix::from_fn(l, m, |k, j| u[(k, j + 1)]);
    let embedding = Matrix::from_fn(n, m, |i, j| u[(l + i, j + 1)]);
    Ok(CcdrModel {
        centers,
        embedding,
        eigenvalues: sol.values()[1..].to_vec(),
        beta: params.beta,
        eps: w.eps(),
        k: params.k,
        num_classes: l,
        train_points: ds.points().clone(),
        train_labels: ds.labels().to_vec(),
        class_counts: c.class_counts(),
        oos_kernel: params.oos_kernel,
    })
}

/// A fitted embedding plus what the out-of-sample extension needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdrModel {
    /// `L x m`, row `k` is the center of class `k + 1`.
    centers: Matrix,
    /// `n x m`, row `i` is the embedding of training point `i`.
    embedding: Matrix,
    /// `λ_2, ..., λ_{m+1}`.
    eigenvalues: Vec<f64>,
    beta: f64,
    eps: f64,
    k: usize,
    num_classes: usize,
    train_points: Matrix,
    train_labels: Vec<usize>,
    class_counts: Vec<usize>,
    oos_kernel: OosKernel,
}

impl CcdrModel {
    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn embedding(&self) -> &Matrix {
        &self.embedding
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn train_points(&self) -> &Matrix {
        &self.train_points
    }

    pub fn train_labels(&self) -> &[usize] {
        &self.train_labels
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn oos_kernel(&self) -> OosKernel {
        self.oos_kernel
    }

    pub fn set_oos_kernel(&mut self, mode: OosKernel) {
        self.oos_kernel = mode;
    }

    /// Checks that the stored parts fit together, e.g. after deserialising.
    pub fn validate(&self) -> Result<()> {
        let (l, m, n) = (
            self.num_classes,
            self.eigenvalues.len(),
            self.embedding.rows(),
        );
        let shapes_ok = m >= 1
            && self.centers.rows() == l
            && self.centers.cols() == m
            && self.embedding.cols() == m
            && self.train_points.rows() == n
            && self.train_labels.len() == n
            && self.class_counts.len() == l;
        if !shapes_ok {
            return Err(Error::DimensionMismatch(
                "model parts have inconsistent shapes".into(),
            ));
        }
        if self.train_labels.iter().any(|&c| c > l) {
            return Err(Error::InvalidDataset(
                "training label exceeds class count".into(),
            ));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::NonPositiveScale(self.eps));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if self.k < 1 || self.k >= n {
            return Err(Error::NeighborCount { k: self.k, n });
        }
        if let Some((index, &value)) = self
            .eigenvalues
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v < 1.0 - EIGENVALUE_MARGIN))
        {
            return Err(Error::EigenvalueTooLarge {
                index: index + 2,
                value,
            });
        }
        Ok(())
    }

    /// Model restricted to its leading `m` embedding coordinates.
    ///
    /// The eigenvectors for a smaller dimension are a prefix of those for a
    /// larger one, so this equals a fresh fit with dimension `m`.
    pub fn truncated(&self, m: usize) -> Result<CcdrModel> {
        if m < 1 || m > self.dim() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a {}-dimensional model to {m}",
                self.dim()
            )));
        }
        let mut out = self.clone();
        out.centers = self.centers.leading_columns(m);
        out.embedding = self.embedding.leading_columns(m);
        out.eigenvalues.truncate(m);
        Ok(out)
    }

    /// Stacked solution, `(L + n) x m`: class centers then points.
    pub fn stacked(&self) -> Matrix {
        let (l, m) = (self.num_classes, self.dim());
        Matrix::from_fn(l + self.embedding.rows(), m, |a, j| {
            if a < l {
                self.centers[(a, j)]
            } else {
                self.embedding[(a - l, j)]
            }
        })
    }

    /// Kernel entries `(j, K(x, x_j))` for a query under the model's kernel mode.
    pub fn kernel(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        match self.oos_kernel {
            OosKernel::Neighbors => kernel_entries(x, &self.train_points, self.k, self.eps),
            OosKernel::Full => kernel_entries_full(x, &self.train_points, self.eps),
        }
    }

    /// Out-of-sample map for a query with label `c` (`0` = unlabeled):
    ///
    /// `f_l = [I(c≠0) z_c(l) + β Σ_j K_j y_j(l)] / [(1 - λ_l)(I(c≠0) + β Σ_j K_j)]`
    pub fn embed_with_kernel(&self, kernel: &[(usize, f64)], c: usize) -> Result<Vec<f64>> {
        if c > self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {c} exceeds class count {}",
                self.num_classes
            )));
        }
        let n = self.embedding.rows();
        let m = self.dim();
        let labeled = if c != 0 { 1.0 } else { 0.0 };
        let mut acc = vec![0.0; m];
        let mut mass = 0.0;
        for &(j, kj) in kernel {
            if j >= n {
                return Err(Error::InvalidArgument(format!(
                    "kernel index {j} out of range"
                )));
            }
            mass += kj;
            for (a, y) in acc.iter_mut().zip(self.embedding.row(j)) {
                *a += kj * y;
            }
        }
        let denom = labeled + self.beta * mass;
        if !(denom > 0.0) {
            return Err(Error::OutsideSupport);
        }
        Ok((0..m)
            .map(|l| {
                let z = if c != 0 {
                    self.centers[(c - 1, l)]
                } else {
                    0.0
                };
                (labeled * z + self.beta * acc[l]) / ((1.0 - self.eigenvalues[l]) * denom)
            })
            .collect())
    }

    pub fn embed_oos(&self, x: &[f64], c: usize) -> Result<Vec<f64>> {
        let kernel = self.kernel(x)?;
        self.embed_with_kernel(&kernel, c)
    }

    /// Embeds every row of `points` as an unlabeled query.
    pub fn embed_unlabeled(&self, points: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(points.rows(), self.dim());
        for (i, x) in points.iter_rows().enumerate() {
            let y = self.embed_oos(x, 0)?;
            out.row_mut(i).copy_from_slice(&y);
        }
        Ok(out)
    }

    /// Residuals of the eigen-constraints against the augmented graph the
    /// model was fitted on.
    pub fn constraint_report(&self, aug: &AugmentedLaplacian) -> Result<ConstraintReport> {
        let (l, n, m) = (self.num_classes, self.embedding.rows(), self.dim());
        if aug.num_classes() != l || aug.num_points() != n {
            return Err(Error::DimensionMismatch(
                "augmented graph does not match model".into(),
            ));
        }
        let zhat = self.stacked();
        let d = aug.degrees();
        let mut gram: f64 = 0.0;
        let mut centering: f64 = 0.0;
        for a in 0..m {
            let s: f64 = (0..l + n).map(|r| d[r] * zhat[(r, a)]).sum();
            centering = centering.max(s.abs());
            for b in 0..m {
                let g: f64 = (0..l + n).map(|r| d[r] * zhat[(r, a)] * zhat[(r, b)]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                gram = gram.max((g - target).abs());
            }
        }

        let c = aug.indicator();
        let mut center_identity: f64 = 0.0;
        for k in 0..l {
            let nk = self.class_counts[k] as f64;
            for j in 0..m {
                let s: f64 = (0..n)
                    .filter(|&i| c.label(i) == k + 1)
                    .map(|i| self.embedding[(i, j)])
                    .sum();
                let rhs = s / ((1.0 - self.eigenvalues[j]) * nk);
                center_identity = center_identity.max((self.centers[(k, j)] - rhs).abs());
            }
        }

        let mut row_identity: f64 = 0.0;
        for i in 0..n {
            let ci = c.label(i);
            let labeled = if ci != 0 { 1.0 } else { 0.0 };
            let row = aug.weights().row(i);
            let mass: f64 = row.iter().map(|&(_, w)| w).sum();
            for j in 0..m {
                let z = if ci != 0 {
                    self.centers[(ci - 1, j)]
                } else {
                    0.0
                };
                let wy: f64 = row.iter().map(|&(t, w)| w * self.embedding[(t, j)]).sum();
                let rhs = (labeled * z + aug.beta() * wy)
                    / ((1.0 - self.eigenvalues[j]) * (labeled + aug.beta() * mass));
                row_identity = row_identity.max((self.embedding[(i, j)] - rhs).abs());
            }
        }
        Ok(ConstraintReport {
            gram,
            centering,
            center_identity,
            row_identity,
        })
    }
}

/// Max-abs residuals of the fitted solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    /// `Ẑ D Ẑᵀ - I`.
    pub gram: f64,
    /// `Ẑ D 1`.
    pub centering: f64,
    /// `z_k(l) - Σ_i c_ki y_i(l) / ((1 - λ_l) n_k)`.
    pub center_identity: f64,
    /// Point rows of `G u = (1 - λ) D u`.
    pub row_identity: f64,
}

impl ConstraintReport {
    pub fn max(&self) -> f64 {
        self.gram
            .max(self.centering)
            .max(self.center_identity)
            .max(self.row_identity)
    }
}

/// `Σ_ki c_ki |z_k - y_i|² + (β/2) Σ_ij w_ij |y_i - y_j|²`.
pub fn cost(
    centers: &Matrix,
    y: &Matrix,
    c: &ClassIndicator,
    w: &WeightMatrix,
    beta: f64,
) -> Result<f64> {
    let n = y.rows();
    if c.num_points() != n || w.len() != n || centers.rows() != c.num_classes() {
        return Err(Error::DimensionMismatch("cost operands".into()));
    }
    if centers.cols() != y.cols() {
        return Err(Error::DimensionMismatch(
            "centers and points differ in dimension".into(),
        ));
    }
    let mut label_term = 0.0;
    let mut smooth_term = 0.0;
    for i in 0..n {
        let ci = c.label(i);
        if ci != 0 {
            label_term += squared_distance(centers.row(ci - 1), y.row(i));
        }
        for &(j, wij) in w.row(i) {
            smooth_term += wij * squared_distance(y.row(i), y.row(j));
        }
    }
    Ok(label_term + 0.5 * beta * smooth_term)
}
