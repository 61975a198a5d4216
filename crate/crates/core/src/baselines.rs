//! Reference embeddings: PCA, classical MDS, LDA and Laplacian eigenmaps.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::graph::WeightMatrix;
use crate::matrix::{backward_substitute_transposed, cholesky, dot, forward_substitute, Matrix};
use crate::spectral::{generalized_eig_owned, sym_eig_desc};

/// Relative ridge added to the within-class scatter when it is singular.
pub const LDA_RIDGE: f64 = 1e-6;

/// An affine map `x -> A (x - offset)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearEmbedding {
    /// `m x d`, one direction per row.
    projection: Matrix,
    offset: Vec<f64>,
    /// Eigenvalues of the fitted problem, largest first, for all `d` directions.
    spectrum: Vec<f64>,
}

impl LinearEmbedding {
    pub fn projection(&self) -> &Matrix {
        &self.projection
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn transform_point(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.offset).map(|(a, b)| a - b).collect();
        self.projection
            .iter_rows()
            .map(|a| dot(a, &centered))
            .collect()
    }

    pub fn transform(&self, points: &Matrix) -> Result<Matrix> {
        if points.cols() != self.offset.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} features, got {}",
                self.offset.len(),
                points.cols()
            )));
        }
        let mut out = Matrix::zeros(points.rows(), self.dim());
        for (i, x) in points.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.transform_point(x));
        }
        Ok(out)
    }
}

fn check_dim(m: usize, d: usize) -> Result<()> {
    if m < 1 || m > d {
        return Err(Error::InvalidArgument(format!(
            "dimension {m} outside 1..={d}"
        )));
    }
    Ok(())
}

fn column_mean(points: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; points.cols()];
    for x in points.iter_rows() {
        mean.iter_mut().zip(x).for_each(|(a, b)| *a += b);
    }
    let n = points.rows() as f64;
    mean.iter_mut().for_each(|a| *a /= n);
    mean
}

/// Adds `w (x - c)(x - c)ᵀ` into `acc`.
fn add_outer(acc: &mut Matrix, x: &[f64], c: &[f64], w: f64) {
    let dx: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - b).collect();
    for (i, di) in dx.iter().enumerate() {
        let row = acc.row_mut(i);
        for (r, dj) in row.iter_mut().zip(&dx) {
            *r += w * di * dj;
        }
    }
}

/// Principal components of `points` with the `1/n` covariance.
pub fn pca_fit(points: &Matrix, m: usize) -> Result<LinearEmbedding> {
    let (n, d) = (points.rows(), points.cols());
    if n < 2 {
        return Err(Error::InvalidArgument(
            "PCA needs at least two points".into(),
        ));
    }
    check_dim(m, d)?;
    let mean = column_mean(points);
    let mut cov = Matrix::zeros(d, d);
    for x in points.iter_rows() {
        add_outer(&mut cov, x, &mean, 1.0 / n as f64);
    }
    let sol = sym_eig_desc(&cov, d)?;
    let projection = Matrix::from_fn(m, d, |l, j| sol.vectors()[(j, l)]);
    Ok(LinearEmbedding {
        projection,
        offset: mean,
        spectrum: sol.values().to_vec(),
    })
}

/// Smallest `m` whose leading eigenvalues hold `fraction` of the total.
pub fn energy_dimension(spectrum: &[f64], fraction: f64) -> usize {
    let total: f64 = spectrum.iter().map(|v| v.max(0.0)).sum();
    if total <= 0.0 {
        return 1;
    }
    let mut acc = 0.0;
    for (i, v) in spectrum.iter().enumerate() {
        acc += v.max(0.0);
        if acc >= fraction * total {
            return i + 1;
        }
    }
    spectrum.len()
}

/// Classical MDS from squared distances: eigen-decomposition of
/// `B = -½ H D² H`. Negative eigenvalues are clamped to zero; columns
/// beyond `n` are zero.
pub fn mds_fit(d2: &Matrix, m: usize) -> Result<Matrix> {
    let n = d2.rows();
    if !d2.is_square() || n == 0 {
        return Err(Error::InvalidArgument(
            "distance matrix must be square and non-empty".into(),
        ));
    }
    if m < 1 {
        return Err(Error::InvalidArgument(
            "MDS dimension must be positive".into(),
        ));
    }
    let tol = 1e-10 * d2.max_abs().max(1.0);
    if let Some((row, col, diff)) = d2.find_asymmetry(tol) {
        return Err(Error::Asymmetric { row, col, diff });
    }
    for i in 0..n {
        if d2[(i, i)].abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "nonzero diagonal entry at {i}"
            )));
        }
        if let Some(j) = d2.row(i).iter().position(|&v| v < -tol) {
            return Err(Error::InvalidArgument(format!(
                "negative squared distance at ({i}, {j})"
            )));
        }
    }
    let row_mean: Vec<f64> = d2
        .iter_rows()
        .map(|r| r.iter().sum::<f64>() / n as f64)
        .collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let b = Matrix::from_fn(n, n, |i, j| {
        -0.5 * (d2[(i, j)] - row_mean[i] - row_mean[j] + grand)
    });
    let p = m.min(n);
    let sol = sym_eig_desc(&b, p)?;
    let scale = sol.values().first().map_or(0.0, |v| v.abs()).max(1.0);
    if sol.values().iter().any(|&v| v < -1e-10 * scale) {
        warn!("MDS: clamped negative eigenvalues of the centered Gram matrix");
    }
    let mut out = Matrix::zeros(n, m);
    for (l, &lambda) in sol.values().iter().enumerate() {
        if lambda > 1e-10 {
            let s = libm::sqrt(lambda);
            for i in 0..n {
                out[(i, l)] = s * sol.vectors()[(i, l)];
            }
        }
    }
    Ok(out)
}

/// Fisher LDA on a fully labeled dataset.
///
/// Solves `C_B a = λ C_W a` with `C_B = (1/n) Σ_k n_k (x̄_k - x̄)(x̄_k - x̄)ᵀ`
/// and `C_W = (1/n) Σ_k n_k C_W^(k)` through a Cholesky factor of `C_W`.
/// A singular `C_W` gets a ridge of `1e-6 tr(C_W) / d`.
pub fn lda_fit(ds: &LabeledDataset, m: usize) -> Result<LinearEmbedding> {
    if !ds.is_fully_labeled() {
        return Err(Error::InvalidDataset(
            "LDA requires every point to be labeled".into(),
        ));
    }
    let (n, d, l) = (ds.len(), ds.dim(), ds.num_classes());
    check_dim(m, d)?;
    let counts = ds.class_counts();
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidDataset(format!("class {} is empty", k + 1)));
    }
    if m > l - 1 {
        warn!(
            "LDA: dimension {m} exceeds L - 1 = {}; trailing directions are arbitrary",
            l - 1
        );
    }
    let points = ds.points();
    let mean = column_mean(points);
    let mut class_mean = Matrix::zeros(l, d);
    for (x, &c) in points.iter_rows().zip(ds.labels()) {
        class_mean
            .row_mut(c - 1)
            .iter_mut()
            .zip(x)
            .for_each(|(a, b)| *a += b);
    }
    for (k, &nk) in counts.iter().enumerate() {
        class_mean
            .row_mut(k)
            .iter_mut()
            .for_each(|a| *a /= nk as f64);
    }
    let inv_n = 1.0 / n as f64;
    let mut cb = Matrix::zeros(d, d);
    for (k, &nk) in counts.iter().enumerate() {
        add_outer(&mut cb, class_mean.row(k), &mean, nk as f64 * inv_n);
    }
    // n_k C_W^(k) = Σ_{i in k} (x_i - x̄_k)(x_i - x̄_k)ᵀ
    let mut cw = Matrix::zeros(d, d);
    for (x, &c) in points.iter_rows().zip(ds.labels()) {
        add_outer(&mut cw, x, class_mean.row(c - 1), inv_n);
    }

    let chol = match cholesky(&cw) {
        Some(f) => f,
        None => {
            let trace: f64 = (0..d).map(|i| cw[(i, i)]).sum();
            let ridge = LDA_RIDGE * trace.max(f64::MIN_POSITIVE) / d as f64;
            warn!("LDA: within-class scatter singular, adding ridge {ridge:e}");
            for i in 0..d {
                cw[(i, i)] += ridge;
            }
            cholesky(&cw).ok_or_else(|| {
                Error::InvalidDataset("within-class scatter is not positive definite".into())
            })?
        }
    };

    // M = F⁻¹ C_B F⁻ᵀ, built column by column.
    let mut half = Matrix::zeros(d, d);
    for j in 0..d {
        half.set_column(j, &forward_substitute(&chol, &cb.column(j)));
    }
    let mut reduced = Matrix::zeros(d, d);
    for i in 0..d {
        let row = forward_substitute(&chol, half.row(i));
        reduced.row_mut(i).copy_from_slice(&row);
    }
    // symmetrise against rounding before the eigensolver's symmetry check
    for i in 0..d {
        for j in 0..i {
            let avg = 0.5 * (reduced[(i, j)] + reduced[(j, i)]);
            reduced[(i, j)] = avg;
            reduced[(j, i)] = avg;
        }
    }
    let sol = sym_eig_desc(&reduced, d)?;
    let mut projection = Matrix::zeros(m, d);
    for l in 0..m {
        let a = backward_substitute_transposed(&chol, &sol.vector(l));
        projection.row_mut(l).copy_from_slice(&a);
    }
    Ok(LinearEmbedding {
        projection,
        offset: mean,
        spectrum: sol.values().to_vec(),
    })
}

/// Laplacian eigenmaps embedding with its eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenmap {
    /// `n x m`.
    pub embedding: Matrix,
    /// `λ_2, ..., λ_{m+1}`.
    pub eigenvalues: Vec<f64>,
}

impl Eigenmap {
    /// Nyström extension `f_l(x) = Σ_j K_j y_j(l) / ((1 - λ_l) Σ_j K_j)`
    /// from kernel entries `(j, K_j)`.
    pub fn extend(&self, kernel: &[(usize, f64)]) -> Result<Vec<f64>> {
        let mass: f64 = kernel.iter().map(|&(_, k)| k).sum();
        if !(mass > 0.0) {
            return Err(Error::OutsideSupport);
        }
        Ok((0..self.eigenvalues.len())
            .map(|l| {
                let s: f64 = kernel
                    .iter()
                    .map(|&(j, k)| k * self.embedding[(j, l)])
                    .sum();
                s / ((1.0 - self.eigenvalues[l]) * mass)
            })
            .collect())
    }
}

/// Eigenvectors `2..=m+1` of `(D - W) u = λ D u` and their eigenvalues.
pub fn laplacian_eigenmap_fit(w: &WeightMatrix, m: usize) -> Result<Eigenmap> {
    let n = w.len();
    if m < 1 || m + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "dimension {m} needs more than {n} points"
        )));
    }
    let degrees = w.degrees();
    if let Some(i) = degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::SingularDegree(i));
    }
    let mut lap = w.to_dense();
    lap.as_mut_slice().iter_mut().for_each(|x| *x = -*x);
    for (i, d) in degrees.iter().enumerate() {
        lap[(i, i)] += d;
    }
    let mut sol = generalized_eig_owned(lap, &degrees, m + 1)?;
    sol.align_null_space_to_constant(crate::ccdr::NULL_SPACE_TOL);
    Ok(Eigenmap {
        embedding: Matrix::from_fn(n, m, |i, l| sol.vectors()[(i, l + 1)]),
        eigenvalues: sol.values()[1..].to_vec(),
    })
}

/// Laplacian eigenmaps: eigenvectors `2..=m+1` of `(D - W) u = λ D u`, `n x m`.
pub fn laplacian_eigenmap(w: &WeightMatrix, m: usize) -> Result<Matrix> {
    laplacian_eigenmap_fit(w, m).map(|e| e.embedding)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pca_axis_aligned() {
        let pts = Matrix::from_rows(&[[-2.0, 0.1], [2.0, -0.1], [-1.0, 0.0], [1.0, 0.0]]).unwrap();
        let p = pca_fit(&pts, 1).unwrap();
        let a = p.projection().row(0);
        assert!(a[0].abs() > 0.99);
        assert!((p.spectrum()[0] - 2.5).abs() < 0.01);
        assert!(pca_fit(&pts, 3).is_err());
    }

    #[test]
    fn energy_threshold() {
        assert_eq!(energy_dimension(&[5.0, 3.0, 2.0], 0.5), 1);
        assert_eq!(energy_dimension(&[5.0, 3.0, 2.0], 0.8), 2);
        assert_eq!(energy_dimension(&[5.0, 3.0, 2.0], 0.81), 3);
    }

    #[test]
    fn mds_rejects_bad_input() {
        let bad = Matrix::from_rows(&[[1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(mds_fit(&bad, 1).is_err());
        let neg = Matrix::from_rows(&[[0.0, -1.0], [-1.0, 0.0]]).unwrap();
        assert!(mds_fit(&neg, 1).is_err());
        let asym = Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]]).unwrap();
        assert!(matches!(mds_fit(&asym, 1), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn mds_pads_extra_columns() {
        let d2 = Matrix::from_rows(&[[0.0, 4.0], [4.0, 0.0]]).unwrap();
        let x = mds_fit(&d2, 3).unwrap();
        assert_eq!(x.cols(), 3);
        assert!(((x[(0, 0)] - x[(1, 0)]).abs() - 2.0).abs() < 1e-12);
        assert_eq!(x[(0, 2)], 0.0);
    }

    #[test]
    fn lda_requires_labels() {
        let pts = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let ds = LabeledDataset::new(pts, vec![1, 0, 2], 2, "t").unwrap();
        assert!(lda_fit(&ds, 1).is_err());
    }
}
