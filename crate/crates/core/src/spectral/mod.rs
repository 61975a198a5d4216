//! Symmetric and generalized symmetric eigenproblems.
//!
//! The generalized problem `L u = λ D u` with positive diagonal `D` is
//! reduced to the standard symmetric problem for
//! `S = D^{-1/2} L D^{-1/2}` and mapped back with `u = D^{-1/2} v`, so the
//! returned eigenvectors satisfy `uᵀ D u = 1`.
//!
//! Every eigenvector is sign-normalised: its largest-magnitude entry is
//! positive, with ties going to the lowest index. Entries within a relative
//! `1e-9` of the largest magnitude count as tied, so that rounding cannot
//! flip the sign of vectors such as `(a, -a)`.

mod tridiagonal;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use tridiagonal::Tridiagonal;

/// Consecutive selected eigenvalues closer than this trigger a warning.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Matrices up to this order always use the full QL path.
const SMALL_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    values: Vec<f64>,
    /// `n x p`, column `l` is the eigenvector for `values[l]`.
    vectors: Matrix,
    metric: Vec<f64>,
}

impl EigenSolution {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn vector(&self, l: usize) -> Vec<f64> {
        self.vectors.column(l)
    }

    /// Diagonal of the metric the vectors are orthonormal under.
    pub fn metric(&self) -> &[f64] {
        &self.metric
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Order of the matrix.
    pub fn dim(&self) -> usize {
        self.vectors.rows()
    }

    /// Rotates the numerically null leading block (`λ <= tol`) so that its
    /// first vector is the metric-normalised constant vector and the rest are
    /// metric-orthogonal to it.
    ///
    /// For a Laplacian with several connected components the null space has
    /// dimension > 1 and the solver may return any basis of it; dropping the
    /// first vector then only removes the constant direction after this
    /// rotation.
    pub fn align_null_space_to_constant(&mut self, tol: f64) {
        let b = self.values.iter().take_while(|&&v| v <= tol).count();
        if b < 2 {
            return;
        }
        let n = self.dim();
        let total: f64 = self.metric.iter().sum();
        let norm = libm::sqrt(total);
        // coefficients of the normalised constant vector in the block
        let mut a: Vec<f64> = (0..b)
            .map(|l| {
                (0..n)
                    .map(|i| self.vectors[(i, l)] * self.metric[i])
                    .sum::<f64>()
                    / norm
            })
            .collect();
        let alen = libm::sqrt(a.iter().map(|x| x * x).sum::<f64>());
        if alen < 0.5 {
            log::warn!("constant vector is not inside the computed null space");
            return;
        }
        a.iter_mut().for_each(|x| *x /= alen);
        // Householder H with H e1 = a; new block = old block * H
        let mut v = a.clone();
        v[0] -= 1.0;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let h = Matrix::from_fn(b, b, |r, c| {
            let id = if r == c { 1.0 } else { 0.0 };
            if vv > 0.0 {
                id - 2.0 * v[r] * v[c] / vv
            } else {
                id
            }
        });
        for i in 0..n {
            let old: Vec<f64> = (0..b).map(|l| self.vectors[(i, l)]).collect();
            for c in 0..b {
                self.vectors[(i, c)] = (0..b).map(|r| old[r] * h[(r, c)]).sum();
            }
        }
        for l in 0..b {
            fix_sign_column(&mut self.vectors, l);
        }
    }
}

/// Magnitudes within this relative distance of the maximum count as tied.
const SIGN_TIE: f64 = 1e-9;

fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let best = v.iter().position(|x| x.abs() >= max * (1.0 - SIGN_TIE));
    if best.is_some_and(|i| v[i] < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn fix_sign_column(m: &mut Matrix, l: usize) {
    let mut col = m.column(l);
    fix_sign(&mut col);
    m.set_column(l, &col);
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let tol = 1e-10 * m.max_abs().max(1.0);
    if let Some((row, col, diff)) = m.find_asymmetry(tol) {
        return Err(Error::Asymmetric { row, col, diff });
    }
    Ok(())
}

fn warn_degenerate(values: &[f64]) {
    for (l, w) in values.windows(2).enumerate() {
        if (w[1] - w[0]).abs() < DEGENERACY_GAP {
            log::warn!(
                "eigenvalues {} and {} are not separated ({:e}); eigenvectors are not unique",
                l,
                l + 1,
                (w[1] - w[0]).abs()
            );
        }
    }
}

/// Eigenpairs of a symmetric matrix at ascending positions `range`.
fn symmetric_range(m: Matrix, range: core::ops::Range<usize>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.rows();
    let tri = Tridiagonal::reduce(m);
    if n <= SMALL_ORDER || 3 * range.len() > n {
        let (mut values, mut vectors) = tri.full();
        values.truncate(range.end);
        vectors.truncate(range.end);
        values.drain(..range.start);
        vectors.drain(..range.start);
        (values, vectors)
    } else {
        tri.selected(range)
    }
}

fn assemble(values: Vec<f64>, rows: Vec<Vec<f64>>, n: usize, metric: Vec<f64>) -> EigenSolution {
    let p = values.len();
    let mut vectors = Matrix::zeros(n, p);
    for (l, mut v) in rows.into_iter().enumerate() {
        fix_sign(&mut v);
        vectors.set_column(l, &v);
    }
    EigenSolution {
        values,
        vectors,
        metric,
    }
}

/// The `count` smallest eigenpairs of `lap u = λ diag(degrees) u`.
pub fn generalized_eig(lap: &Matrix, degrees: &[f64], count: usize) -> Result<EigenSolution> {
    generalized_eig_owned(lap.clone(), degrees, count)
}

/// As [`generalized_eig`], reusing the storage of `lap`.
pub fn generalized_eig_owned(
    mut lap: Matrix,
    degrees: &[f64],
    count: usize,
) -> Result<EigenSolution> {
    check_symmetric(&lap)?;
    let n = lap.rows();
    if degrees.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} degrees for a {n}x{n} matrix",
            degrees.len()
        )));
    }
    if let Some(i) = degrees.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::SingularDegree(i));
    }
    if count > n {
        return Err(Error::InvalidArgument(format!(
            "{count} eigenpairs requested of order {n}"
        )));
    }
    let isd: Vec<f64> = degrees.iter().map(|d| 1.0 / libm::sqrt(*d)).collect();
    for i in 0..n {
        let row = lap.row_mut(i);
        let si = isd[i];
        for (x, sj) in row.iter_mut().zip(&isd) {
            *x *= si * sj;
        }
    }
    let (values, mut rows) = symmetric_range(lap, 0..count);
    for v in &mut rows {
        v.iter_mut().zip(&isd).for_each(|(x, s)| *x *= s);
    }
    warn_degenerate(&values);
    Ok(assemble(values, rows, n, degrees.to_vec()))
}

/// The `count` largest eigenpairs of a symmetric matrix, largest first.
pub fn sym_eig_desc(m: &Matrix, count: usize) -> Result<EigenSolution> {
    check_symmetric(m)?;
    let n = m.rows();
    if count > n {
        return Err(Error::InvalidArgument(format!(
            "{count} eigenpairs requested of order {n}"
        )));
    }
    let (mut values, mut rows) = symmetric_range(m.clone(), n - count..n);
    values.reverse();
    rows.reverse();
    warn_degenerate(&values);
    Ok(assemble(values, rows, n, vec![1.0; n]))
}

/// The `count` smallest eigenpairs of a symmetric matrix, smallest first.
pub fn sym_eig_asc(m: &Matrix, count: usize) -> Result<EigenSolution> {
    check_symmetric(m)?;
    let n = m.rows();
    if count > n {
        return Err(Error::InvalidArgument(format!(
            "{count} eigenpairs requested of order {n}"
        )));
    }
    let (values, rows) = symmetric_range(m.clone(), 0..count);
    warn_degenerate(&values);
    Ok(assemble(values, rows, n, vec![1.0; n]))
}
