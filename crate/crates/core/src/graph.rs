//! Symmetric kNN graphs and heat-kernel weights.
//!
//! Distances are Euclidean and computed exhaustively. Ties are broken by
//! ascending vertex index so the graph does not depend on platform or
//! evaluation order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

/// Undirected kNN graph: `(i, j)` is an edge when either point is among
/// the other's `k` nearest neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    k: usize,
    /// Sorted neighbor lists, symmetric.
    adjacency: Vec<Vec<usize>>,
}

impl NeighborGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

#[inline]
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` nearest rows of `points` to `query`, nearest first, as
/// `(squared distance, index)`. `skip` excludes one row (the query itself).
pub(crate) fn nearest(
    points: &Matrix,
    query: &[f64],
    k: usize,
    skip: Option<usize>,
) -> Vec<(f64, usize)> {
    let mut cand: Vec<(f64, usize)> = points
        .iter_rows()
        .enumerate()
        .filter(|&(j, _)| Some(j) != skip)
        .map(|(j, row)| (squared_distance(query, row), j))
        .collect();
    let k = k.min(cand.len());
    if k == 0 {
        return Vec::new();
    }
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, by_distance_then_index);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_distance_then_index);
    cand
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k < 1 || k >= n {
        return Err(Error::NeighborCount { k, n });
    }
    Ok(())
}

/// Symmetrized-union kNN graph over the rows of `points`.
pub fn knn_graph(points: &Matrix, k: usize) -> Result<NeighborGraph> {
    let n = points.rows();
    check_k(k, n)?;
    let mut adjacency = vec![Vec::with_capacity(2 * k); n];
    for i in 0..n {
        for (_, j) in nearest(points, points.row(i), k, Some(i)) {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
        nb.dedup();
    }
    Ok(NeighborGraph { k, adjacency })
}

/// Sparse symmetric nonnegative weights with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    eps: f64,
    /// Row `i` holds `(j, w_ij)` sorted by `j`.
    rows: Vec<Vec<(usize, f64)>>,
}

impl WeightMatrix {
    /// Builds from `(i, j, w)` triplets with `i != j`; each pair is stored in
    /// both rows. Duplicate pairs are rejected.
    pub fn from_triplets(n: usize, eps: f64, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n];
        for &(i, j, w) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i}, {j}) out of range"
                )));
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at {i}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidArgument(format!("weight {w} on ({i}, {j})")));
            }
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(j, _)| j);
            if row.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate edge at vertex {i}"
                )));
            }
        }
        Ok(Self { eps, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |pos| self.rows[i][pos].1)
    }

    /// `Σ_j w_ij`.
    pub fn degree(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.degree(i)).collect()
    }

    /// Edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, w)| (i, j, w))
        })
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.len();
        let mut m = Matrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] = w;
            }
        }
        m
    }
}

/// `w_ij = exp(-|x_i - x_j|² / eps)` on graph edges, zero elsewhere.
pub fn heat_weights(g: &NeighborGraph, points: &Matrix, eps: f64) -> Result<WeightMatrix> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::NonPositiveScale(eps));
    }
    if g.len() != points.rows() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} vertices, {} points given",
            g.len(),
            points.rows()
        )));
    }
    let mut rows: Vec<Vec<(usize, f64)>> = (0..g.len())
        .map(|i| Vec::with_capacity(g.degree(i)))
        .collect();
    // each weight is evaluated once and shared by both rows
    for (i, j) in g.edges() {
        let w = libm::exp(-squared_distance(points.row(i), points.row(j)) / eps);
        rows[i].push((j, w));
        rows[j].push((i, w));
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|&(j, _)| j);
    }
    Ok(WeightMatrix { eps, rows })
}

/// Median of squared edge lengths, used as the default heat-kernel scale.
///
/// Falls back to the mean of the positive squared lengths, then to 1, when
/// the median is zero (duplicate points).
pub fn median_heuristic_eps(g: &NeighborGraph, points: &Matrix) -> f64 {
    let mut d2: Vec<f64> = g
        .edges()
        .map(|(i, j)| squared_distance(points.row(i), points.row(j)))
        .collect();
    if d2.is_empty() {
        return 1.0;
    }
    d2.sort_unstable_by(f64::total_cmp);
    let mid = d2.len() / 2;
    let median = if d2.len() % 2 == 1 {
        d2[mid]
    } else {
        0.5 * (d2[mid - 1] + d2[mid])
    };
    if median > 0.0 {
        return median;
    }
    let positive: Vec<f64> = d2.into_iter().filter(|&v| v > 0.0).collect();
    if positive.is_empty() {
        1.0
    } else {
        positive.iter().sum::<f64>() / positive.len() as f64
    }
}

/// Heat-kernel entries between `x` and its `k` nearest training points,
/// as sparse `(index, weight)` pairs sorted by index.
pub fn kernel_entries(x: &[f64], train: &Matrix, k: usize, eps: f64) -> Result<Vec<(usize, f64)>> {
    check_k(k, train.rows())?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::NonPositiveScale(eps));
    }
    if x.len() != train.cols() {
        return Err(Error::DimensionMismatch(format!(
            "query has {} features, training points have {}",
            x.len(),
            train.cols()
        )));
    }
    let mut out: Vec<(usize, f64)> = nearest(train, x, k, None)
        .into_iter()
        .map(|(d2, j)| (j, libm::exp(-d2 / eps)))
        .collect();
    out.sort_unstable_by_key(|&(j, _)| j);
    Ok(out)
}

/// Heat-kernel entries between `x` and every training point.
pub fn kernel_entries_full(x: &[f64], train: &Matrix, eps: f64) -> Result<Vec<(usize, f64)>> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::NonPositiveScale(eps));
    }
    if x.len() != train.cols() {
        return Err(Error::DimensionMismatch("query feature count".into()));
    }
    Ok(train
        .iter_rows()
        .enumerate()
        .map(|(j, row)| (j, libm::exp(-squared_distance(x, row) / eps)))
        .collect())
}

/// Dense length-`n` kernel row: `exp(-|x - x_j|²/eps)` for the `k` nearest
/// training points `x_j`, zero elsewhere.
pub fn kernel_row(x: &[f64], train: &Matrix, k: usize, eps: f64) -> Result<Vec<f64>> {
    let mut row = vec![0.0; train.rows()];
    for (j, w) in kernel_entries(x, train, k, eps)? {
        row[j] = w;
    }
    Ok(row)
}
