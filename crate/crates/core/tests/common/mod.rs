#![allow(dead_code, clippy::needless_range_loop)]

use ccdr_core::graph::median_heuristic_eps;
use ccdr_core::{heat_weights, knn_graph, LabeledDataset, Matrix, WeightMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cyclic Jacobi on a dense symmetric matrix. Returns ascending eigenvalues
/// and the matching eigenvectors as columns of `v` (`v[i][l]`).
pub fn jacobi(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale: f64 = a
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(1e-300);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x][x].total_cmp(&a[y][y]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..n)
        .map(|i| order.iter().map(|&l| v[i][l]).collect())
        .collect();
    (values, vecs)
}

/// Largest-magnitude entry made positive, near-ties to the lowest index.
pub fn normalize_sign(v: &mut [f64]) {
    let max = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut best = 0;
    while v[best].abs() < max * (1.0 - 1e-9) {
        best += 1;
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(|r| r.to_vec()).collect()
}

/// Random points with labels in `0..=l`, every class labeled at least once.
pub fn random_dataset(
    rng: &mut impl Rng,
    n: usize,
    d: usize,
    l: usize,
    p_unlabeled: f64,
) -> LabeledDataset {
    let pts = Matrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    let mut labels: Vec<usize> = (0..n)
        .map(|i| {
            if i < l {
                i + 1
            } else if rng.random_bool(p_unlabeled) {
                0
            } else {
                rng.random_range(1..=l)
            }
        })
        .collect();
    // shuffle so the guaranteed labels are not always first
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    LabeledDataset::new(pts, labels, l, "random").unwrap()
}

pub fn weights_for(ds: &LabeledDataset, k: usize) -> WeightMatrix {
    let g = knn_graph(ds.points(), k).unwrap();
    let eps = median_heuristic_eps(&g, ds.points());
    heat_weights(&g, ds.points(), eps).unwrap()
}

/// Max |a - b| over matching entries.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
