mod common;

use ccdr_core::dataset::make_indicator;
use ccdr_core::spectral::sym_eig_asc;
use ccdr_core::{build_augmented, generalized_eig, sym_eig_desc, Error, Matrix};
use common::*;
use rand::Rng;

/// Compares a generalized solution against Jacobi on `D^{-1/2} L D^{-1/2}`.
/// Vectors are compared directly for separated eigenvalues and through the
/// cluster projector otherwise.
fn check_against_oracle(lap: &Matrix, deg: &[f64], count: usize, tol: f64) {
    let n = lap.rows();
    let sol = generalized_eig(lap, deg, count).unwrap();
    let s: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| lap[(i, j)] / (deg[i] * deg[j]).sqrt())
                .collect()
        })
        .collect();
    let (values, v) = jacobi(&s);
    let oracle: Vec<Vec<f64>> = (0..n)
        .map(|l| {
            let mut u: Vec<f64> = (0..n).map(|i| v[i][l] / deg[i].sqrt()).collect();
            normalize_sign(&mut u);
            u
        })
        .collect();
    assert!(
        max_diff(sol.values(), &values[..count]) < tol,
        "{:?} vs {:?}",
        sol.values(),
        &values[..count]
    );
    let gap = 1e-5;
    let mut l = 0;
    while l < count {
        let mut r = l + 1;
        while r < n && values[r] - values[r - 1] < gap {
            r += 1;
        }
        if r == l + 1 {
            let got = sol.vector(l);
            assert!(
                max_diff(&got, &oracle[l]) < tol,
                "vector {l} differs: {:?} {:?} {:?}",
                values,
                got,
                oracle[l]
            );
        } else if r <= count {
            // D-weighted projector onto the cluster span
            for i in 0..n {
                for j in 0..n {
                    let a: f64 = (l..r)
                        .map(|c| sol.vectors()[(i, c)] * sol.vectors()[(j, c)])
                        .sum();
                    let b: f64 = (l..r).map(|c| oracle[c][i] * oracle[c][j]).sum();
                    assert!((a - b).abs() < tol, "cluster {l}..{r} projector differs");
                }
            }
        }
        l = r;
    }
}

#[test]
fn augmented_laplacians_match_dense_oracle() {
    let mut rng = rng(7);
    for trial in 0..100 {
        let l = rng.random_range(1..=4);
        let n = rng.random_range(l.max(3)..=26);
        let ds = random_dataset(&mut rng, n, 2, l, 0.2);
        let w = weights_for(&ds, rng.random_range(1..n.min(5)));
        let beta = [0.0, 0.05, 0.5, 3.0][trial % 4];
        let aug = match build_augmented(&w, &make_indicator(&ds), beta) {
            Ok(a) => a,
            Err(Error::SingularDegree(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        let p = aug.size();
        check_against_oracle(&aug.laplacian_dense(), aug.degrees(), p, 1e-8);
    }
}

#[test]
fn random_psd_matches_oracle() {
    let mut rng = rng(11);
    for _ in 0..20 {
        let b = Matrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let lap = b.transpose().matmul(&b).unwrap();
        let deg: Vec<f64> = (0..6).map(|_| rng.random_range(0.2..3.0)).collect();
        check_against_oracle(&lap, &deg, 6, 1e-8);
    }
}

#[test]
fn selected_path_matches_oracle() {
    // large enough for the bisection + inverse iteration path
    let mut rng = rng(13);
    for _ in 0..3 {
        let ds = random_dataset(&mut rng, 120, 3, 3, 0.3);
        let w = weights_for(&ds, 4);
        let aug = build_augmented(&w, &make_indicator(&ds), 0.7).unwrap();
        check_against_oracle(&aug.laplacian_dense(), aug.degrees(), 8, 1e-8);
    }
}

#[test]
fn orthonormality_residual_and_bounds() {
    let mut rng = rng(17);
    for &(n, count) in &[(40, 40), (150, 10)] {
        let ds = random_dataset(&mut rng, n, 3, 3, 0.1);
        let w = weights_for(&ds, 3);
        let aug = build_augmented(&w, &make_indicator(&ds), 1.0).unwrap();
        let lap = aug.laplacian_dense();
        let deg = aug.degrees();
        let sol = generalized_eig(&lap, deg, count).unwrap();
        let p = lap.rows();
        let norm = lap.norm_inf().max(1.0);
        for a in 0..count {
            let ua = sol.vector(a);
            let lu = lap.mul_vec(&ua);
            for i in 0..p {
                assert!((lu[i] - sol.values()[a] * deg[i] * ua[i]).abs() <= 1e-6 * norm);
            }
            for b in 0..count {
                let ub = sol.vector(b);
                let g: f64 = (0..p).map(|i| ua[i] * deg[i] * ub[i]).sum();
                assert!((g - if a == b { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        assert!(sol.values()[0] >= -1e-10);
        assert!(*sol.values().last().unwrap() <= 2.0 + 1e-8);
        assert!(sol.values().windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn common_scaling_is_invisible() {
    let mut rng = rng(19);
    let ds = random_dataset(&mut rng, 30, 2, 2, 0.0);
    let w = weights_for(&ds, 3);
    let aug = build_augmented(&w, &make_indicator(&ds), 0.5).unwrap();
    let lap = aug.laplacian_dense();
    let a = generalized_eig(&lap, aug.degrees(), 10).unwrap();
    let c = 7.5;
    let lap2 = Matrix::from_fn(lap.rows(), lap.cols(), |i, j| c * lap[(i, j)]);
    let deg2: Vec<f64> = aug.degrees().iter().map(|d| c * d).collect();
    let b = generalized_eig(&lap2, &deg2, 10).unwrap();
    assert!(max_diff(a.values(), b.values()) < 1e-8);
    // uᵀ(cD)u = 1 rescales vectors by 1/sqrt(c)
    let scaled: Vec<f64> = b
        .vectors()
        .as_slice()
        .iter()
        .map(|x| x * c.sqrt())
        .collect();
    assert!(max_diff(a.vectors().as_slice(), &scaled) < 1e-8);
}

#[test]
fn bit_identical_reruns() {
    let mut rng = rng(23);
    let ds = random_dataset(&mut rng, 100, 3, 3, 0.2);
    let w = weights_for(&ds, 4);
    let aug = build_augmented(&w, &make_indicator(&ds), 0.5).unwrap();
    let lap = aug.laplacian_dense();
    for count in [5, 103] {
        let a = generalized_eig(&lap, aug.degrees(), count).unwrap();
        let b = generalized_eig(&lap, aug.degrees(), count).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn connected_laplacian_null_vector_is_constant() {
    let mut rng = rng(29);
    let ds = random_dataset(&mut rng, 25, 2, 2, 0.0);
    let w = weights_for(&ds, 5);
    let aug = build_augmented(&w, &make_indicator(&ds), 1.0).unwrap();
    let sol = generalized_eig(&aug.laplacian_dense(), aug.degrees(), 2).unwrap();
    assert!(sol.values()[0].abs() < 1e-12);
    let u = sol.vector(0);
    assert!(u.iter().all(|x| (x - u[0]).abs() < 1e-10 && *x > 0.0));
}

#[test]
fn descending_reconstruction() {
    let mut rng = rng(31);
    let b = Matrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
    let m = Matrix::from_fn(5, 5, |i, j| b[(i, j)] + b[(j, i)]);
    let sol = sym_eig_desc(&m, 5).unwrap();
    assert!(sol.values().windows(2).all(|w| w[0] >= w[1]));
    for i in 0..5 {
        for j in 0..5 {
            let r: f64 = (0..5)
                .map(|l| sol.values()[l] * sol.vectors()[(i, l)] * sol.vectors()[(j, l)])
                .sum();
            assert!((r - m[(i, j)]).abs() < 1e-8);
        }
    }
    let id = sym_eig_desc(&Matrix::identity(4), 4).unwrap();
    assert!(id.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    let asc = sym_eig_asc(&m, 5).unwrap();
    let mut rev = sol.values().to_vec();
    rev.reverse();
    assert!(max_diff(asc.values(), &rev) < 1e-12);
    assert!(sym_eig_desc(&m, 6).is_err());
}

#[test]
fn descending_large_order_uses_selected_path() {
    let mut rng = rng(37);
    let n = 90;
    let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let m = Matrix::from_fn(n, n, |i, j| b[(i, j)] + b[(j, i)]);
    let sol = sym_eig_desc(&m, 4).unwrap();
    let (values, _) = jacobi(&to_rows(&m));
    let mut top: Vec<f64> = values[n - 4..].to_vec();
    top.reverse();
    assert!(max_diff(sol.values(), &top) < 1e-9);
    for l in 0..4 {
        let u = sol.vector(l);
        let mu = m.mul_vec(&u);
        assert!(
            max_diff(
                &mu,
                &u.iter().map(|x| x * sol.values()[l]).collect::<Vec<_>>()
            ) < 1e-9
        );
    }
}
