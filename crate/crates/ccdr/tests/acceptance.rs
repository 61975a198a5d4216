//! Acceptance criteria. Prints one PASS, FAIL or SKIPPED line per criterion.
//! Failures exit nonzero only when `CCDR_ACCEPTANCE_STRICT=1`. Criteria 1-4
//! need `sat.trn` and `sat.tst` in `$CCDR_DATA_DIR` (default `./data`) and
//! are skipped without them.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::time::Instant;

use ccdr::harness::{
    load_data, run_sweep_on, ClassifierKind, DataSpec, EpsMode, ExperimentConfig, Pipeline,
    SweepReport,
};
use ccdr::io::{data_dir, statlog_paths};
use ccdr_core::baselines::laplacian_eigenmap;
use ccdr_core::ccdr::training_weights;
use ccdr_core::dataset::{gen_circles, make_indicator};
use ccdr_core::{
    build_augmented, cost, error_rate, fit, fit_with_weights, generalized_eig, Error, FitParams,
    LabeledDataset, LinearClassifier, Matrix,
};
use common::*;
use rand::Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skipped(String),
}

use Outcome::*;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

struct Statlog {
    train: LabeledDataset,
    test: LabeledDataset,
}

fn statlog() -> Option<Statlog> {
    let (train, test) = statlog_paths(&data_dir());
    if !train.exists() || !test.exists() {
        return None;
    }
    let (train, test) =
        load_data(&DataSpec::Statlog { train, test }, 0).expect("statlog files parse");
    Some(Statlog { train, test })
}

fn base_cfg() -> ExperimentConfig {
    ExperimentConfig {
        pipelines: vec![Pipeline::Ccdr],
        betas: vec![0.5],
        dims: vec![14],
        graph_ks: vec![4],
        clf_ks: (1..=15).collect(),
        eps: EpsMode::Median,
        timing: false,
        ..ExperimentConfig::default()
    }
}

/// Lowest error over rows of one classifier that satisfy `keep`.
fn best_where(
    r: &SweepReport,
    c: ClassifierKind,
    keep: impl Fn(&ccdr::harness::SweepRow) -> bool,
) -> f64 {
    r.rows
        .iter()
        .filter(|row| row.classifier == c && keep(row))
        .map(|row| row.error().expect("grid point failed"))
        .fold(f64::INFINITY, f64::min)
}

/// Spearman correlation with average ranks for ties.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0 + 1.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

fn raw_features(data: Option<&Statlog>) -> Outcome {
    let Some(d) = data else {
        return Skipped("Statlog files not found".into());
    };
    let t = Instant::now();
    let cfg = ExperimentConfig {
        pipelines: vec![Pipeline::Raw],
        ..base_cfg()
    };
    let r = run_sweep_on(&cfg, &d.train, &d.test).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let knn = best_where(&r, ClassifierKind::Knn, |_| true);
    let lin = best_where(&r, ClassifierKind::Linear, |_| true);
    verdict(
        (knn - 0.0965).abs() <= 0.010 && (lin - 0.227).abs() <= 0.020 && secs < 120.0,
        format!(
            "knn {knn:.4} (0.0965 ± 0.010), linear {lin:.4} (0.227 ± 0.020), {secs:.1} s (< 120)"
        ),
    )
}

fn ccdr_table(data: Option<&Statlog>) -> Outcome {
    let Some(d) = data else {
        return Skipped("Statlog files not found".into());
    };
    let t = Instant::now();
    let mut knn = f64::INFINITY;
    let mut lin = f64::INFINITY;
    let mut per_eps = Vec::new();
    for eps in [
        EpsMode::MedianTimes(0.25),
        EpsMode::Median,
        EpsMode::MedianTimes(4.0),
    ] {
        let r = run_sweep_on(&ExperimentConfig { eps, ..base_cfg() }, &d.train, &d.test).unwrap();
        let (k, l) = (
            best_where(&r, ClassifierKind::Knn, |_| true),
            best_where(&r, ClassifierKind::Linear, |_| true),
        );
        per_eps.push(format!("{eps}: knn {k:.4} linear {l:.4}"));
        knn = knn.min(k);
        lin = lin.min(l);
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        knn <= 0.095 && lin <= 0.105 && secs < 900.0,
        format!(
            "best knn {knn:.4} (<= 0.095), best linear {lin:.4} (<= 0.105), {secs:.1} s (< 900); {}",
            per_eps.join("; ")
        ),
    )
}

fn beta_sweep(data: Option<&Statlog>) -> Outcome {
    let Some(d) = data else {
        return Skipped("Statlog files not found".into());
    };
    let betas = [0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
    let r = run_sweep_on(
        &ExperimentConfig {
            betas: betas.to_vec(),
            ..base_cfg()
        },
        &d.train,
        &d.test,
    )
    .unwrap();
    let lin: Vec<f64> = betas
        .iter()
        .map(|&b| best_where(&r, ClassifierKind::Linear, |row| row.beta == Some(b)))
        .collect();
    let knn = |b: f64| best_where(&r, ClassifierKind::Knn, |row| row.beta == Some(b));
    let small_ok = lin[..3].iter().all(|e| (0.085..=0.11).contains(e));
    let rho = spearman(&betas[3..], &lin[3..]);
    let (k05, k001) = (knn(0.5), knn(0.01));
    verdict(
        small_ok && rho > 0.0 && k05 < k001,
        format!(
            "linear by beta {:?} ([0.085, 0.11] for beta <= 0.1), spearman over beta >= 0.5 {rho:.3} (> 0), knn beta 0.5 {k05:.4} < beta 0.01 {k001:.4}",
            lin.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn dim_sweep(data: Option<&Statlog>) -> Outcome {
    let Some(d) = data else {
        return Skipped("Statlog files not found".into());
    };
    let cfg = ExperimentConfig {
        dims: (1..=16).collect(),
        classifiers: vec![ClassifierKind::Knn],
        ..base_cfg()
    };
    let r = run_sweep_on(&cfg, &d.train, &d.test).unwrap();
    let err = |m: usize| best_where(&r, ClassifierKind::Knn, |row| row.m == Some(m));
    let flat: Vec<f64> = (6..=16).map(err).collect();
    let spread = flat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - flat.iter().copied().fold(f64::INFINITY, f64::min);
    let e3 = err(3);
    verdict(
        e3 < 0.10 && spread < 0.015,
        format!(
            "knn m=3 {e3:.4} (< 0.10), spread over m=6..16 {spread:.4} (< 0.015); by m {:?}",
            (1..=16)
                .map(|m| format!("{:.4}", err(m)))
                .collect::<Vec<_>>()
        ),
    )
}

/// 200 points in 36 dimensions, 6 Gaussian classes, some unlabeled.
fn oos_coincidence() -> Outcome {
    let t = Instant::now();
    let mut rng = rng(5);
    let centers: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..36).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let mut labels = Vec::new();
    let pts = Matrix::from_fn(200, 36, |i, j| {
        if j == 0 {
            labels.push(i % 6 + 1);
        }
        centers[i % 6][j] + rng.random_range(-1.0..1.0)
    });
    let labels: Vec<usize> = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| if i % 7 == 3 { 0 } else { c })
        .collect();
    let ds = LabeledDataset::new(pts, labels, 6, "gauss").unwrap();
    let params = FitParams::new(4, 0.5, 14);
    let w = training_weights(&ds, &params).unwrap();
    let model = fit_with_weights(&ds, &w, &params).unwrap();
    let worst = (0..ds.len())
        .map(|i| {
            max_diff(
                &model.embed_with_kernel(w.row(i), ds.labels()[i]).unwrap(),
                model.embedding().row(i),
            )
        })
        .fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-8 && secs < 5.0,
        format!("max deviation {worst:.2e} (<= 1e-8), {secs:.2} s (< 5)"),
    )
}

fn constraint_suite() -> Outcome {
    let mut rng = rng(606);
    let (mut fitted, mut worst, mut attempts) = (0, 0.0f64, 0);
    while fitted < 50 && attempts < 500 {
        attempts += 1;
        let l = rng.random_range(1..=4);
        let n = rng.random_range(12..=60);
        let ds = random_dataset(&mut rng, n, 3, l, 0.25);
        let beta = [0.05, 0.5, 1.0, 5.0][attempts % 4];
        let params = FitParams::new(rng.random_range(3..=6), beta, rng.random_range(1..=4));
        let w = training_weights(&ds, &params).unwrap();
        let model = match fit_with_weights(&ds, &w, &params) {
            Ok(m) => m,
            Err(Error::EigenvalueTooLarge { .. }) => continue,
            Err(e) => return Fail(format!("fit failed: {e}")),
        };
        let aug = build_augmented(&w, &make_indicator(&ds), beta).unwrap();
        worst = worst.max(model.constraint_report(&aug).unwrap().max());
        fitted += 1;
    }
    verdict(
        fitted == 50 && worst <= 1e-8,
        format!("{fitted} models, worst residual {worst:.2e} (<= 1e-8)"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = rng(707);
    let (mut done, mut worst_val, mut worst_vec, mut worst_cost) = (0, 0.0f64, 0.0f64, 0.0f64);
    while done < 100 {
        let l = rng.random_range(1..=4);
        let n = rng.random_range(l.max(4)..=30 - l);
        let ds = random_dataset(&mut rng, n, 2, l, 0.2);
        let w = weights_for(&ds, rng.random_range(2..=4));
        let beta = rng.random_range(0.01..5.0);
        let c = make_indicator(&ds);
        let Ok(aug) = build_augmented(&w, &c, beta) else {
            continue;
        };
        let (p, deg, lap) = (aug.size(), aug.degrees().to_vec(), aug.laplacian_dense());
        let sol = generalized_eig(&lap, &deg, p).unwrap();
        let s: Vec<Vec<f64>> = (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| lap[(i, j)] / (deg[i] * deg[j]).sqrt())
                    .collect()
            })
            .collect();
        let (values, v) = jacobi(&s);
        worst_val = worst_val.max(max_diff(sol.values(), &values));
        for k in 0..p {
            let isolated = (k == 0 || values[k] - values[k - 1] > 1e-5)
                && (k + 1 == p || values[k + 1] - values[k] > 1e-5);
            if !isolated {
                continue;
            }
            let mut u: Vec<f64> = (0..p).map(|i| v[i][k] / deg[i].sqrt()).collect();
            normalize_sign(&mut u);
            worst_vec = worst_vec.max(max_diff(&sol.vector(k), &u));
        }
        let m = (p - 1).min(3);
        let z = Matrix::from_fn(l, m, |a, b| sol.vectors()[(a, b + 1)]);
        let y = Matrix::from_fn(n, m, |a, b| sol.vectors()[(l + a, b + 1)]);
        let trace: f64 = (1..=m)
            .map(|b| {
                let u = sol.vector(b);
                u.iter()
                    .zip(lap.mul_vec(&u))
                    .map(|(a, lu)| a * lu)
                    .sum::<f64>()
            })
            .sum();
        worst_cost = worst_cost.max((cost(&z, &y, &c, &w, beta).unwrap() - trace).abs());
        done += 1;
    }
    verdict(
        worst_val <= 1e-8 && worst_vec <= 1e-8 && worst_cost <= 1e-10,
        format!("eigenvalues {worst_val:.2e}, vectors {worst_vec:.2e} (<= 1e-8), cost vs trace {worst_cost:.2e} (<= 1e-10)"),
    )
}

fn circles_separation() -> Outcome {
    let ds = gen_circles(100, &[1.0, 2.0], 0.01, 42).unwrap();
    let train_err = |y: &Matrix| {
        let clf = LinearClassifier::fit(y, ds.labels(), 2).unwrap();
        error_rate(&clf.predict_all(y), ds.labels()).unwrap()
    };
    let raw = train_err(ds.points());
    let model = fit(&ds, &FitParams::new(4, 0.05, 2)).unwrap();
    let ccdr = train_err(model.embedding());
    verdict(
        ccdr == 0.0 && raw >= 0.40,
        format!("ccdr training error {ccdr} (= 0), raw {raw:.3} (>= 0.40)"),
    )
}

fn large_beta() -> Outcome {
    let mut rng = rng(909);
    let (mut done, mut worst, mut worst_d) = (0, 0.0f64, 0.0f64);
    while done < 10 {
        let ds = random_dataset(&mut rng, 30, 2, 2, 0.2);
        let w = weights_for(&ds, 4);
        let m = 2;
        let Ok(le) = laplacian_eigenmap(&w, m) else {
            continue;
        };
        let model = fit_with_weights(&ds, &w, &FitParams::new(4, 1e6, m)).unwrap();
        let deg = w.degrees();
        for l in 0..m {
            let mut y = model.embedding().column(l);
            let norm = y
                .iter()
                .zip(&deg)
                .map(|(a, d)| d * a * a)
                .sum::<f64>()
                .sqrt();
            y.iter_mut().for_each(|a| *a /= norm);
            let e = le.column(l);
            if y.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
                y.iter_mut().for_each(|a| *a = -*a);
            }
            let scale = e.iter().fold(0.0f64, |s, a| s.max(a.abs()));
            worst = worst.max(max_diff(&y, &e) / scale);
            let d2: f64 = y
                .iter()
                .zip(&e)
                .zip(&deg)
                .map(|((a, b), d)| d * (a - b).powi(2))
                .sum();
            worst_d = worst_d.max(d2.sqrt());
        }
        done += 1;
    }
    verdict(worst <= 1e-4, format!("10 instances, worst max-abs relative deviation {worst:.2e} (<= 1e-4); D-norm {worst_d:.2e}"))
}

fn main() -> ExitCode {
    let data = statlog();
    let data = data.as_ref();
    let criteria: Vec<Criterion> = vec![
        ("raw-feature classifiers", Box::new(|| raw_features(data))),
        ("ccdr classifiers", Box::new(|| ccdr_table(data))),
        ("beta sweep shape", Box::new(|| beta_sweep(data))),
        ("dimension sweep shape", Box::new(|| dim_sweep(data))),
        ("out-of-sample coincidence", Box::new(oos_coincidence)),
        ("eigen-constraint suite", Box::new(constraint_suite)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("circles separation", Box::new(circles_separation)),
        ("large-beta equivalence", Box::new(large_beta)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let line = match check() {
            Pass(d) => format!("PASS    {name}: {d}"),
            Fail(d) => {
                failed += 1;
                format!("FAIL    {name}: {d}")
            }
            Skipped(d) => format!("SKIPPED {name}: {d}"),
        };
        println!("criterion {} {line}", i + 1);
    }
    println!("acceptance: {failed} of {} criteria failed", criteria.len());
    let strict = std::env::var("CCDR_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
