use ccdr::harness::{
    emit_report, retrain_embedding, run_sweep, run_sweep_on, ClassifierKind, DataSpec, EpsMode,
    ExperimentConfig, Pipeline, SweepReport, TestEmbedding, CSV_HEADER,
};
use ccdr_core::dataset::gen_circles;
use ccdr_core::{fit, FitParams, LabeledDataset, Matrix};

fn circles_cfg() -> ExperimentConfig {
    ExperimentConfig {
        data: DataSpec::Circles {
            n_per_class: 40,
            test_per_class: 25,
            radii: vec![1.0, 2.0],
            noise_sd: 0.1,
        },
        pipelines: vec![
            Pipeline::Raw,
            Pipeline::Pca,
            Pipeline::Ccdr,
            Pipeline::Lda,
            Pipeline::Lapeig,
        ],
        betas: vec![0.05, 1.0],
        dims: vec![1, 2],
        graph_ks: vec![5, 8],
        clf_ks: vec![1, 3, 5],
        seed: 11,
        timing: false,
        ..ExperimentConfig::default()
    }
}

fn data() -> (LabeledDataset, LabeledDataset) {
    ccdr::harness::load_data(&circles_cfg().data, 11).unwrap()
}

fn values(r: &SweepReport) -> Vec<String> {
    r.to_csv().lines().skip(1).map(String::from).collect()
}

#[test]
fn one_row_per_grid_point() {
    let r = run_sweep(&circles_cfg()).unwrap();
    // raw: 1 embedding; pca, lda: 2 dims; lapeig: 2 k x 2 dims; ccdr: 2 k x 2 beta x 2 dims
    let embeddings = 1 + 2 + 2 + 4 + 8;
    assert_eq!(r.rows.len(), embeddings * (3 + 1));
    for row in &r.rows {
        let s = row.outcome.as_ref().unwrap();
        assert!(s.ci_low <= s.error && s.error <= s.ci_high && (0.0..=1.0).contains(&s.error));
        assert_eq!(s.n_test, 50);
    }
    let mut sorted = r.clone();
    sorted.sort();
    assert_eq!(sorted, r);
    assert_eq!(
        r.best(Pipeline::Ccdr, ClassifierKind::Linear)
            .unwrap()
            .error(),
        Some(0.0)
    );
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = circles_cfg();
    let a = run_sweep(&cfg).unwrap().to_csv();
    let b = run_sweep(&cfg).unwrap().to_csv();
    assert_eq!(a, b);
    assert!(a.starts_with(CSV_HEADER));
}

#[test]
fn test_features_never_reach_fits() {
    let cfg = circles_cfg();
    let (train, test) = data();
    let base = run_sweep_on(&cfg, &train, &test).unwrap();
    let shifted = Matrix::from_fn(test.len(), 2, |i, j| test.points()[(i, j)] * 3.0 + 10.0);
    let test2 = LabeledDataset::new(shifted, test.labels().to_vec(), 2, "shifted").unwrap();
    let moved = run_sweep_on(&cfg, &train, &test2).unwrap();
    assert!(!base.fits.is_empty());
    assert_eq!(base.fits, moved.fits);
    assert_ne!(values(&base), values(&moved));
}

#[test]
fn standardization_uses_training_statistics() {
    let cfg = ExperimentConfig {
        standardize: true,
        ..circles_cfg()
    };
    let (train, test) = data();
    let base = run_sweep_on(&cfg, &train, &test).unwrap();
    let mut pts = test.points().clone();
    pts.row_mut(0).copy_from_slice(&[50.0, -50.0]);
    let test2 = LabeledDataset::new(pts, test.labels().to_vec(), 2, "outlier").unwrap();
    assert_eq!(base.fits, run_sweep_on(&cfg, &train, &test2).unwrap().fits);
}

#[test]
fn rows_do_not_depend_on_other_grid_points() {
    let full = circles_cfg();
    let (train, test) = data();
    let all = values(&run_sweep_on(&full, &train, &test).unwrap());
    let narrow = ExperimentConfig {
        betas: vec![1.0],
        dims: vec![2],
        graph_ks: vec![8],
        clf_ks: vec![3],
        ..full
    };
    for row in values(&run_sweep_on(&narrow, &train, &test).unwrap()) {
        assert!(all.contains(&row), "{row} missing from full sweep");
    }
}

#[test]
fn failing_grid_points_become_marked_rows() {
    let cfg = ExperimentConfig {
        pipelines: vec![Pipeline::Ccdr],
        dims: vec![1, 500],
        clf_ks: vec![1, 1000],
        ..circles_cfg()
    };
    let r = run_sweep(&cfg).unwrap();
    let failed: Vec<_> = r.rows.iter().filter(|row| row.outcome.is_err()).collect();
    assert!(failed
        .iter()
        .all(|row| row.m == Some(500) || row.clf_k == Some(1000)));
    assert!(r
        .rows
        .iter()
        .any(|row| row.m == Some(1) && row.clf_k == Some(1) && row.outcome.is_ok()));
    assert_eq!(failed.len(), 2 * 2 * (2 + 1) + 2 * 2);
    assert!(r.to_csv().contains(",failed,,,"));
}

#[test]
fn eps_modes_scale_the_median() {
    let (train, test) = data();
    let base = ExperimentConfig {
        pipelines: vec![Pipeline::Ccdr],
        betas: vec![0.5],
        graph_ks: vec![5],
        ..circles_cfg()
    };
    let eps = |mode| {
        run_sweep_on(
            &ExperimentConfig {
                eps: mode,
                ..base.clone()
            },
            &train,
            &test,
        )
        .unwrap()
        .fits[0]
            .eps
    };
    let median = eps(EpsMode::Median);
    assert!((eps(EpsMode::MedianTimes(4.0)) - 4.0 * median).abs() <= 1e-12 * median);
    assert_eq!(eps(EpsMode::Fixed(0.3)), 0.3);
}

#[test]
fn retraining_tracks_the_out_of_sample_map() {
    let ds = gen_circles(25, &[1.0, 2.0], 0.05, 3).unwrap();
    let model = fit(&ds, &FitParams::new(6, 1.0, 2)).unwrap();
    let queries = Matrix::from_rows(&[[0.02, 1.01], [-1.98, 0.05]]).unwrap();
    let oos = model.embed_unlabeled(&queries).unwrap();
    let re = retrain_embedding(&ds, &model, &queries).unwrap();
    let scale = model.embedding().max_abs();
    for i in 0..2 {
        for l in 0..2 {
            assert!(
                (oos[(i, l)] - re[(i, l)]).abs() < 0.1 * scale,
                "{i} {l}: {} vs {}",
                oos[(i, l)],
                re[(i, l)]
            );
        }
    }
    let cfg = ExperimentConfig {
        pipelines: vec![Pipeline::Ccdr],
        test_embedding: TestEmbedding::Retrain,
        data: DataSpec::Circles {
            n_per_class: 20,
            test_per_class: 5,
            radii: vec![1.0, 2.0],
            noise_sd: 0.05,
        },
        ..circles_cfg()
    };
    assert!(run_sweep(&cfg)
        .unwrap()
        .rows
        .iter()
        .all(|r| r.outcome.is_ok()));
}

#[test]
fn report_file_matches_csv_text() {
    let r = run_sweep(&circles_cfg()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("report.csv");
    emit_report(&r, &p).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), r.to_csv());
    let bad = dir.path().join("missing").join("report.csv");
    let err = emit_report(&r, &bad).unwrap_err().to_string();
    assert!(err.contains("missing"), "{err}");
}

#[test]
fn unlabeled_test_points_are_rejected() {
    let (train, test) = data();
    let hidden = test.with_hidden_labels(&[0]).unwrap();
    assert!(run_sweep_on(&circles_cfg(), &train, &hidden).is_err());
}
