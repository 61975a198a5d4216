//! Parameter sweeps: pipeline x classifier x grid, scored on a test set.
//!
//! Every fit uses training rows only. Test points enter through the
//! out-of-sample maps (or, on request, by refitting with the test point
//! added as an unlabeled vertex).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ccdr_core::baselines::{laplacian_eigenmap_fit, lda_fit, pca_fit, Eigenmap};
use ccdr_core::dataset::gen_circles;
use ccdr_core::graph::{kernel_entries, kernel_entries_full, median_heuristic_eps};
use ccdr_core::{
    error_rate, fit_with_weights, heat_weights, knn_graph, CcdrModel, FitParams, KnnClassifier,
    LabelRemap, LabeledDataset, LinearClassifier, Matrix, OosKernel, WeightMatrix,
};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::io::{data_dir, load_statlog, statlog_paths, write_text};

/// Confidence level of the reported error intervals.
pub const DEFAULT_CI_LEVEL: f64 = 0.8;

/// Fixed CSV header of [`SweepReport::to_csv`].
pub const CSV_HEADER: &str =
    "pipeline,classifier,beta,m,graph_k,clf_k,error,ci_low,ci_high,wall_ms";

macro_rules! named_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($name), " {:?}"), other
                    ))),
                }
            }
        }
    };
}

named_enum!(Pipeline {
    Raw => "raw",
    Pca => "pca",
    Ccdr => "ccdr",
    Lda => "lda",
    Lapeig => "lapeig",
});

named_enum!(ClassifierKind {
    Knn => "knn",
    Linear => "linear",
});

named_enum!(TestEmbedding {
    OutOfSample => "oos",
    Retrain => "retrain",
});

/// How the heat-kernel scale is chosen from the training graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsMode {
    /// Median squared edge length.
    Median,
    /// Median squared edge length times a factor.
    MedianTimes(f64),
    Fixed(f64),
}

impl EpsMode {
    pub fn resolve(self, median: f64) -> f64 {
        match self {
            EpsMode::Median => median,
            EpsMode::MedianTimes(f) => f * median,
            EpsMode::Fixed(v) => v,
        }
    }
}

impl fmt::Display for EpsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsMode::Median => f.write_str("median"),
            EpsMode::MedianTimes(s) => write!(f, "median*{s}"),
            EpsMode::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for EpsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || {
            Error::Config(format!(
                "invalid eps {s:?}; use median, median*<f> or a number"
            ))
        };
        let mode = if s == "median" {
            EpsMode::Median
        } else if let Some(f) = s.strip_prefix("median*") {
            EpsMode::MedianTimes(f.trim().parse().map_err(|_| bad())?)
        } else {
            EpsMode::Fixed(s.parse().map_err(|_| bad())?)
        };
        match mode {
            EpsMode::MedianTimes(v) | EpsMode::Fixed(v) if !(v.is_finite() && v > 0.0) => {
                Err(bad())
            }
            m => Ok(m),
        }
    }
}

/// Where the train and test sets come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    /// Statlog files; labels go through the satimage remap.
    Statlog { train: PathBuf, test: PathBuf },
    /// Concentric circles; the test set uses `seed + 1`.
    Circles {
        n_per_class: usize,
        test_per_class: usize,
        radii: Vec<f64>,
        noise_sd: f64,
    },
}

impl Default for DataSpec {
    fn default() -> Self {
        let (train, test) = statlog_paths(&data_dir());
        DataSpec::Statlog { train, test }
    }
}

/// One sweep: the cross product of pipelines, classifiers and grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSpec,
    pub pipelines: Vec<Pipeline>,
    pub classifiers: Vec<ClassifierKind>,
    pub betas: Vec<f64>,
    pub dims: Vec<usize>,
    pub graph_ks: Vec<usize>,
    pub clf_ks: Vec<usize>,
    pub eps: EpsMode,
    pub seed: u64,
    /// z-score features with training statistics.
    pub standardize: bool,
    pub oos_kernel: OosKernel,
    pub test_embedding: TestEmbedding,
    pub ci_level: f64,
    /// Record wall times; off gives byte-identical reports across runs.
    pub timing: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            pipelines: vec![Pipeline::Ccdr],
            classifiers: vec![ClassifierKind::Knn, ClassifierKind::Linear],
            betas: vec![0.5],
            dims: vec![14],
            graph_ks: vec![4],
            clf_ks: (1..=15).collect(),
            eps: EpsMode::Median,
            seed: 0,
            standardize: false,
            oos_kernel: OosKernel::Neighbors,
            test_embedding: TestEmbedding::OutOfSample,
            ci_level: DEFAULT_CI_LEVEL,
            timing: true,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.pipelines.is_empty() || self.classifiers.is_empty() {
            return bad("pipelines and classifiers must be nonempty");
        }
        if self.betas.is_empty()
            || self.dims.is_empty()
            || self.graph_ks.is_empty()
            || self.clf_ks.is_empty()
        {
            return bad("every grid must be nonempty");
        }
        if self.betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return bad("beta values must be finite and >= 0");
        }
        if self.dims.contains(&0) || self.graph_ks.contains(&0) || self.clf_ks.contains(&0) {
            return bad("m, graph_k and clf_k values must be >= 1");
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return bad("ci_level must lie in (0, 1)");
        }
        if let DataSpec::Circles {
            n_per_class,
            test_per_class,
            ..
        } = &self.data
        {
            if *n_per_class < 2 || *test_per_class < 2 {
                return bad("circles need at least 2 points per class");
            }
        }
        Ok(())
    }
}

/// Test-set error with its confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub errors: usize,
    pub n_test: usize,
    pub error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub pipeline: Pipeline,
    pub classifier: ClassifierKind,
    pub beta: Option<f64>,
    pub m: Option<usize>,
    pub graph_k: Option<usize>,
    pub clf_k: Option<usize>,
    /// The score, or the message of the error that stopped this grid point.
    pub outcome: std::result::Result<Score, String>,
    pub wall_ms: u64,
}

impl SweepRow {
    pub fn error(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|s| s.error)
    }
}

/// Parameters and spectrum of one graph-based training fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub pipeline: Pipeline,
    pub graph_k: usize,
    pub beta: Option<f64>,
    pub eps: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub fits: Vec<FitSummary>,
}

fn cmp_opt<T: PartialOrd>(a: &Option<T>, b: &Option<T>) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    match (a, b) {
        (None, None) => Equal,
        (None, Some(_)) => Less,
        (Some(_), None) => Greater,
        (Some(x), Some(y)) => x.partial_cmp(y).unwrap_or(Equal),
    }
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl SweepReport {
    /// Orders rows by pipeline and classifier name, then by
    /// `beta, m, graph_k, clf_k` (absent values first).
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.pipeline
                .as_str()
                .cmp(b.pipeline.as_str())
                .then(a.classifier.as_str().cmp(b.classifier.as_str()))
                .then(cmp_opt(&a.beta, &b.beta))
                .then(cmp_opt(&a.m, &b.m))
                .then(cmp_opt(&a.graph_k, &b.graph_k))
                .then(cmp_opt(&a.clf_k, &b.clf_k))
        });
    }

    pub fn rows_for(
        &self,
        pipeline: Pipeline,
        classifier: ClassifierKind,
    ) -> impl Iterator<Item = &SweepRow> {
        self.rows
            .iter()
            .filter(move |r| r.pipeline == pipeline && r.classifier == classifier)
    }

    /// Lowest-error successful row for a pipeline and classifier.
    pub fn best(&self, pipeline: Pipeline, classifier: ClassifierKind) -> Option<&SweepRow> {
        self.rows_for(pipeline, classifier)
            .filter(|r| r.outcome.is_ok())
            .min_by(|a, b| a.error().unwrap().total_cmp(&b.error().unwrap()))
    }

    /// CSV text with [`CSV_HEADER`]. Failed rows carry `failed` in the
    /// error column and empty interval fields.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(vec![]);
        w.write_record(CSV_HEADER.split(','))
            .expect("in-memory write");
        for r in &self.rows {
            let (error, low, high) = match &r.outcome {
                Ok(s) => (
                    s.error.to_string(),
                    s.ci_low.to_string(),
                    s.ci_high.to_string(),
                ),
                Err(_) => ("failed".to_string(), String::new(), String::new()),
            };
            w.write_record([
                r.pipeline.as_str().to_string(),
                r.classifier.as_str().to_string(),
                fmt_opt(&r.beta),
                fmt_opt(&r.m),
                fmt_opt(&r.graph_k),
                fmt_opt(&r.clf_k),
                error,
                low,
                high,
                r.wall_ms.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

/// Writes the report as CSV (see [`SweepReport::to_csv`]).
pub fn emit_report(report: &SweepReport, path: &Path) -> Result<()> {
    write_text(path, &report.to_csv())
}

/// Normal-approximation binomial interval
/// `p ± z sqrt(p (1 - p) / n)` with `z` the `(1 + level) / 2` standard
/// normal quantile, clamped to `[0, 1]`. At the default 80 % level
/// `z = 1.2816`.
pub fn confidence_interval(errors: usize, n_test: usize, level: f64) -> Result<(f64, f64)> {
    if n_test == 0 || errors > n_test {
        return Err(Error::Config(format!(
            "{errors} errors out of {n_test} test points"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    let p = errors as f64 / n_test as f64;
    let z = Normal::standard().inverse_cdf(0.5 * (1.0 + level));
    let half = z * (p * (1.0 - p) / n_test as f64).sqrt();
    Ok(((p - half).max(0.0), (p + half).min(1.0)))
}

/// Loads or generates the train and test sets.
pub fn load_data(spec: &DataSpec, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    match spec {
        DataSpec::Statlog { train, test } => {
            let remap = LabelRemap::statlog_satimage();
            Ok((load_statlog(train, &remap)?, load_statlog(test, &remap)?))
        }
        DataSpec::Circles {
            n_per_class,
            test_per_class,
            radii,
            noise_sd,
        } => Ok((
            gen_circles(*n_per_class, radii, *noise_sd, seed)?,
            gen_circles(*test_per_class, radii, *noise_sd, seed.wrapping_add(1))?,
        )),
    }
}

/// Loads the data named by `cfg` and runs the sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let (train, test) = load_data(&cfg.data, cfg.seed)?;
    run_sweep_on(cfg, &train, &test)
}

/// Runs the sweep on explicit train and test sets; `cfg.data` is ignored.
///
/// A grid point whose preconditions fail becomes a failed row; only
/// inconsistent inputs abort the sweep.
pub fn run_sweep_on(
    cfg: &ExperimentConfig,
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<SweepReport> {
    cfg.validate()?;
    if train.dim() != test.dim() || train.num_classes() != test.num_classes() {
        return Err(Error::Config(
            "train and test sets differ in dimension or class count".into(),
        ));
    }
    if !test.is_fully_labeled() {
        return Err(Error::Config("every test point needs a label".into()));
    }
    let (train, test) = if cfg.standardize {
        let (mean, sd) = train.column_stats();
        (
            train.standardized_with(&mean, &sd)?,
            test.standardized_with(&mean, &sd)?,
        )
    } else {
        (train.clone(), test.clone())
    };
    let mut sweep = Sweep {
        cfg,
        train: &train,
        test: &test,
        report: SweepReport::default(),
    };
    for &p in &cfg.pipelines {
        match p {
            Pipeline::Raw => sweep.raw(),
            Pipeline::Pca => sweep.linear_baseline(Pipeline::Pca),
            Pipeline::Lda => sweep.linear_baseline(Pipeline::Lda),
            Pipeline::Lapeig => sweep.lapeig(),
            Pipeline::Ccdr => sweep.ccdr(),
        }
    }
    let mut report = sweep.report;
    report.sort();
    Ok(report)
}

/// Grid coordinates shared by all classifier rows of one embedding.
#[derive(Clone, Copy)]
struct Key {
    pipeline: Pipeline,
    beta: Option<f64>,
    m: Option<usize>,
    graph_k: Option<usize>,
}

struct Sweep<'a> {
    cfg: &'a ExperimentConfig,
    train: &'a LabeledDataset,
    test: &'a LabeledDataset,
    report: SweepReport,
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

impl Sweep<'_> {
    fn wall(&self, ms: f64) -> u64 {
        if self.cfg.timing {
            ms.round() as u64
        } else {
            0
        }
    }

    fn push(
        &mut self,
        key: Key,
        classifier: ClassifierKind,
        clf_k: Option<usize>,
        outcome: std::result::Result<Score, String>,
        ms: f64,
    ) {
        let wall_ms = self.wall(ms);
        self.report.rows.push(SweepRow {
            pipeline: key.pipeline,
            classifier,
            beta: key.beta,
            m: key.m,
            graph_k: key.graph_k,
            clf_k,
            outcome,
            wall_ms,
        });
    }

    fn fail(&mut self, key: Key, msg: &str) {
        log::warn!(
            "{} beta={:?} m={:?} graph_k={:?}: {msg}",
            key.pipeline,
            key.beta,
            key.m,
            key.graph_k
        );
        for &c in &self.cfg.classifiers {
            match c {
                ClassifierKind::Linear => self.push(key, c, None, Err(msg.to_string()), 0.0),
                ClassifierKind::Knn => {
                    for &k in &self.cfg.clf_ks {
                        self.push(key, c, Some(k), Err(msg.to_string()), 0.0);
                    }
                }
            }
        }
    }

    fn score(&self, predictions: &[usize]) -> std::result::Result<Score, String> {
        let truth = self.test.labels();
        let error = error_rate(predictions, truth).map_err(|e| e.to_string())?;
        let errors = predictions
            .iter()
            .zip(truth)
            .filter(|(p, t)| p != t)
            .count();
        let (ci_low, ci_high) = confidence_interval(errors, truth.len(), self.cfg.ci_level)
            .map_err(|e| e.to_string())?;
        Ok(Score {
            errors,
            n_test: truth.len(),
            error,
            ci_low,
            ci_high,
        })
    }

    /// Trains every classifier on the labeled training rows of `train_emb`
    /// and scores it on `test_emb`. `fit_ms` is added to each row's time.
    fn classify(&mut self, key: Key, train_emb: &Matrix, test_emb: &Matrix, fit_ms: f64) {
        let labeled: Vec<usize> = (0..self.train.len())
            .filter(|&i| self.train.labels()[i] != 0)
            .collect();
        let x = train_emb.select_rows(&labeled);
        let y: Vec<usize> = labeled.iter().map(|&i| self.train.labels()[i]).collect();
        let l = self.train.num_classes();
        for &c in &self.cfg.classifiers {
            let t = Instant::now();
            match c {
                ClassifierKind::Linear => {
                    let outcome = LinearClassifier::fit(&x, &y, l)
                        .map_err(|e| e.to_string())
                        .and_then(|clf| self.score(&clf.predict_all(test_emb)));
                    self.push(key, c, None, outcome, fit_ms + elapsed_ms(t));
                }
                ClassifierKind::Knn => {
                    let ks: Vec<usize> = self
                        .cfg
                        .clf_ks
                        .iter()
                        .copied()
                        .filter(|&k| k <= x.rows())
                        .collect();
                    let preds = KnnClassifier::new(x.clone(), y.clone(), l, 1)
                        .and_then(|knn| knn.predict_all_multi(test_emb, &ks));
                    let ms = fit_ms + elapsed_ms(t);
                    for &k in &self.cfg.clf_ks {
                        let outcome = match (&preds, ks.iter().position(|&q| q == k)) {
                            (Ok(p), Some(idx)) => self.score(&p[idx]),
                            (Err(e), _) => Err(e.to_string()),
                            (Ok(_), None) => {
                                Err(format!("clf_k {k} exceeds {} training points", x.rows()))
                            }
                        };
                        self.push(key, c, Some(k), outcome, ms);
                    }
                }
            }
        }
    }

    fn raw(&mut self) {
        let key = Key {
            pipeline: Pipeline::Raw,
            beta: None,
            m: Some(self.train.dim()),
            graph_k: None,
        };
        let (tr, te) = (self.train.points().clone(), self.test.points().clone());
        self.classify(key, &tr, &te, 0.0);
    }

    fn linear_baseline(&mut self, pipeline: Pipeline) {
        for &m in &self.cfg.dims.clone() {
            let key = Key {
                pipeline,
                beta: None,
                m: Some(m),
                graph_k: None,
            };
            let t = Instant::now();
            let fitted = match pipeline {
                Pipeline::Pca => pca_fit(self.train.points(), m),
                _ => lda_fit(self.train, m),
            };
            let embedded = fitted.and_then(|e| {
                Ok((
                    e.transform(self.train.points())?,
                    e.transform(self.test.points())?,
                ))
            });
            match embedded {
                Ok((tr, te)) => self.classify(key, &tr, &te, elapsed_ms(t)),
                Err(e) => self.fail(key, &e.to_string()),
            }
        }
    }

    fn weights(&self, graph_k: usize) -> Result<WeightMatrix> {
        let g = knn_graph(self.train.points(), graph_k)?;
        let eps = self
            .cfg
            .eps
            .resolve(median_heuristic_eps(&g, self.train.points()));
        Ok(heat_weights(&g, self.train.points(), eps)?)
    }

    fn kernel(&self, x: &[f64], graph_k: usize, eps: f64) -> ccdr_core::Result<Vec<(usize, f64)>> {
        match self.cfg.oos_kernel {
            OosKernel::Neighbors => kernel_entries(x, self.train.points(), graph_k, eps),
            OosKernel::Full => kernel_entries_full(x, self.train.points(), eps),
        }
    }

    fn lapeig(&mut self) {
        for &gk in &self.cfg.graph_ks.clone() {
            let t = Instant::now();
            let w = match self.weights(gk) {
                Ok(w) => w,
                Err(e) => {
                    for &m in &self.cfg.dims.clone() {
                        self.fail(
                            Key {
                                pipeline: Pipeline::Lapeig,
                                beta: None,
                                m: Some(m),
                                graph_k: Some(gk),
                            },
                            &e.to_string(),
                        );
                    }
                    continue;
                }
            };
            let mmax = *self.cfg.dims.iter().max().expect("validated");
            let shared = laplacian_eigenmap_fit(&w, mmax).ok();
            let shared_ms = elapsed_ms(t);
            if let Some(e) = &shared {
                self.report.fits.push(FitSummary {
                    pipeline: Pipeline::Lapeig,
                    graph_k: gk,
                    beta: None,
                    eps: w.eps(),
                    eigenvalues: e.eigenvalues.clone(),
                });
            }
            for &m in &self.cfg.dims.clone() {
                let key = Key {
                    pipeline: Pipeline::Lapeig,
                    beta: None,
                    m: Some(m),
                    graph_k: Some(gk),
                };
                let t = Instant::now();
                let map = match &shared {
                    Some(e) => Ok(Eigenmap {
                        embedding: e.embedding.leading_columns(m),
                        eigenvalues: e.eigenvalues[..m].to_vec(),
                    }),
                    None => laplacian_eigenmap_fit(&w, m).map_err(Error::from),
                };
                let embedded = map.and_then(|map| {
                    let mut te = Matrix::zeros(self.test.len(), m);
                    for (i, x) in self.test.points().iter_rows().enumerate() {
                        let k = self.kernel(x, gk, w.eps())?;
                        te.row_mut(i).copy_from_slice(&map.extend(&k)?);
                    }
                    Ok((map.embedding, te))
                });
                let ms = if shared.is_some() { shared_ms } else { 0.0 } + elapsed_ms(t);
                match embedded {
                    Ok((tr, te)) => self.classify(key, &tr, &te, ms),
                    Err(e) => self.fail(key, &e.to_string()),
                }
            }
        }
    }

    fn ccdr(&mut self) {
        for &gk in &self.cfg.graph_ks.clone() {
            let t = Instant::now();
            let w = self.weights(gk);
            let weight_ms = elapsed_ms(t);
            for &beta in &self.cfg.betas.clone() {
                let w = match &w {
                    Ok(w) => w,
                    Err(e) => {
                        for &m in &self.cfg.dims.clone() {
                            self.fail(
                                Key {
                                    pipeline: Pipeline::Ccdr,
                                    beta: Some(beta),
                                    m: Some(m),
                                    graph_k: Some(gk),
                                },
                                &e.to_string(),
                            );
                        }
                        continue;
                    }
                };
                let t = Instant::now();
                let mmax = *self.cfg.dims.iter().max().expect("validated");
                let params = FitParams::new(gk, beta, mmax).with_oos_kernel(self.cfg.oos_kernel);
                let shared = fit_with_weights(self.train, w, &params).ok();
                let shared_ms = weight_ms + elapsed_ms(t);
                if let Some(model) = &shared {
                    self.report.fits.push(FitSummary {
                        pipeline: Pipeline::Ccdr,
                        graph_k: gk,
                        beta: Some(beta),
                        eps: model.eps(),
                        eigenvalues: model.eigenvalues().to_vec(),
                    });
                }
                for &m in &self.cfg.dims.clone() {
                    let key = Key {
                        pipeline: Pipeline::Ccdr,
                        beta: Some(beta),
                        m: Some(m),
                        graph_k: Some(gk),
                    };
                    let t = Instant::now();
                    let model = match &shared {
                        Some(model) => model.truncated(m).map_err(Error::from),
                        None => fit_with_weights(self.train, w, &FitParams { m, ..params })
                            .map_err(Error::from),
                    };
                    let embedded = model.and_then(|model| {
                        let te = match self.cfg.test_embedding {
                            TestEmbedding::OutOfSample => {
                                model.embed_unlabeled(self.test.points())?
                            }
                            TestEmbedding::Retrain => {
                                retrain_embedding(self.train, &model, self.test.points())?
                            }
                        };
                        Ok((model.embedding().clone(), te))
                    });
                    let ms = if shared.is_some() {
                        shared_ms
                    } else {
                        weight_ms
                    } + elapsed_ms(t);
                    match embedded {
                        Ok((tr, te)) => self.classify(key, &tr, &te, ms),
                        Err(e) => self.fail(key, &e.to_string()),
                    }
                }
            }
        }
    }
}

/// Embeds each query by refitting CCDR on the training set plus the query
/// as an unlabeled point, with the model's `k`, `eps`, `beta` and `m`.
/// Column signs are matched to `model` on the training rows.
///
/// One full fit per query: intended for cross-checking the out-of-sample
/// map on small problems.
pub fn retrain_embedding(
    train: &LabeledDataset,
    model: &CcdrModel,
    queries: &Matrix,
) -> Result<Matrix> {
    let (n, d, m) = (train.len(), train.dim(), model.dim());
    if queries.cols() != d {
        return Err(Error::Config(
            "query dimension differs from training data".into(),
        ));
    }
    let mut out = Matrix::zeros(queries.rows(), m);
    for (q, x) in queries.iter_rows().enumerate() {
        let mut data = train.points().as_slice().to_vec();
        data.extend_from_slice(x);
        let mut labels = train.labels().to_vec();
        labels.push(0);
        let ds = LabeledDataset::new(
            Matrix::from_vec(n + 1, d, data)?,
            labels,
            train.num_classes(),
            "retrain",
        )?;
        let g = knn_graph(ds.points(), model.k())?;
        let w = heat_weights(&g, ds.points(), model.eps())?;
        let params = FitParams::new(model.k(), model.beta(), m).with_eps(model.eps());
        let refit = fit_with_weights(&ds, &w, &params)?;
        for l in 0..m {
            let agree: f64 = (0..n)
                .map(|i| refit.embedding()[(i, l)] * model.embedding()[(i, l)])
                .sum();
            let s = if agree < 0.0 { -1.0 } else { 1.0 };
            out[(q, l)] = s * refit.embedding()[(n, l)];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_examples() {
        assert_eq!(confidence_interval(0, 50, 0.8).unwrap(), (0.0, 0.0));
        let (lo, hi) = confidence_interval(50, 100, 0.8).unwrap();
        assert!(((hi - lo) / 2.0 - 1.2816 * 0.05).abs() < 1e-5);
        let (lo, hi) = confidence_interval(30, 100, 1e-12).unwrap();
        assert!((lo - 0.3).abs() < 1e-9 && (hi - 0.3).abs() < 1e-9);
        assert!(confidence_interval(3, 2, 0.8).is_err());
        assert!(confidence_interval(1, 2, 1.0).is_err());
        let z = Normal::standard().inverse_cdf(0.9);
        assert!((z - 1.2816).abs() < 1e-4);
    }

    #[test]
    fn eps_mode_parsing() {
        assert_eq!("median".parse::<EpsMode>().unwrap(), EpsMode::Median);
        assert_eq!(
            "median*0.25".parse::<EpsMode>().unwrap(),
            EpsMode::MedianTimes(0.25)
        );
        assert_eq!("3.5".parse::<EpsMode>().unwrap(), EpsMode::Fixed(3.5));
        assert!("-1".parse::<EpsMode>().is_err());
        assert!("median*x".parse::<EpsMode>().is_err());
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(SweepReport::default().to_csv(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn one_row_round_trips_fields() {
        let mut r = SweepReport::default();
        r.rows.push(SweepRow {
            pipeline: Pipeline::Ccdr,
            classifier: ClassifierKind::Knn,
            beta: Some(0.1 + 0.2),
            m: Some(14),
            graph_k: Some(4),
            clf_k: Some(7),
            outcome: Ok(Score {
                errors: 172,
                n_test: 2000,
                error: 0.086,
                ci_low: 0.0779,
                ci_high: 0.0940,
            }),
            wall_ms: 12,
        });
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[1],
            "ccdr,knn,0.30000000000000004,14,4,7,0.086,0.0779,0.094,12"
        );
    }
}
