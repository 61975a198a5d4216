use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use ccdr::config::{load_settings, merge, Settings};
use ccdr::harness::{
    confidence_interval, emit_report, run_sweep, ClassifierKind, ExperimentConfig, DEFAULT_CI_LEVEL,
};
use ccdr::io::{load_statlog, save_edge_list, save_embedding, save_statlog};
use ccdr::persist::{load_model, save_model};
use ccdr_core::dataset::gen_circles;
use ccdr_core::graph::median_heuristic_eps;
use ccdr_core::{
    error_rate, fit_with_weights, heat_weights, knn_graph, CcdrModel, FitParams, KnnClassifier,
    LabelRemap, LabeledDataset, LinearClassifier, Matrix, OosKernel,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ccdr",
    version,
    about = "Classification constrained dimensionality reduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Use labels 1..=N as-is instead of the satimage label map.
    #[arg(long, value_name = "N")]
    classes: Option<usize>,
}

impl DataArgs {
    fn remap(&self) -> LabelRemap {
        match self.classes {
            Some(n) => LabelRemap::identity(n),
            None => LabelRemap::statlog_satimage(),
        }
    }

    fn load(&self, path: &Path) -> anyhow::Result<LabeledDataset> {
        Ok(load_statlog(path, &self.remap())?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse Statlog files and print their shape and class counts.
    LoadCheck {
        files: Vec<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Fit a CCDR model on a training file.
    Embed {
        train: PathBuf,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value_t = 14)]
        m: usize,
        /// Heat-kernel scale; the median squared edge length when omitted.
        #[arg(long)]
        eps: Option<f64>,
        /// Write the fitted model as JSON.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Write training coordinates and labels as CSV.
        #[arg(long)]
        embedding: Option<PathBuf>,
        /// Write the weighted kNN graph as CSV.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Out-of-sample kernel over all training points.
        #[arg(long)]
        oos_full_kernel: bool,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Embed new points with a saved model.
    Oos {
        model: PathBuf,
        input: PathBuf,
        output: PathBuf,
        /// Use the file's labels as class hints instead of embedding unlabeled.
        #[arg(long)]
        labeled: bool,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Classify a labeled test file in a saved model's embedding.
    Classify {
        model: PathBuf,
        test: PathBuf,
        #[arg(long, default_value = "knn")]
        classifier: ClassifierKind,
        #[arg(long, default_value_t = 1)]
        clf_k: usize,
        #[arg(long, default_value_t = DEFAULT_CI_LEVEL)]
        ci_level: f64,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run a parameter sweep and write the CSV report.
    Sweep {
        /// key = value file; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra key=value setting; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Report wall times of zero so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Generate concentric circles in Statlog format (labels 1..=L).
    Synth {
        output: PathBuf,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ccdr: error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::LoadCheck { files, data } => {
            if files.is_empty() {
                bail!("no input files");
            }
            for f in &files {
                let ds = data.load(f)?;
                println!(
                    "{}: {} points, {} features, {} classes, class counts {:?}",
                    f.display(),
                    ds.len(),
                    ds.dim(),
                    ds.num_classes(),
                    ds.class_counts()
                );
            }
        }
        Command::Embed {
            train,
            k,
            beta,
            m,
            eps,
            model,
            embedding,
            edges,
            oos_full_kernel,
            data,
        } => {
            let ds = data.load(&train)?;
            let g = knn_graph(ds.points(), k)?;
            let eps = eps.unwrap_or_else(|| median_heuristic_eps(&g, ds.points()));
            let w = heat_weights(&g, ds.points(), eps)?;
            let kernel = if oos_full_kernel {
                OosKernel::Full
            } else {
                OosKernel::Neighbors
            };
            let params = FitParams::new(k, beta, m)
                .with_eps(eps)
                .with_oos_kernel(kernel);
            let fitted = fit_with_weights(&ds, &w, &params)?;
            println!(
                "fitted {} points, m = {m}, eps = {eps}, eigenvalues {:?}",
                ds.len(),
                fitted.eigenvalues()
            );
            if let Some(p) = model {
                save_model(&fitted, &p)?;
            }
            if let Some(p) = embedding {
                save_embedding(fitted.embedding(), Some(ds.labels()), &p)?;
            }
            if let Some(p) = edges {
                save_edge_list(&w, &p)?;
            }
        }
        Command::Oos {
            model,
            input,
            output,
            labeled,
            data,
        } => {
            let model = load_model(&model)?;
            let ds = data.load(&input)?;
            let y = if labeled {
                embed_labeled(&model, &ds)?
            } else {
                model.embed_unlabeled(ds.points())?
            };
            save_embedding(&y, Some(ds.labels()), &output)?;
        }
        Command::Classify {
            model,
            test,
            classifier,
            clf_k,
            ci_level,
            data,
        } => {
            let model = load_model(&model)?;
            let ds = data.load(&test)?;
            let y_test = model.embed_unlabeled(ds.points())?;
            let labeled: Vec<usize> = (0..model.train_labels().len())
                .filter(|&i| model.train_labels()[i] != 0)
                .collect();
            let x = model.embedding().select_rows(&labeled);
            let c: Vec<usize> = labeled.iter().map(|&i| model.train_labels()[i]).collect();
            let pred = match classifier {
                ClassifierKind::Linear => {
                    LinearClassifier::fit(&x, &c, model.num_classes())?.predict_all(&y_test)
                }
                ClassifierKind::Knn => {
                    KnnClassifier::new(x, c, model.num_classes(), clf_k)?.predict_all(&y_test)
                }
            };
            let err = error_rate(&pred, ds.labels())?;
            let errors = pred.iter().zip(ds.labels()).filter(|(p, t)| p != t).count();
            let (lo, hi) = confidence_interval(errors, ds.len(), ci_level)?;
            println!(
                "{classifier}: error {err} ({errors}/{}), {:.0}% interval [{lo}, {hi}]",
                ds.len(),
                ci_level * 100.0
            );
        }
        Command::Sweep {
            config,
            set,
            output,
            seed,
            data_dir,
            no_timing,
        } => {
            let base = match &config {
                Some(p) => load_settings(p)?,
                None => Settings::new(),
            };
            let mut overrides = set;
            if let Some(o) = output {
                overrides.push(format!("output={}", o.display()));
            }
            if let Some(s) = seed {
                overrides.push(format!("seed={s}"));
            }
            if let Some(d) = data_dir {
                overrides.push(format!("data_dir={}", d.display()));
            }
            if no_timing {
                overrides.push("timing=false".into());
            }
            let cfg = ExperimentConfig::from_settings(&merge(base, &overrides)?)?;
            let report = run_sweep(&cfg)?;
            match &cfg.output {
                Some(p) => emit_report(&report, p)?,
                None => print!("{}", report.to_csv()),
            }
            let failed = report.rows.iter().filter(|r| r.outcome.is_err()).count();
            if failed > 0 {
                log::warn!("{failed} of {} rows failed", report.rows.len());
            }
        }
        Command::Synth {
            output,
            n,
            radii,
            noise,
            seed,
        } => {
            let ds = gen_circles(n, &radii, noise, seed)?;
            save_statlog(&ds, &LabelRemap::identity(radii.len()), &output)?;
        }
    }
    Ok(())
}

fn embed_labeled(model: &CcdrModel, ds: &LabeledDataset) -> anyhow::Result<Matrix> {
    if ds.num_classes() != model.num_classes() {
        bail!(
            "input has {} classes, model has {}",
            ds.num_classes(),
            model.num_classes()
        );
    }
    let mut y = Matrix::zeros(ds.len(), model.dim());
    for (i, x) in ds.points().iter_rows().enumerate() {
        y.row_mut(i)
            .copy_from_slice(&model.embed_oos(x, ds.labels()[i])?);
    }
    Ok(y)
}
