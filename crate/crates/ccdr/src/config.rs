//! `key = value` experiment files.
//!
//! Blank lines and `#` comments are ignored. Settings from a file are
//! merged with command-line overrides, later values winning, and then
//! turned into an [`ExperimentConfig`].
//!
//! | Key | Value |
//! |-----|-------|
//! | `data` | `statlog` or `circles` |
//! | `data_dir`, `train`, `test` | Statlog locations (`train`/`test` override `data_dir`) |
//! | `circles_n`, `circles_test_n`, `circles_radii`, `circles_noise` | circles generator |
//! | `pipelines` | comma list of `raw, pca, ccdr, lda, lapeig` |
//! | `classifiers` | comma list of `knn, linear` |
//! | `beta`, `m`, `graph_k`, `clf_k` | comma lists; integers also accept `a..=b` |
//! | `eps` | `median`, `median*<f>` or a number |
//! | `seed`, `standardize`, `oos_kernel`, `test_embedding`, `ci_level`, `timing`, `output` | scalars |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ccdr_core::OosKernel;

use crate::error::{Error, Result};
use crate::harness::{DataSpec, ExperimentConfig};
use crate::io::{data_dir, read_text, statlog_paths};

/// Raw settings; later insertions replace earlier ones.
pub type Settings = BTreeMap<String, String>;

const KEYS: &[&str] = &[
    "data",
    "data_dir",
    "train",
    "test",
    "circles_n",
    "circles_test_n",
    "circles_radii",
    "circles_noise",
    "pipelines",
    "classifiers",
    "beta",
    "m",
    "graph_k",
    "clf_k",
    "eps",
    "seed",
    "standardize",
    "oos_kernel",
    "test_embedding",
    "ci_level",
    "timing",
    "output",
];

/// Parses one `key = value` assignment.
pub fn parse_assignment(line: &str) -> Result<(String, String)> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected key = value, got {line:?}")))?;
    let k = k.trim();
    if !KEYS.contains(&k) {
        return Err(Error::Config(format!("unknown key {k:?}")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

pub fn parse_settings(text: &str) -> Result<Settings> {
    let mut out = Settings::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            parse_assignment(line).map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        out.insert(k, v);
    }
    Ok(out)
}

pub fn load_settings(path: &Path) -> Result<Settings> {
    parse_settings(&read_text(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Applies `key=value` overrides on top of `base`.
pub fn merge(mut base: Settings, overrides: &[String]) -> Result<Settings> {
    for o in overrides {
        let (k, v) = parse_assignment(o)?;
        base.insert(k, v);
    }
    Ok(base)
}

fn scalar<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| scalar(key, s))
        .collect()
}

fn int_list(key: &str, v: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..=") {
            let (a, b): (usize, usize) = (scalar(key, a)?, scalar(key, b)?);
            if a > b {
                return Err(Error::Config(format!("{key}: empty range {part:?}")));
            }
            out.extend(a..=b);
        } else {
            out.push(scalar(key, part)?);
        }
    }
    Ok(out)
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {v:?}"
        ))),
    }
}

fn oos_kernel(v: &str) -> Result<OosKernel> {
    match v.trim() {
        "neighbors" => Ok(OosKernel::Neighbors),
        "full" => Ok(OosKernel::Full),
        _ => Err(Error::Config(format!(
            "oos_kernel: expected neighbors or full, got {v:?}"
        ))),
    }
}

impl ExperimentConfig {
    /// Builds a validated config; keys not present keep their defaults.
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let get = |k: &str| s.get(k).map(String::as_str);
        cfg.data = match get("data").unwrap_or("statlog") {
            "statlog" => {
                let dir = get("data_dir").map(PathBuf::from).unwrap_or_else(data_dir);
                let (train, test) = statlog_paths(&dir);
                DataSpec::Statlog {
                    train: get("train").map(PathBuf::from).unwrap_or(train),
                    test: get("test").map(PathBuf::from).unwrap_or(test),
                }
            }
            "circles" => DataSpec::Circles {
                n_per_class: get("circles_n")
                    .map(|v| scalar("circles_n", v))
                    .transpose()?
                    .unwrap_or(100),
                test_per_class: get("circles_test_n")
                    .map(|v| scalar("circles_test_n", v))
                    .transpose()?
                    .unwrap_or(100),
                radii: get("circles_radii")
                    .map(|v| list("circles_radii", v))
                    .transpose()?
                    .unwrap_or(vec![1.0, 2.0]),
                noise_sd: get("circles_noise")
                    .map(|v| scalar("circles_noise", v))
                    .transpose()?
                    .unwrap_or(0.05),
            },
            other => {
                return Err(Error::Config(format!(
                    "data: expected statlog or circles, got {other:?}"
                )))
            }
        };
        if let Some(v) = get("pipelines") {
            cfg.pipelines = list("pipelines", v)?;
        }
        if let Some(v) = get("classifiers") {
            cfg.classifiers = list("classifiers", v)?;
        }
        if let Some(v) = get("beta") {
            cfg.betas = list("beta", v)?;
        }
        if let Some(v) = get("m") {
            cfg.dims = int_list("m", v)?;
        }
        if let Some(v) = get("graph_k") {
            cfg.graph_ks = int_list("graph_k", v)?;
        }
        if let Some(v) = get("clf_k") {
            cfg.clf_ks = int_list("clf_k", v)?;
        }
        if let Some(v) = get("eps") {
            cfg.eps = v.parse()?;
        }
        if let Some(v) = get("seed") {
            cfg.seed = scalar("seed", v)?;
        }
        if let Some(v) = get("standardize") {
            cfg.standardize = boolean("standardize", v)?;
        }
        if let Some(v) = get("oos_kernel") {
            cfg.oos_kernel = oos_kernel(v)?;
        }
        if let Some(v) = get("test_embedding") {
            cfg.test_embedding = v.parse()?;
        }
        if let Some(v) = get("ci_level") {
            cfg.ci_level = scalar("ci_level", v)?;
        }
        if let Some(v) = get("timing") {
            cfg.timing = boolean("timing", v)?;
        }
        if let Some(v) = get("output") {
            cfg.output = Some(PathBuf::from(v));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
