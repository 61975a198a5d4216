//! Dataset, embedding and graph files.

use std::fs;
use std::path::{Path, PathBuf};

use ccdr_core::dataset::{format_csv, format_statlog, parse_statlog};
use ccdr_core::{LabelRemap, LabeledDataset, Matrix, WeightMatrix};

use crate::error::{Error, Result};

/// Environment variable naming the directory that holds `sat.trn` / `sat.tst`.
pub const DATA_DIR_ENV: &str = "CCDR_DATA_DIR";

pub const TRAIN_FILE: &str = "sat.trn";
pub const TEST_FILE: &str = "sat.tst";

/// `$CCDR_DATA_DIR`, or `./data` when unset.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Train and test paths of the Statlog satimage files inside `dir`.
pub fn statlog_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(TRAIN_FILE), dir.join(TEST_FILE))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a Statlog file; the dataset is named after the file.
pub fn load_statlog(path: &Path, remap: &LabelRemap) -> Result<LabeledDataset> {
    let text = read_text(path)?;
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_statlog(&text, remap, &name).map_err(|source| Error::Data {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_statlog(ds: &LabeledDataset, remap: &LabelRemap, path: &Path) -> Result<()> {
    write_text(path, &format_statlog(ds, remap)?)
}

/// `f1,...,fd,label` CSV.
pub fn save_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    write_text(path, &format_csv(ds))
}

/// Embedding coordinates as CSV with header `y1,...,ym[,label]`.
pub fn save_embedding(y: &Matrix, labels: Option<&[usize]>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header: Vec<String> = (1..=y.cols()).map(|j| format!("y{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (i, row) in y.iter_rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(labels) = labels {
            rec.push(labels[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Graph edges as CSV `i,j,w` with `i < j`.
pub fn save_edge_list(w: &WeightMatrix, path: &Path) -> Result<()> {
    let mut out = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    out.write_record(["i", "j", "w"])?;
    for (i, j, wij) in w.edges() {
        out.write_record(&[i.to_string(), j.to_string(), wij.to_string()])?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}
