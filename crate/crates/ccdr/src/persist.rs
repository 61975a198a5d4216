//! JSON model files with a format tag and version.

use std::path::Path;

use ccdr_core::CcdrModel;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_text, write_text};

pub const MODEL_FORMAT: &str = "ccdr-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize)]
struct EnvelopeRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a CcdrModel,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct Envelope {
    model: CcdrModel,
}

/// Serialises a model. Floats are written in shortest round-trip form, so
/// loading the text reproduces every value bit for bit.
pub fn model_to_json(model: &CcdrModel) -> String {
    let env = EnvelopeRef {
        format: MODEL_FORMAT,
        version: MODEL_VERSION,
        model,
    };
    serde_json::to_string(&env).expect("model serialisation cannot fail")
}

/// Parses and validates a model; `path` is only used in error messages.
pub fn model_from_json(text: &str, path: &Path) -> Result<CcdrModel> {
    let json = |source| Error::Json {
        path: path.to_path_buf(),
        source,
    };
    let header: Header = serde_json::from_str(text).map_err(json)?;
    if header.format != MODEL_FORMAT || header.version != MODEL_VERSION {
        return Err(Error::ModelFormat {
            path: path.to_path_buf(),
            expected: MODEL_FORMAT,
            version: MODEL_VERSION,
            found: format!("{} version {}", header.format, header.version),
        });
    }
    let env: Envelope = serde_json::from_str(text).map_err(json)?;
    env.model.validate().map_err(|source| Error::Data {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(env.model)
}

pub fn save_model(model: &CcdrModel, path: &Path) -> Result<()> {
    write_text(path, &model_to_json(model))
}

pub fn load_model(path: &Path) -> Result<CcdrModel> {
    model_from_json(&read_text(path)?, path)
}
