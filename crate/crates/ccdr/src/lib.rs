//! File IO, model persistence, experiment sweeps and configuration for
//! the `ccdr-core` numerics. The `ccdr` binary is a thin CLI over this
//! library.

pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod persist;

pub use crate::error::{Error, Result};
pub use ccdr_core as core;
