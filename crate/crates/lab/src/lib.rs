//! File formats, figures and the `kgstitch` command line on top of
//! `kgstitch-core`.
//!
//! Every command writes into a fresh run directory under `--out`, named
//! after the command and a hash of the resolved config. The directory always
//! contains that config as `config.toml`.

pub mod cli;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod format;
pub mod rundir;
pub mod runner;
pub mod svg;
pub mod trees;

pub use error::{LabError, LabResult};
