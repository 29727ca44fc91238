//! File formats, benchmark orchestration, figures and the command-line
//! front end for `multirep-core`.

pub mod bench;
pub mod cli;
pub mod config_text;
pub mod error;
pub mod indices;
pub mod journal;
pub mod report;
pub mod svg;
pub mod tsv;
pub mod weights;

pub use error::{Error, Result};
