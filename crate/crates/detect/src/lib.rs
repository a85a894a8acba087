//! File formats, parallel Monte-Carlo runs, CSV output and oracle suites for
//! `das-detect-core`.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod model_file;
pub mod oracle;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
