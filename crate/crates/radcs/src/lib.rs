//! Scene directories, binary formats, report directories and the commands
//! behind the `radcs` binary.

pub mod commands;
pub mod error;
pub mod formats;
pub mod report;
pub mod scene;

pub use error::{Error, Result};

/// Size the global rayon pool from `RADCS_THREADS` (unset or 0 = automatic).
pub fn init_threads() -> Result<()> {
    let n = match std::env::var("RADCS_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("RADCS_THREADS must be a non-negative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}
