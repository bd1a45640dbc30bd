//! Seeded Monte-Carlo experiments and their CSV artifacts.
//!
//! Run `i` of an experiment draws from its own random substream: a
//! ChaCha12 generator keyed by `seed` (expanded with `seed_from_u64`) and
//! positioned on stream `i`. Results are gathered by run index, so output
//! is identical for any worker count.

mod config;
mod consistency;
mod fig1;
mod fig2;

pub use config::{parse_config, ScenarioConfig, DEFAULT_SEED};
pub use consistency::{nees_consistency, NeesReport};
pub use fig1::{fig1_statements, run_fig1, simulate_fig1, write_fig1_csv, Fig1Data, Fig1Statements};
pub use fig2::{run_fig2, simulate_fig2, write_fig2, Fig2Data};

use std::path::PathBuf;

use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numeric error: {0}")]
    Numeric(#[from] crate::Error),
}

impl ScenarioError {
    /// Process exit code: 2 for configuration problems, 3 for numeric
    /// failures, 1 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse(_) | Self::Validation { .. } => 2,
            Self::Numeric(_) => 3,
            Self::Io { .. } => 1,
        }
    }
}

/// Random stream for run `run` of an experiment seeded with `seed`.
pub fn substream(seed: u64, run: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Evaluates `f(0..runs)` on `workers` threads (0 = one per core) and
/// returns the results in index order.
pub fn run_indexed<T, F>(runs: usize, workers: usize, f: F) -> crate::Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> crate::Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers != 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| crate::Error::InvalidParameter(format!("thread pool: {e}")))?;
        return pool.install(|| (0..runs).into_par_iter().map(&f).collect());
    }
    let _ = workers;
    (0..runs).map(f).collect()
}

fn io_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    }
}
