//! Experiment runners behind the command line front end. Every runner
//! returns plain rows; [`write_csv`] puts them on disk under a schema
//! comment line.

pub mod accuracy;
pub mod config;
pub mod cost;
pub mod raster;
pub mod sweep;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{RacaError, Result};

pub use accuracy::{evaluate_accuracy, run_accuracy_vs_trials, AccuracyCurve, AccuracyRow};
pub use config::{ExperimentConfig, SweepAxis};
pub use cost::{run_cost_report, tally_costs, CostReport};
pub use raster::{run_wta_raster, WtaRaster};
pub use sweep::{run_sigmoid_sweep, SigmoidSweep};

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Writes `rows` as CSV, preceded by `# schema: raca/<schema> v<N>`.
pub fn write_csv<S: Serialize>(path: impl AsRef<Path>, schema: &str, rows: &[S]) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# schema: raca/{schema} v{CSV_SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| RacaError::Data {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `f` on a pool of `threads` workers (0 = pool default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RacaError::Config(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}
