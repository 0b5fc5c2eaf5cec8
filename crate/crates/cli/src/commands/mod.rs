mod agents;
mod evaluate;
mod forecaster;
mod profiles;
mod search;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use agents::{train_agents, ConvergenceRow};
pub use evaluate::{episode_starts, evaluate, ComparisonRow};
pub use forecaster::{train_forecaster, MetricsRow};
pub use profiles::generate_profiles;
pub use search::{hp_search, TrialRow};

use crate::CliError;

fn ensure_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    p2p_core::env::write_rows(BufWriter::new(File::create(path)?), rows)?;
    Ok(())
}

fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
