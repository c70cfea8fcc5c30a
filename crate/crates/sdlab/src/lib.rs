//! Config-driven experiment runner on top of `sdlab-core`: suites, JSON run
//! records, CSV tables, SVG plots and the acceptance checks.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod output;
pub mod record;
pub mod suites;
pub mod svg;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{ExperimentConfig, GridSize, Suite};
pub use error::{Error, Result};
pub use output::emit_table;
pub use record::{Cell, GridRun, RunRecord, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

/// Executes `config` and writes its table, plot and record under
/// `output_dir/name/`.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    let mut record = suites::execute(config)?;
    output::write_all(&mut record)?;
    Ok(record)
}

/// The `.json` files of `dir`, sorted by name.
pub fn config_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every config first (any invalid one fails the whole batch), then
/// runs them in parallel, each into its own output subdirectory.
pub fn run_suite_dir(dir: &Path, adjust: impl Fn(&mut ExperimentConfig) + Sync) -> Result<Vec<RunRecord>> {
    let mut configs = config_files(dir)?
        .iter()
        .map(|p| ExperimentConfig::load(p))
        .collect::<Result<Vec<_>>>()?;
    configs.iter_mut().for_each(&adjust);
    for c in &configs {
        c.validate()?;
    }
    let mut names: Vec<&str> = configs.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!("two configs share the name {}", w[0])));
    }
    configs.par_iter().map(run).collect()
}
