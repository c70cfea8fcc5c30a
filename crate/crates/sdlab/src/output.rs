//! Writing records to disk: CSV tables, SVG plots and the JSON record.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::record::RunRecord;
use crate::svg;

pub const TABLE_FILE: &str = "table.csv";
pub const PLOT_FILE: &str = "plot.svg";
pub const RECORD_FILE: &str = "record.json";

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the record's table as CSV and returns its path. Re-emitting the
/// same record produces a byte-identical file.
pub fn emit_table(record: &RunRecord) -> Result<PathBuf> {
    let dir = record.output_dir();
    ensure_dir(&dir)?;
    let path = dir.join(TABLE_FILE);
    write_csv(&path, record)?;
    Ok(path)
}

fn write_csv(path: &Path, record: &RunRecord) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(&record.table.columns)?;
    for row in &record.table.rows {
        w.write_record(row.iter().map(|c| c.render()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn emit_plot(record: &RunRecord) -> Result<PathBuf> {
    let dir = record.output_dir();
    ensure_dir(&dir)?;
    let path = dir.join(PLOT_FILE);
    write_text(&path, &svg::render(&record.plot))?;
    Ok(path)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes table, plot and JSON record, filling in `record.artifacts` first so
/// the JSON lists every file including itself.
pub fn write_all(record: &mut RunRecord) -> Result<()> {
    let dir = record.output_dir();
    record.artifacts = vec![dir.join(TABLE_FILE), dir.join(PLOT_FILE), dir.join(RECORD_FILE)];
    emit_table(record)?;
    emit_plot(record)?;
    write_text(&dir.join(RECORD_FILE), &record.to_json()?)
}
