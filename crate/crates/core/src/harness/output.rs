use std::path::Path;

use serde::Serialize;

use crate::npcfr::EpochRecord;

use super::eval::{CellTiming, ResultRow};
use super::tables::Tables;
use super::HarnessError;

fn write_csv<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `algorithm,game,game_param,seed,step,nash_gap,cce_gap,efm`.
pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), HarnessError> {
    write_csv(path, rows)
}

pub fn write_timings(path: &Path, timings: &[CellTiming]) -> Result<(), HarnessError> {
    write_csv(path, timings)
}

/// `epoch,loss`.
pub fn write_train_log(path: &Path, log: &[EpochRecord]) -> Result<(), HarnessError> {
    #[derive(Serialize)]
    struct Line {
        epoch: usize,
        loss: f64,
    }
    write_csv(path, log.iter().map(|r| Line { epoch: r.epoch, loss: r.loss }))
}

pub fn write_tables(path: &Path, tables: &Tables) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(tables).map_err(|e| HarnessError::io(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

/// Reads rows written by [`write_results`].
pub fn parse_results(text: &str) -> Result<Vec<ResultRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}
