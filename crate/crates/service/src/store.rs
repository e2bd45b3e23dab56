//! Appending finalized epochs to the feature dataset for later retraining.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;
use sprayq_aggregator::dataset_io::{write_feature_csv, FeatureRow};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct StoreConfig {
    pub dataset: PathBuf,
    /// JSON lines of rows that could not be appended.
    pub dead_letter: PathBuf,
    pub attempts: usize,
    pub backoff: Duration,
}

impl StoreConfig {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        let dataset = dataset.into();
        let mut dead_letter = dataset.clone().into_os_string();
        dead_letter.push(".deadletter.jsonl");
        StoreConfig {
            dataset,
            dead_letter: dead_letter.into(),
            attempts: 3,
            backoff: Duration::from_millis(20),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Persisted {
    Stored { attempts: usize },
    DeadLettered { attempts: usize, error: String },
}

#[derive(Serialize)]
struct DeadLetter<'a> {
    error: &'a str,
    row: &'a FeatureRow,
}

#[derive(Debug, Clone)]
pub struct DatasetStore {
    cfg: StoreConfig,
}

impl DatasetStore {
    pub fn new(cfg: StoreConfig) -> Self {
        DatasetStore { cfg }
    }

    pub fn config(&self) -> &StoreConfig {
        &self.cfg
    }

    /// Appends `row`, retrying with linear backoff; after the last failed
    /// attempt the row goes to the dead-letter file. Errors only when that
    /// write fails too.
    pub fn persist(&self, row: &FeatureRow) -> Result<Persisted> {
        let mut last = String::new();
        for attempt in 1..=self.cfg.attempts.max(1) {
            match self.append(row) {
                Ok(()) => return Ok(Persisted::Stored { attempts: attempt }),
                Err(e) => {
                    log::warn!("epoch {}: append attempt {attempt} failed: {e}", row.epoch);
                    last = e.to_string();
                    std::thread::sleep(self.cfg.backoff * attempt as u32);
                }
            }
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.cfg.dead_letter)?;
        let line = serde_json::to_string(&DeadLetter { error: &last, row })?;
        writeln!(f, "{line}")?;
        Ok(Persisted::DeadLettered { attempts: self.cfg.attempts.max(1), error: last })
    }

    fn append(&self, row: &FeatureRow) -> Result<()> {
        let fresh = std::fs::metadata(&self.cfg.dataset).map_or(true, |m| m.len() == 0);
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, std::slice::from_ref(row))?;
        let body = if fresh {
            &buf[..]
        } else {
            let nl = buf.iter().position(|&b| b == b'\n').map_or(buf.len(), |i| i + 1);
            &buf[nl..]
        };
        let mut f = OpenOptions::new().create(true).append(true).open(&self.cfg.dataset)?;
        f.write_all(body)?;
        f.flush()?;
        Ok(())
    }
}
