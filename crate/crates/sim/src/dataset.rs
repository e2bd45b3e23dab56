//! Labelled feature datasets: simulated epochs through the aggregator.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sprayq_aggregator::dataset_io::FeatureRow;
use sprayq_aggregator::{Aggregator, AggregatorConfig, ClosedEpoch};
use sprayq_core::QualityTarget;

use crate::error::{Error, Result};
use crate::scenario::SimScenario;
use crate::stream::{generate_stream, SimRun};
use crate::truth::GroundTruth;

/// First random stream used for label noise; target `k` uses `LABEL_STREAM + k`.
const LABEL_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub train: Vec<FeatureRow>,
    pub test: Vec<FeatureRow>,
    /// Noise-free labels per row, train rows first.
    pub clean: Vec<BTreeMap<QualityTarget, f64>>,
    /// Label noise sd actually used per target.
    pub noise_sd: BTreeMap<QualityTarget, f64>,
}

impl SimDataset {
    pub fn rows(&self) -> impl Iterator<Item = &FeatureRow> {
        self.train.iter().chain(&self.test)
    }
}

/// Every closed epoch of `run`, in order, through a fresh aggregator.
pub fn aggregate(run: &SimRun, cfg: &AggregatorConfig) -> Result<Vec<ClosedEpoch>> {
    let mut agg = Aggregator::new(cfg.clone())?;
    Ok(run.events.iter().filter_map(|e| agg.ingest(e)).collect())
}

/// Runs `n_train + n_test` epochs of `scenario` and labels them with
/// `truth`. The first `n_train` epochs form the training split.
pub fn generate_dataset(
    scenario: &SimScenario,
    cfg: &AggregatorConfig,
    truth: &GroundTruth,
    n_train: usize,
    n_test: usize,
) -> Result<SimDataset> {
    let n = n_train + n_test;
    if n == 0 {
        return Err(Error::Scenario("dataset needs at least one epoch".into()));
    }
    truth.validate()?;
    let mut s = scenario.clone();
    s.epoch_count = n;
    let run = generate_stream(&s)?;
    let closed = aggregate(&run, cfg)?;
    if closed.len() != n {
        return Err(Error::Epoch {
            index: closed.len(),
            msg: format!("expected {n} closed epochs, got {}", closed.len()),
        });
    }
    let mut features = Vec::with_capacity(n);
    for (i, ep) in closed.iter().enumerate() {
        match &ep.features {
            Some(f) => features.push(f.values.clone()),
            None => {
                return Err(Error::Epoch {
                    index: i,
                    msg: ep.error.clone().unwrap_or_else(|| "no features".into()),
                })
            }
        }
    }
    let mut clean = vec![BTreeMap::new(); n];
    let mut noise_sd = BTreeMap::new();
    let mut labels = vec![BTreeMap::new(); n];
    for (k, (&target, tt)) in truth.targets.iter().enumerate() {
        let g: Vec<f64> = features.iter().map(|f| truth.eval(target, f)).collect::<Result<_>>()?;
        let (lo, hi) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let sd = tt.noise_frac * (hi - lo);
        noise_sd.insert(target, sd);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(LABEL_STREAM + k as u64);
        let normal = (sd > 0.0).then(|| Normal::new(0.0, sd).expect("finite sd"));
        for (i, &gi) in g.iter().enumerate() {
            clean[i].insert(target, gi);
            labels[i].insert(target, gi + normal.map_or(0.0, |d| d.sample(&mut rng)));
        }
    }
    let mut rows: Vec<FeatureRow> = closed
        .iter()
        .zip(features)
        .zip(labels)
        .map(|((ep, features), labels)| FeatureRow { epoch: ep.epoch, features, labels })
        .collect();
    let test = rows.split_off(n_train);
    log::info!("{}: {} train / {} test epochs", s.name, rows.len(), test.len());
    Ok(SimDataset { train: rows, test, clean, noise_sd })
}
