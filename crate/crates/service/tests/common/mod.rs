#![allow(dead_code)]

use sprayq_aggregator::dataset_io::to_dataset;
use sprayq_aggregator::pipeline::AggregatorConfig;
use sprayq_core::semkl::train;
use sprayq_core::{Hyperparams, KernelBank, QualityTarget, SemklModel};
use sprayq_service::{EngineConfig, PredictorEngine, QualityLimits, TargetLimits};
use sprayq_sim::{generate_dataset, GroundTruth, SimDataset, SimScenario};

pub const HARDNESS_UPPER: f64 = 11.85;

pub fn benchmark(n_train: usize) -> SimDataset {
    generate_dataset(
        &SimScenario::benchmark(42, n_train),
        &AggregatorConfig::default(),
        &GroundTruth::benchmark(),
        n_train,
        0,
    )
    .unwrap()
}

pub fn model(data: &SimDataset, target: QualityTarget, c: f64) -> SemklModel {
    let d = to_dataset(&data.train, target).unwrap();
    train(&d, &KernelBank::standard(), &Hyperparams::new(c, 2.0)).unwrap().with_target(target)
}

pub fn hardness_model() -> SemklModel {
    model(&benchmark(150), QualityTarget::CoatingHardness, 10.0)
}

pub fn hardness_limits(upper: f64) -> QualityLimits {
    let mut l = QualityLimits::default();
    l.set(QualityTarget::CoatingHardness, TargetLimits::new(None, Some(upper)).unwrap()).unwrap();
    l
}

pub fn engine(models: Vec<SemklModel>, limits: QualityLimits) -> PredictorEngine {
    let mut e = PredictorEngine::new(AggregatorConfig::default(), EngineConfig::default(), limits).unwrap();
    for m in models {
        e.load_model(m.target.unwrap(), m).unwrap();
    }
    e
}
