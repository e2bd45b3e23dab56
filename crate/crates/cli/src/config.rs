//! The run configuration: one TOML file holding paths, kernel bank, grid,
//! hyperparameters, model files, limits and service settings. Relative paths
//! are resolved against the file's directory and every input path must
//! exist when the file is loaded.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sprayq_aggregator::AggregatorConfig;
use sprayq_core::{GridSpec, Hyperparams, KernelBank, KernelSpec, QualityTarget};
use sprayq_service::{EngineConfig, QualityLimits};
use toml::Spanned;

/// A configuration problem located in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{l}: {}", self.path.display(), self.msg),
            None => write!(f, "{}: {}", self.path.display(), self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub scenario: Option<Spanned<PathBuf>>,
    /// Ground truth for labelling simulated epochs; the built-in benchmark
    /// truth when absent.
    pub truth: Option<Spanned<PathBuf>>,
    pub train: Option<Spanned<PathBuf>>,
    pub test: Option<Spanned<PathBuf>>,
    pub events: Option<Spanned<PathBuf>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_c_values")]
    pub c_values: Vec<f64>,
    #[serde(default = "default_p_values")]
    pub p_values: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_c_values() -> Vec<f64> {
    GridSpec::default().c_values
}

fn default_p_values() -> Vec<f64> {
    GridSpec::default().p_values
}

fn default_epsilon() -> f64 {
    GridSpec::default().epsilon
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        GridConfig {
            c_values: g.c_values,
            p_values: g.p_values,
            epsilon: g.epsilon,
        }
    }
}

impl From<&GridConfig> for GridSpec {
    fn from(g: &GridConfig) -> Self {
        GridSpec {
            c_values: g.c_values.clone(),
            p_values: g.p_values.clone(),
            epsilon: g.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub c: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSpec {
    #[serde(default = "default_bind")]
    pub bind: String,
    /// Closed epochs are appended here for retraining.
    pub store: Option<PathBuf>,
    pub dead_letter: Option<PathBuf>,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

impl Default for ServeSpec {
    fn default() -> Self {
        ServeSpec { bind: default_bind(), store: None, dead_letter: None }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: Paths,
    pub dataset: Option<DatasetSpec>,
    /// The standard ten-kernel bank when absent.
    pub kernels: Option<Spanned<Vec<KernelSpec>>>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub train: TrainSpec,
    #[serde(default)]
    pub models: BTreeMap<QualityTarget, Spanned<PathBuf>>,
    pub limits: Option<Spanned<QualityLimits>>,
    pub engine: Option<Spanned<EngineConfig>>,
    pub aggregator: Option<Spanned<AggregatorConfig>>,
    #[serde(default)]
    pub serve: ServeSpec,
    /// Directory of the file, for resolving relative paths.
    #[serde(skip)]
    pub base: PathBuf,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.into(),
            line: None,
            msg: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, path, base)
    }

    /// `path` only labels diagnostics; relative paths resolve against `base`.
    pub fn parse(text: &str, path: &Path, base: PathBuf) -> Result<Self, ConfigError> {
        let err = |span: Option<std::ops::Range<usize>>, msg: String| ConfigError {
            path: path.into(),
            line: span.map(|s| line_of(text, s.start)),
            msg,
        };
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().trim().to_string();
            err(e.span(), msg)
        })?;
        cfg.base = base;

        let mut inputs: Vec<(&str, &Spanned<PathBuf>)> = Vec::new();
        let p = &cfg.paths;
        for (key, v) in [
            ("paths.scenario", &p.scenario),
            ("paths.truth", &p.truth),
            ("paths.train", &p.train),
            ("paths.test", &p.test),
            ("paths.events", &p.events),
        ] {
            if let Some(v) = v {
                inputs.push((key, v));
            }
        }
        let model_keys: Vec<String> = cfg.models.keys().map(|t| format!("models.{t}")).collect();
        for (key, v) in model_keys.iter().zip(cfg.models.values()) {
            inputs.push((key, v));
        }
        for (key, v) in inputs {
            let resolved = cfg.resolve(v.get_ref());
            if !resolved.is_file() {
                return Err(err(Some(v.span()), format!("{key}: no such file {}", resolved.display())));
            }
        }
        if let Some(k) = &cfg.kernels {
            KernelBank::new(k.get_ref().clone()).map_err(|e| err(Some(k.span()), format!("kernels: {e}")))?;
        }
        GridSpec::from(&cfg.grid).validate().map_err(|e| err(None, format!("grid: {e}")))?;
        if let Some(l) = &cfg.limits {
            l.get_ref().validate().map_err(|e| err(Some(l.span()), format!("limits: {e}")))?;
        }
        if let Some(en) = &cfg.engine {
            en.get_ref().validate().map_err(|e| err(Some(en.span()), format!("engine: {e}")))?;
        }
        if let Some(a) = &cfg.aggregator {
            a.get_ref().validate().map_err(|e| err(Some(a.span()), format!("aggregator: {e}")))?;
        }
        let hp = cfg.hyperparams(None, None);
        hp.validate().map_err(|e| err(None, format!("train: {e}")))?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn input(&self, p: &Option<Spanned<PathBuf>>) -> Option<PathBuf> {
        p.as_ref().map(|s| self.resolve(s.get_ref()))
    }

    pub fn bank(&self) -> KernelBank {
        match &self.kernels {
            Some(k) => KernelBank::new(k.get_ref().clone()).expect("validated at load"),
            None => KernelBank::standard(),
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::from(&self.grid)
    }

    /// Command-line values win over `[train]`, which wins over the defaults.
    pub fn hyperparams(&self, c: Option<f64>, p: Option<f64>) -> Hyperparams {
        let mut hp = Hyperparams::new(c.or(self.train.c).unwrap_or(1.0), p.or(self.train.p).unwrap_or(1.0));
        hp.epsilon = self.grid.epsilon;
        hp
    }

    pub fn limits(&self) -> QualityLimits {
        self.limits.as_ref().map(|l| l.get_ref().clone()).unwrap_or_default()
    }

    pub fn engine(&self) -> EngineConfig {
        self.engine.as_ref().map(|e| *e.get_ref()).unwrap_or_default()
    }

    pub fn aggregator(&self) -> AggregatorConfig {
        self.aggregator.as_ref().map(|a| a.get_ref().clone()).unwrap_or_default()
    }

    pub fn model_paths(&self) -> BTreeMap<QualityTarget, PathBuf> {
        self.models.iter().map(|(t, p)| (*t, self.resolve(p.get_ref()))).collect()
    }
}
