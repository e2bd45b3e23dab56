//! One function per subcommand. Each takes the loaded [`RunConfig`] plus the
//! command-line overrides and writes machine-readable output: CSV for
//! tables, JSON for everything else.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sprayq_aggregator::dataset_io::{read_feature_csv, to_dataset, write_feature_csv, FeatureRow};
use sprayq_aggregator::event::{read_events, write_events};
use sprayq_aggregator::SensorEvent;
use sprayq_core::model_selection::{eps_error, linear_baseline, loo_cv, rmsd};
use sprayq_core::semkl::{self, load_model, save_model};
use sprayq_core::{Dataset, QualityTarget, SemklModel};
use sprayq_service::store::{DatasetStore, StoreConfig};
use sprayq_service::{EngineEvent, PredictorEngine, Service};
use sprayq_sim::{generate_dataset, generate_stream, replay as replay_events, GroundTruth, Pacing, SimScenario};

use crate::config::RunConfig;

/// Seed used when neither the command line nor the config names one.
pub const DEFAULT_SEED: u64 = 42;

/// Values given on the command line; each overrides its config counterpart.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub target: Option<QualityTarget>,
    pub out: Option<PathBuf>,
    pub speed: Option<f64>,
}

impl Overrides {
    fn target(&self) -> Result<QualityTarget> {
        self.target.ok_or_else(|| anyhow!("--target is required"))
    }
}

fn seed(cfg: &RunConfig, o: &Overrides) -> Option<u64> {
    o.seed.or(cfg.seed)
}

/// The configured scenario, or the benchmark sized to the configured
/// dataset. A seed from the command line or config replaces the file's.
pub fn scenario(cfg: &RunConfig, o: &Overrides) -> Result<SimScenario> {
    let mut s = match cfg.input(&cfg.paths.scenario) {
        Some(p) => SimScenario::load(&p).with_context(|| format!("scenario {}", p.display()))?,
        None => {
            let n = cfg.dataset.map_or(59, |d| d.n_train + d.n_test);
            SimScenario::benchmark(DEFAULT_SEED, n)
        }
    };
    if let Some(seed) = seed(cfg, o) {
        s.seed = seed;
    }
    Ok(s)
}

pub fn truth(cfg: &RunConfig) -> Result<GroundTruth> {
    match cfg.input(&cfg.paths.truth) {
        Some(p) => {
            let text = fs::read_to_string(&p).with_context(|| format!("truth {}", p.display()))?;
            let t: GroundTruth = toml::from_str(&text).with_context(|| format!("truth {}", p.display()))?;
            t.validate()?;
            Ok(t)
        }
        None => Ok(GroundTruth::benchmark()),
    }
}

fn rows(which: &str, path: Option<PathBuf>) -> Result<Vec<FeatureRow>> {
    let p = path.ok_or_else(|| anyhow!("paths.{which} is not set"))?;
    let f = File::open(&p).with_context(|| format!("{}", p.display()))?;
    read_feature_csv(f).with_context(|| format!("{}", p.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("{}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("{}", path.display()))?))
}

/// `--out` when given, stdout otherwise.
fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn print_json(v: &impl Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

/// Writes the event log, the effective scenario and, when `[dataset]` is
/// set, labelled train and test CSVs into the `--out` directory. The log
/// then covers exactly the dataset's epochs.
pub fn simulate(cfg: &RunConfig, o: &Overrides) -> Result<Value> {
    let dir = o.out.clone().ok_or_else(|| anyhow!("--out <dir> is required"))?;
    fs::create_dir_all(&dir).with_context(|| format!("{}", dir.display()))?;
    let mut s = scenario(cfg, o)?;
    if let Some(d) = cfg.dataset {
        s.epoch_count = d.n_train + d.n_test;
    }
    let run = generate_stream(&s)?;
    let events = dir.join("events.log");
    let mut w = create(&events)?;
    write_events(&mut w, &run.events)?;
    w.flush()?;
    fs::write(dir.join("scenario.toml"), toml::to_string(&s)?)?;
    let mut summary = json!({
        "scenario": s.name,
        "seed": s.seed,
        "epochs": run.epochs.len(),
        "events": run.events.len(),
        "events_path": events,
    });
    if let Some(d) = cfg.dataset {
        let data = generate_dataset(&s, &cfg.aggregator(), &truth(cfg)?, d.n_train, d.n_test)?;
        for (name, part) in [("train", &data.train), ("test", &data.test)] {
            let p = dir.join(format!("{name}.csv"));
            let mut w = create(&p)?;
            write_feature_csv(&mut w, part)?;
            w.flush()?;
            summary[name] = json!({ "rows": part.len(), "path": p });
        }
    }
    Ok(summary)
}

fn dataset(rows: &[FeatureRow], target: QualityTarget) -> Result<Dataset> {
    let d = to_dataset(rows, target)?;
    if d.is_empty() {
        bail!("no rows carry a {target} label");
    }
    Ok(d)
}

/// Fits one model on `paths.train`; `c` and `p` override `[train]`.
pub fn train(cfg: &RunConfig, o: &Overrides, c: Option<f64>, p: Option<f64>) -> Result<Value> {
    let target = o.target()?;
    let data = dataset(&rows("train", cfg.input(&cfg.paths.train))?, target)?;
    let hp = cfg.hyperparams(c, p);
    let model = semkl::train(&data, &cfg.bank(), &hp)?.with_target(target);
    let out = o.out.clone().unwrap_or_else(|| PathBuf::from(format!("{target}.model.json")));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_model(&model, &out)?;
    Ok(json!({
        "target": target,
        "model": out,
        "rows": data.len(),
        "c": hp.c,
        "p": hp.p,
        "epsilon": hp.epsilon,
        "weights": model.weights.gamma,
        "iterations": model.iters,
        "converged": model.converged,
        "objective": model.objective(),
    }))
}

/// Leave-one-out grid over `[grid]`; the RMSD table goes to `--out` or
/// stdout with the minimum marked `*`.
pub fn tune(cfg: &RunConfig, o: &Overrides) -> Result<Value> {
    let target = o.target()?;
    let data = dataset(&rows("train", cfg.input(&cfg.paths.train))?, target)?;
    let report = loo_cv(&data, &cfg.bank(), &cfg.grid(), &cfg.hyperparams(None, None))?;
    let mut w = sink(&o.out)?;
    w.write_all(report.to_csv().as_bytes())?;
    w.flush()?;
    for (pi, ci, msg) in &report.failures {
        log::warn!("cell p={} C={}: {msg}", report.grid.p_values[*pi], report.grid.c_values[*ci]);
    }
    Ok(json!({ "target": target, "rows": data.len(), "best": report.best, "failed_cells": report.failures.len() }))
}

pub const EVAL_HEADER: &str =
    "target,n_test,semkl_rmsd,semkl_eps_error,linear_rmsd,linear_eps_error,leaked_rows";

/// Test rows whose standardized inputs coincide with a training row of the
/// model, i.e. an evaluation that is not held out.
fn leaked_rows(model: &SemklModel, test: &Dataset) -> usize {
    let train: BTreeSet<Vec<u64>> = model.x_train.iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
    test.x
        .iter()
        .filter_map(|r| model.standardizer.transform(r).ok())
        .filter(|r| train.contains(&r.iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
        .count()
}

/// SEMKL and the least-squares baseline on `paths.test`; the baseline is
/// fitted on `paths.train`. A nonzero `leaked_rows` flags a model that has
/// seen the test rows.
pub fn eval(cfg: &RunConfig, o: &Overrides, model_path: Option<PathBuf>) -> Result<Value> {
    let model_path = match (model_path, o.target) {
        (Some(p), _) => p,
        (None, Some(t)) => cfg
            .model_paths()
            .remove(&t)
            .ok_or_else(|| anyhow!("no --model given and models.{t} is not set"))?,
        (None, None) => bail!("--model or --target is required"),
    };
    let model = load_model(&model_path)?;
    let target = match (o.target, model.target) {
        (Some(t), Some(m)) if t != m => bail!("{} predicts {m}, not {t}", model_path.display()),
        (Some(t), _) | (None, Some(t)) => t,
        (None, None) => bail!("{} names no target; pass --target", model_path.display()),
    };
    let test = dataset(&rows("test", cfg.input(&cfg.paths.test))?, target)?;
    let train = dataset(&rows("train", cfg.input(&cfg.paths.train))?, target)?;
    let eps = model.hyperparams.epsilon;
    let f = model.predict_batch(&test.x)?;
    let semkl_rmsd = rmsd(&test.y, &f)?;
    let semkl_eps = eps_error(&test.y, &f, eps)?;
    let lin = linear_baseline(&train, &test, eps)?;
    let leaked = leaked_rows(&model, &test);
    let mut w = sink(&o.out)?;
    writeln!(w, "{EVAL_HEADER}")?;
    writeln!(
        w,
        "{target},{},{semkl_rmsd:.6},{semkl_eps:.6},{:.6},{:.6},{leaked}",
        test.len(),
        lin.rmsd,
        lin.eps_error
    )?;
    w.flush()?;
    if leaked > 0 {
        log::warn!("{leaked} of {} test rows were in the model's training set", test.len());
    }
    Ok(json!({
        "target": target,
        "semkl": { "rmsd": semkl_rmsd, "eps_error": semkl_eps },
        "linear": { "rmsd": lin.rmsd, "eps_error": lin.eps_error },
        "ratio": semkl_rmsd / lin.rmsd,
        "leaked_rows": leaked,
    }))
}

/// An engine with the configured models, limits and store.
pub fn engine(cfg: &RunConfig) -> Result<PredictorEngine> {
    let mut e = PredictorEngine::new(cfg.aggregator(), cfg.engine(), cfg.limits())?;
    for (target, path) in cfg.model_paths() {
        let m = load_model(&path).with_context(|| format!("models.{target}"))?;
        e.load_model(target, m).with_context(|| format!("models.{target}"))?;
    }
    if let Some(store) = &cfg.serve.store {
        let mut sc = StoreConfig::new(cfg.resolve(store));
        if let Some(d) = &cfg.serve.dead_letter {
            sc.dead_letter = cfg.resolve(d);
        }
        e = e.with_store(DatasetStore::new(sc));
    }
    Ok(e)
}

/// `events` when given, else `paths.events`, else a fresh run of the
/// configured scenario.
pub fn stream(cfg: &RunConfig, o: &Overrides, events: Option<PathBuf>) -> Result<Vec<SensorEvent>> {
    match events.or_else(|| cfg.input(&cfg.paths.events)) {
        Some(p) => {
            let f = File::open(&p).with_context(|| format!("{}", p.display()))?;
            read_events(BufReader::new(f)).with_context(|| format!("{}", p.display()))
        }
        None => Ok(generate_stream(&scenario(cfg, o)?)?.events),
    }
}

/// Replay output drops `latency_ms`, the only wall-clock quantity, so that
/// runs at different speeds can be compared line for line.
pub fn event_line(ev: &EngineEvent) -> Result<String> {
    let mut v = serde_json::to_value(ev)?;
    if let Some(m) = v.as_object_mut() {
        m.remove("latency_ms");
    }
    Ok(v.to_string())
}

fn summary(e: &PredictorEngine) -> Value {
    let m = e.metrics();
    json!({
        "events": m.events,
        "epochs_closed": m.epochs_closed,
        "ticks": m.ticks,
        "skipped_ticks": m.skipped_ticks,
        "deferred_predictions": m.deferred_predictions,
        "alerts": e.alerts().len(),
        "dead_lettered": m.dead_lettered,
        "tick_latency_ms": { "mean": m.tick_latency.mean_ms(), "max": m.tick_latency.max_ms },
    })
}

/// Feeds a log through an offline engine at `--speed` (default as fast as
/// possible) and writes every engine event as a JSON line.
pub fn replay(cfg: &RunConfig, o: &Overrides, events: Option<PathBuf>) -> Result<Value> {
    let events = stream(cfg, o, events)?;
    let pacing = Pacing::from_speed(o.speed.unwrap_or(0.0))?;
    let mut e = engine(cfg)?;
    let mut w = sink(&o.out)?;
    let mut failed = None;
    replay_events(&events, pacing, |ev| {
        for out in e.ingest(ev) {
            if failed.is_none() {
                if let Err(err) = event_line(&out).and_then(|l| Ok(writeln!(w, "{l}")?)) {
                    failed = Some(err);
                }
            }
        }
    });
    if let Some(err) = failed {
        return Err(err);
    }
    w.flush()?;
    Ok(summary(&e))
}

/// Serves the API on `[serve].bind` while feeding the stream at `--speed`
/// (default real time). Prints `{"listening": addr}` once bound. Without
/// `exit_when_done` it keeps serving after the stream ends until interrupted.
pub async fn serve(cfg: &RunConfig, o: &Overrides, events: Option<PathBuf>, exit_when_done: bool) -> Result<Value> {
    let events = stream(cfg, o, events)?;
    let pacing = Pacing::from_speed(o.speed.unwrap_or(1.0))?;
    let service = Service::new(engine(cfg)?);
    let listener = tokio::net::TcpListener::bind(&cfg.serve.bind)
        .await
        .with_context(|| format!("bind {}", cfg.serve.bind))?;
    print_json(&json!({ "listening": listener.local_addr()?.to_string() }))?;
    let server = tokio::spawn(sprayq_service::serve(listener, service.clone()));
    let feeder = {
        let s = service.clone();
        tokio::task::spawn_blocking(move || {
            replay_events(&events, pacing, |ev| {
                s.ingest(ev);
            })
        })
    };
    let stats = tokio::select! {
        r = feeder => Some(r?),
        _ = tokio::signal::ctrl_c() => None,
    };
    if stats.is_some() && !exit_when_done {
        log::info!("stream finished; serving until interrupted");
        tokio::select! {
            r = server => r??,
            _ = tokio::signal::ctrl_c() => {}
        }
    }
    let mut out = summary(&service.engine());
    if let Some(st) = stats {
        out["replay_max_lag_ms"] = json!(st.max_lag.as_secs_f64() * 1000.0);
    }
    out["push_latency_ms"] = json!({ "mean": service.push_latency().mean_ms(), "max": service.push_latency().max_ms });
    Ok(out)
}

/// Exit status and message for a failed command; config errors already
/// carry `file:line:`.
pub fn report(err: &anyhow::Error) -> String {
    let mut msg = format!("error: {err}");
    for cause in err.chain().skip(1) {
        msg.push_str(&format!("\n  caused by: {cause}"));
    }
    msg
}
