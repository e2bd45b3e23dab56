//! Event-driven aggregation: robot status opens and closes epochs, sensor
//! events feed per-channel deadband recorders, and a closed epoch is aligned,
//! imputed and reduced to features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channels::{standard_channels, ChannelConfig, *};
use crate::deadband::{DeadbandRecorder, RecorderStats};
use crate::error::{Error, Result};
use crate::event::SensorEvent;
use crate::features::{extract_from_table, FeatureConfig, FeatureVector, StaticParams};
use crate::impute::{impute, CompletedTable, ImputeConfig, RegressionReference};
use crate::sampling::{EpochMarker, SamplingConfig, SamplingController};
use crate::series::StoredSeries;
use crate::sync::{synchronize, AlignedTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AggregatorConfig {
    pub channels: Vec<ChannelConfig>,
    pub sampling: SamplingConfig,
    pub grid_step_ms: i64,
    pub impute: ImputeConfig,
    pub features: FeatureConfig,
    /// Reference rows kept per regression target.
    pub reference_rows: usize,
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        AggregatorConfig {
            channels: standard_channels(),
            sampling: SamplingConfig::default(),
            grid_step_ms: 100,
            impute: default_impute(),
            features: FeatureConfig::default(),
            reference_rows: 20_000,
        }
    }
}

/// Gas flows and each line's inlet/outlet pressures regress on each other.
pub fn default_impute() -> ImputeConfig {
    let pairs = [
        (OXYGEN_FLOW, FUEL_FLOW),
        (FUEL_FLOW, OXYGEN_FLOW),
        (FUEL_OUTLET_PRESSURE, FUEL_INLET_PRESSURE),
        (FUEL_INLET_PRESSURE, FUEL_OUTLET_PRESSURE),
        (OXYGEN_OUTLET_PRESSURE, OXYGEN_INLET_PRESSURE),
        (OXYGEN_INLET_PRESSURE, OXYGEN_OUTLET_PRESSURE),
        (SHROUD_OUTLET_PRESSURE, SHROUD_INLET_PRESSURE),
        (SHROUD_INLET_PRESSURE, SHROUD_OUTLET_PRESSURE),
    ];
    ImputeConfig {
        regressors: pairs
            .iter()
            .map(|(t, r)| (t.to_string(), vec![r.to_string()]))
            .collect(),
    }
}

impl AggregatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_step_ms <= 0 {
            return Err(Error::Config("grid_step_ms must be positive".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.channels {
            c.validate()?;
            if !seen.insert(c.id.as_str()) {
                return Err(Error::Config(format!("duplicate channel {}", c.id)));
            }
            if c.id == ROBOT_STATUS {
                return Err(Error::Config("robot_status is implicit and must not be listed".into()));
            }
        }
        for (t, regs) in &self.impute.regressors {
            for ch in std::iter::once(t).chain(regs) {
                if !seen.contains(ch.as_str()) {
                    return Err(Error::Config(format!("imputation refers to unknown channel {ch}")));
                }
            }
        }
        if !(self.features.r_stoich > 0.0) {
            return Err(Error::Config("r_stoich must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedEpoch {
    pub epoch: u64,
    pub start_ms: i64,
    pub end_ms: i64,
    pub statics: StaticParams,
    pub series: Vec<StoredSeries>,
    pub table: AlignedTable,
    pub completed: Option<CompletedTable>,
    pub features: Option<FeatureVector>,
    /// Why completion or extraction failed.
    pub error: Option<String>,
}

/// One epoch taken through alignment, imputation and extraction.
pub fn process_epoch(
    series: &[StoredSeries],
    start_ms: i64,
    end_ms: i64,
    cfg: &AggregatorConfig,
    reference: &RegressionReference,
    statics: &StaticParams,
) -> Result<(AlignedTable, CompletedTable, FeatureVector)> {
    let table = synchronize(series, start_ms, end_ms, cfg.grid_step_ms)?;
    let completed = impute(&table, reference)?;
    let features = extract_from_table(&completed, statics, &cfg.features)?;
    Ok((table, completed, features))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub events: u64,
    pub unknown_channel: u64,
    pub out_of_order: u64,
    pub outside_epoch: u64,
}

struct OpenEpoch {
    id: u64,
    start_ms: i64,
    statics: StaticParams,
    recorders: BTreeMap<String, DeadbandRecorder>,
}

pub struct Aggregator {
    cfg: AggregatorConfig,
    ctl: SamplingController,
    open: Option<OpenEpoch>,
    statics: StaticParams,
    reference: RegressionReference,
    stats: IngestStats,
    recorder_totals: BTreeMap<String, RecorderStats>,
    last_t_ms: Option<i64>,
}

impl Aggregator {
    pub fn new(cfg: AggregatorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Aggregator {
            ctl: SamplingController::new(cfg.sampling),
            reference: RegressionReference::new(cfg.impute.clone(), cfg.reference_rows),
            cfg,
            open: None,
            statics: StaticParams::default(),
            stats: IngestStats::default(),
            recorder_totals: BTreeMap::new(),
            last_t_ms: None,
        })
    }

    pub fn config(&self) -> &AggregatorConfig {
        &self.cfg
    }

    /// Job parameters for the next epoch to open.
    pub fn set_static_params(&mut self, statics: StaticParams) {
        self.statics = statics;
    }

    pub fn reference(&self) -> &RegressionReference {
        &self.reference
    }

    pub fn reference_mut(&mut self) -> &mut RegressionReference {
        &mut self.reference
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    pub fn recorder_totals(&self) -> &BTreeMap<String, RecorderStats> {
        &self.recorder_totals
    }

    pub fn open_epoch(&self) -> Option<(u64, i64)> {
        self.open.as_ref().map(|o| (o.id, o.start_ms))
    }

    pub fn last_t_ms(&self) -> Option<i64> {
        self.last_t_ms
    }

    /// Returns the epoch closed by this event, if any.
    pub fn ingest(&mut self, ev: &SensorEvent) -> Option<ClosedEpoch> {
        self.stats.events += 1;
        self.last_t_ms = Some(self.last_t_ms.map_or(ev.t_ms, |t| t.max(ev.t_ms)));
        let mut closed = None;
        if let Some(EpochMarker::End { t_ms, .. }) = self.ctl.check_watchdog(ev.t_ms) {
            closed = self.close(t_ms);
        }
        if ev.channel == ROBOT_STATUS {
            let coating = ev.reading().is_some_and(|v| v == STATUS_COATING);
            match self.ctl.observe_status(ev.t_ms, coating) {
                Some(EpochMarker::Start { epoch, t_ms }) => self.start(epoch, t_ms),
                Some(EpochMarker::End { t_ms, .. }) => closed = self.close(t_ms),
                None => {}
            }
            return closed;
        }
        if let Some(v) = ev.reading() {
            match ev.channel.as_str() {
                JOB_STAND_OFF_DISTANCE => self.statics.stand_off_distance = v,
                JOB_COATING_VELOCITY => self.statics.coating_velocity = v,
                JOB_POWDER_FEED_RATE => self.statics.powder_feed_rate = v,
                _ => {}
            }
        }
        if [JOB_STAND_OFF_DISTANCE, JOB_COATING_VELOCITY, JOB_POWDER_FEED_RATE].contains(&ev.channel.as_str()) {
            return closed;
        }
        match self.open.as_mut() {
            Some(open) => match open.recorders.get_mut(&ev.channel) {
                Some(rec) => {
                    if rec.push(ev).is_err() {
                        self.stats.out_of_order += 1;
                    }
                }
                None => self.stats.unknown_channel += 1,
            },
            None => {
                if self.cfg.channels.iter().any(|c| c.id == ev.channel) {
                    self.stats.outside_epoch += 1;
                } else {
                    self.stats.unknown_channel += 1;
                }
            }
        }
        closed
    }

    fn start(&mut self, id: u64, start_ms: i64) {
        let recorders = self
            .cfg
            .channels
            .iter()
            .map(|c| (c.id.clone(), DeadbandRecorder::new(c.clone(), start_ms)))
            .collect();
        self.open = Some(OpenEpoch {
            id,
            start_ms,
            statics: self.statics,
            recorders,
        });
    }

    fn close(&mut self, end_ms: i64) -> Option<ClosedEpoch> {
        let open = self.open.take()?;
        let mut series = Vec::with_capacity(open.recorders.len());
        for c in &self.cfg.channels {
            let rec = open.recorders.get(&c.id).expect("recorder per channel").clone();
            let st = rec.stats();
            let tot = self.recorder_totals.entry(c.id.clone()).or_default();
            tot.stored += st.stored;
            tot.suppressed += st.suppressed;
            tot.rejected += st.rejected;
            series.push(rec.finish(end_ms));
        }
        let mut out = ClosedEpoch {
            epoch: open.id,
            start_ms: open.start_ms,
            end_ms,
            statics: open.statics,
            table: AlignedTable {
                start_ms: open.start_ms,
                end_ms,
                step_ms: self.cfg.grid_step_ms,
                t_ms: Vec::new(),
                channels: Vec::new(),
                columns: Vec::new(),
            },
            series,
            completed: None,
            features: None,
            error: None,
        };
        match process_epoch(&out.series, out.start_ms, end_ms, &self.cfg, &self.reference, &out.statics) {
            Ok((table, completed, features)) => {
                self.reference.add(&completed);
                out.table = table;
                out.completed = Some(completed);
                out.features = Some(features);
            }
            Err(e) => {
                log::warn!("epoch {} could not be reduced to features: {e}", open.id);
                if let Ok(t) = synchronize(&out.series, out.start_ms, end_ms, self.cfg.grid_step_ms) {
                    out.table = t;
                }
                out.error = Some(e.to_string());
            }
        }
        Some(out)
    }

    /// Stored series of the open epoch as if it closed at `now_ms`.
    pub fn partial_series(&self, now_ms: i64) -> Result<(u64, i64, Vec<StoredSeries>)> {
        let open = self.open.as_ref().ok_or(Error::NoOpenEpoch)?;
        let series = self
            .cfg
            .channels
            .iter()
            .map(|c| open.recorders[&c.id].snapshot(now_ms))
            .collect();
        Ok((open.id, open.start_ms, series))
    }

    /// Features of the epoch so far, through the same path as a closed epoch.
    pub fn partial_features(&self, now_ms: i64) -> Result<(u64, FeatureVector)> {
        let (id, start, series) = self.partial_series(now_ms)?;
        let statics = self.open.as_ref().map(|o| o.statics).unwrap_or_default();
        let (_, _, f) = process_epoch(&series, start, now_ms, &self.cfg, &self.reference, &statics)?;
        Ok((id, f))
    }
}
