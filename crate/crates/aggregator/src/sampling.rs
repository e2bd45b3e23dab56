//! Status-driven polling: a slow cadence while the robot idles, a fast one
//! while it coats, with epoch markers at both transitions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub idle_interval_ms: i64,
    pub coating_interval_ms: i64,
    /// Status silence longer than this while coating closes the epoch.
    pub watchdog_ms: i64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            idle_interval_ms: 250,
            coating_interval_ms: 100,
            watchdog_ms: 2_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Coating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Status,
    Watchdog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "marker", rename_all = "snake_case")]
pub enum EpochMarker {
    Start { epoch: u64, t_ms: i64 },
    End { epoch: u64, t_ms: i64, reason: EndReason },
}

#[derive(Debug, Clone)]
pub struct SamplingController {
    cfg: SamplingConfig,
    mode: Mode,
    next_epoch: u64,
    last_status_ms: Option<i64>,
}

impl SamplingController {
    pub fn new(cfg: SamplingConfig) -> Self {
        SamplingController {
            cfg,
            mode: Mode::Idle,
            next_epoch: 0,
            last_status_ms: None,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &SamplingConfig {
        &self.cfg
    }

    /// Id of the open epoch, if any.
    pub fn current_epoch(&self) -> Option<u64> {
        (self.mode == Mode::Coating).then(|| self.next_epoch - 1)
    }

    /// Polling interval in the current mode.
    pub fn interval_ms(&self) -> i64 {
        match self.mode {
            Mode::Idle => self.cfg.idle_interval_ms,
            Mode::Coating => self.cfg.coating_interval_ms,
        }
    }

    pub fn observe_status(&mut self, t_ms: i64, coating: bool) -> Option<EpochMarker> {
        self.last_status_ms = Some(t_ms);
        match (self.mode, coating) {
            (Mode::Idle, true) => {
                self.mode = Mode::Coating;
                let epoch = self.next_epoch;
                self.next_epoch += 1;
                Some(EpochMarker::Start { epoch, t_ms })
            }
            (Mode::Coating, false) => {
                self.mode = Mode::Idle;
                Some(EpochMarker::End {
                    epoch: self.next_epoch - 1,
                    t_ms,
                    reason: EndReason::Status,
                })
            }
            _ => None,
        }
    }

    /// Closes an open epoch at `now_ms` when the status channel has been
    /// silent for longer than the watchdog.
    pub fn check_watchdog(&mut self, now_ms: i64) -> Option<EpochMarker> {
        let last = self.last_status_ms?;
        if self.mode == Mode::Coating && now_ms - last > self.cfg.watchdog_ms {
            log::warn!(
                "robot status silent for {} ms; assuming idle",
                now_ms - last
            );
            self.mode = Mode::Idle;
            return Some(EpochMarker::End {
                epoch: self.next_epoch - 1,
                t_ms: now_ms,
                reason: EndReason::Watchdog,
            });
        }
        None
    }
}

/// Poll instants produced by driving a controller with a status function
/// over `[t0, t1)`. Each item is `(t_ms, mode after observing the status)`.
pub fn poll_schedule(
    cfg: SamplingConfig,
    t0: i64,
    t1: i64,
    mut coating_at: impl FnMut(i64) -> bool,
) -> Vec<(i64, Mode, Option<EpochMarker>)> {
    let mut ctl = SamplingController::new(cfg);
    let mut out = Vec::new();
    let mut t = t0;
    while t < t1 {
        let marker = ctl.observe_status(t, coating_at(t));
        out.push((t, ctl.mode(), marker));
        t += ctl.interval_ms();
    }
    out
}
