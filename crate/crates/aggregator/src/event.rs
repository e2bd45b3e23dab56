//! Sensor events and their newline-delimited JSON wire form.
//!
//! One event per line, no trailing whitespace:
//!
//! ```text
//! {"channel":"fuel_flow","t_ms":1200,"value":41.25,"quality":"good"}
//! {"channel":"oxygen_flow","t_ms":1200,"value":null,"quality":"missing"}
//! ```
//!
//! `value` is `null` exactly when `quality` is `"missing"`. Timestamps are
//! integer milliseconds on the source clock.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Good,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorEvent {
    pub channel: String,
    pub t_ms: i64,
    pub value: Option<f64>,
    pub quality: Quality,
}

impl SensorEvent {
    pub fn good(channel: impl Into<String>, t_ms: i64, value: f64) -> Self {
        SensorEvent {
            channel: channel.into(),
            t_ms,
            value: Some(value),
            quality: Quality::Good,
        }
    }

    pub fn missing(channel: impl Into<String>, t_ms: i64) -> Self {
        SensorEvent {
            channel: channel.into(),
            t_ms,
            value: None,
            quality: Quality::Missing,
        }
    }

    /// The reading, if the event carries a usable one.
    pub fn reading(&self) -> Option<f64> {
        match (self.quality, self.value) {
            (Quality::Good, Some(v)) if v.is_finite() => Some(v),
            _ => None,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self> {
        let ev: SensorEvent = serde_json::from_str(line).map_err(|e| Error::Wire {
            line: line_no,
            msg: e.to_string(),
        })?;
        match (ev.quality, ev.value) {
            (Quality::Good, Some(v)) if v.is_finite() => Ok(ev),
            (Quality::Good, _) => Err(Error::Wire {
                line: line_no,
                msg: "good event needs a finite value".into(),
            }),
            (Quality::Missing, None) => Ok(ev),
            (Quality::Missing, Some(_)) => Err(Error::Wire {
                line: line_no,
                msg: "missing event must carry a null value".into(),
            }),
        }
    }
}

pub fn write_events<'a, W: Write>(mut out: W, events: impl IntoIterator<Item = &'a SensorEvent>) -> Result<()> {
    for ev in events {
        out.write_all(ev.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a whole log; blank lines are skipped, line numbers are 1-based.
pub fn read_events<R: BufRead>(input: R) -> Result<Vec<SensorEvent>> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(SensorEvent::parse_line(&line, i + 1)?);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_form_is_exact() {
        assert_eq!(
            SensorEvent::good("fuel_flow", 1200, 41.25).to_line(),
            r#"{"channel":"fuel_flow","t_ms":1200,"value":41.25,"quality":"good"}"#
        );
        assert_eq!(
            SensorEvent::missing("oxygen_flow", 1200).to_line(),
            r#"{"channel":"oxygen_flow","t_ms":1200,"value":null,"quality":"missing"}"#
        );
    }

    #[test]
    fn round_trip_and_validation() {
        let evs = vec![SensorEvent::good("a", 0, 1.0), SensorEvent::missing("b", 5), SensorEvent::good("a", 7, -0.125)];
        let mut buf = Vec::new();
        write_events(&mut buf, &evs).unwrap();
        assert_eq!(read_events(buf.as_slice()).unwrap(), evs);
        let bad = "{\"channel\":\"a\",\"t_ms\":0,\"value\":null,\"quality\":\"good\"}\n";
        assert!(matches!(read_events(bad.as_bytes()), Err(Error::Wire { line: 1, .. })));
        let bad = "\n{\"channel\":\"a\",\"t_ms\":0,\"value\":2,\"quality\":\"missing\"}";
        assert!(matches!(read_events(bad.as_bytes()), Err(Error::Wire { line: 2, .. })));
        assert!(read_events("{not json".as_bytes()).is_err());
    }
}
