//! Channel identities, roles and the booth's standard channel set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROBOT_STATUS: &str = "robot_status";
pub const ENV_AIR_PRESSURE: &str = "env_air_pressure";
pub const ENV_HUMIDITY: &str = "env_humidity";
pub const ENV_TEMPERATURE: &str = "env_temperature";
pub const COOLING_TEMPERATURE: &str = "cooling_temperature";
pub const COOLING_FLOW: &str = "cooling_flow";
pub const FUEL_FLOW: &str = "fuel_flow";
pub const OXYGEN_FLOW: &str = "oxygen_flow";
pub const SHROUD_FLOW: &str = "shroud_flow";
pub const FUEL_INLET_PRESSURE: &str = "fuel_inlet_pressure";
pub const FUEL_OUTLET_PRESSURE: &str = "fuel_outlet_pressure";
pub const OXYGEN_INLET_PRESSURE: &str = "oxygen_inlet_pressure";
pub const OXYGEN_OUTLET_PRESSURE: &str = "oxygen_outlet_pressure";
pub const SHROUD_INLET_PRESSURE: &str = "shroud_inlet_pressure";
pub const SHROUD_OUTLET_PRESSURE: &str = "shroud_outlet_pressure";
pub const PROPANE_TEMPERATURE: &str = "propane_temperature";
pub const AIRJET_FLOW: &str = "airjet_flow";
pub const PYRO_TEMPERATURE: &str = "pyro_temperature";
pub const LATHE_SPEED: &str = "lathe_speed";

/// `robot_status` values.
/// Job-parameter channels. An event on one of these sets the static
/// parameter for the next epoch to open; they are never stored as series.
pub const JOB_STAND_OFF_DISTANCE: &str = "job_stand_off_distance";
pub const JOB_COATING_VELOCITY: &str = "job_coating_velocity";
pub const JOB_POWDER_FEED_RATE: &str = "job_powder_feed_rate";

pub const STATUS_IDLE: f64 = 0.0;
pub const STATUS_COATING: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRole {
    GasFlow,
    Pressure,
    Temperature,
    RobotStatus,
    Rate,
    Environment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub id: String,
    pub unit: String,
    pub target_value: f64,
    #[serde(default = "default_deadband_pct")]
    pub deadband_pct: f64,
    pub role: ChannelRole,
}

fn default_deadband_pct() -> f64 {
    1.0
}

impl ChannelConfig {
    pub fn new(id: &str, unit: &str, target_value: f64, role: ChannelRole) -> Self {
        ChannelConfig {
            id: id.into(),
            unit: unit.into(),
            target_value,
            deadband_pct: default_deadband_pct(),
            role,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.deadband_pct > 0.0) || !self.deadband_pct.is_finite() {
            return Err(Error::Config(format!(
                "{}: deadband_pct must be positive, got {}",
                self.id, self.deadband_pct
            )));
        }
        if !self.target_value.is_finite() {
            return Err(Error::Config(format!("{}: target_value must be finite", self.id)));
        }
        Ok(())
    }

    /// Absolute change needed before a new value is stored.
    pub fn deadband(&self) -> f64 {
        self.deadband_pct / 100.0 * self.target_value.abs()
    }
}

/// Sensor channels of the reference booth with nominal set points.
/// `robot_status` is not included; it drives sampling rather than being stored.
pub fn standard_channels() -> Vec<ChannelConfig> {
    use ChannelRole::*;
    vec![
        ChannelConfig::new(ENV_AIR_PRESSURE, "hPa", 1013.0, Environment),
        ChannelConfig::new(ENV_HUMIDITY, "%", 45.0, Environment),
        ChannelConfig::new(ENV_TEMPERATURE, "degC", 22.0, Environment),
        ChannelConfig::new(COOLING_TEMPERATURE, "degC", 18.0, Temperature),
        ChannelConfig::new(COOLING_FLOW, "l/min", 60.0, GasFlow),
        ChannelConfig::new(FUEL_FLOW, "l/min", 60.0, GasFlow),
        ChannelConfig::new(OXYGEN_FLOW, "l/min", 288.0, GasFlow),
        ChannelConfig::new(SHROUD_FLOW, "l/min", 450.0, GasFlow),
        ChannelConfig::new(FUEL_INLET_PRESSURE, "bar", 7.0, Pressure),
        ChannelConfig::new(FUEL_OUTLET_PRESSURE, "bar", 5.5, Pressure),
        ChannelConfig::new(OXYGEN_INLET_PRESSURE, "bar", 10.0, Pressure),
        ChannelConfig::new(OXYGEN_OUTLET_PRESSURE, "bar", 8.0, Pressure),
        ChannelConfig::new(SHROUD_INLET_PRESSURE, "bar", 6.0, Pressure),
        ChannelConfig::new(SHROUD_OUTLET_PRESSURE, "bar", 4.5, Pressure),
        ChannelConfig::new(PROPANE_TEMPERATURE, "degC", 25.0, Temperature),
        ChannelConfig::new(AIRJET_FLOW, "m3/h", 120.0, GasFlow),
        ChannelConfig::new(PYRO_TEMPERATURE, "degC", 150.0, Temperature),
        ChannelConfig::new(LATHE_SPEED, "rpm", 80.0, Rate),
    ]
}
