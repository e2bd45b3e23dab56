//! Predicted coating properties and their property groups.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Property group; determines which features a target's model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TargetGroup {
    /// Particle in-flight properties.
    Pip,
    /// Process performance properties.
    Ppp,
    /// Coating quality properties.
    Cqp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityTarget {
    ParticleVelocity,
    ParticleTemperature,
    DepositionRate,
    DepositionEfficiency,
    CoatingThickness,
    CoatingRoughness,
    CoatingHardness,
    CoatingPorosity,
}

impl QualityTarget {
    pub const ALL: [QualityTarget; 8] = [
        QualityTarget::ParticleVelocity,
        QualityTarget::ParticleTemperature,
        QualityTarget::DepositionRate,
        QualityTarget::DepositionEfficiency,
        QualityTarget::CoatingThickness,
        QualityTarget::CoatingRoughness,
        QualityTarget::CoatingHardness,
        QualityTarget::CoatingPorosity,
    ];

    pub fn group(self) -> TargetGroup {
        use QualityTarget::*;
        match self {
            ParticleVelocity | ParticleTemperature => TargetGroup::Pip,
            DepositionRate | DepositionEfficiency => TargetGroup::Ppp,
            CoatingThickness | CoatingRoughness | CoatingHardness | CoatingPorosity => {
                TargetGroup::Cqp
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        use QualityTarget::*;
        match self {
            ParticleVelocity => "particle_velocity",
            ParticleTemperature => "particle_temperature",
            DepositionRate => "deposition_rate",
            DepositionEfficiency => "deposition_efficiency",
            CoatingThickness => "coating_thickness",
            CoatingRoughness => "coating_roughness",
            CoatingHardness => "coating_hardness",
            CoatingPorosity => "coating_porosity",
        }
    }
}

impl fmt::Display for QualityTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QualityTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QualityTarget::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTarget(s.to_string()))
    }
}
