//! Run configuration files and duration parsing.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::sim::{Engine, Scenario};

/// Whole seconds, written with an optional unit suffix: `90`, `90s`, `15m`, `1h`, `30d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Seconds(pub u64);

impl Seconds {
    pub fn days(d: u64) -> Self {
        Seconds(d * 86_400)
    }
}

impl FromStr for Seconds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (num, unit) = match s.find(|c: char| !(c.is_ascii_digit() || c == '.')) {
            Some(i) => s.split_at(i),
            None => (s, "s"),
        };
        let mult = match unit {
            "s" => 1.0,
            "m" => 60.0,
            "h" => 3600.0,
            "d" => 86_400.0,
            _ => {
                return Err(format!(
                    "invalid duration {s:?}: unit must be one of s, m, h, d"
                ))
            }
        };
        let v: f64 = num.parse().map_err(|_| {
            format!("invalid duration {s:?}: expected a number with an optional unit")
        })?;
        let secs = v * mult;
        if !(secs.is_finite() && secs >= 0.0) || secs.fract() != 0.0 {
            return Err(format!(
                "invalid duration {s:?}: must be a whole number of seconds"
            ));
        }
        Ok(Seconds(secs as u64))
    }
}

impl fmt::Display for Seconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

impl Serialize for Seconds {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(self.0)
    }
}

impl<'de> Deserialize<'de> for Seconds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(n) => Ok(Seconds(n)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSection {
    pub availability: Option<f64>,
    pub mean_down: Option<Seconds>,
    pub theta: Option<Seconds>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub initial_posts: Option<u64>,
    pub creations_per_day: Option<u64>,
    pub deletions_per_day: Option<u64>,
    pub horizon_days: Option<u64>,
    pub thresholds: Option<Vec<Seconds>>,
    pub scenario: Option<Scenario>,
    pub scale_factor: Option<f64>,
    pub engine: Option<Engine>,
    pub theta_star_for_tuning: Option<Seconds>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySection {
    pub trace: Option<PathBuf>,
    pub synthetic_posts: Option<usize>,
    pub interactions_per_post: Option<f64>,
    pub decay_mean: Option<Seconds>,
    pub availabilities: Option<Vec<f64>>,
    pub thresholds: Option<Vec<Seconds>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreSection {
    pub port: Option<u16>,
    pub data_dir: Option<PathBuf>,
    pub update_period: Option<Seconds>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub tuning: TuningSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub utility: UtilitySection,
    #[serde(default)]
    pub store: StoreSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
