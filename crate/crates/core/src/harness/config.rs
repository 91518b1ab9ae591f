use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adversary::AdversaryKind;
use crate::error::{Error, Result};

/// A tunable parameter: either derived from the run (`"auto"`) or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ParamSpec {
    #[default]
    Auto,
    Value(f64),
}

impl ParamSpec {
    pub fn resolve(self, auto: impl FnOnce() -> f64) -> f64 {
        match self {
            ParamSpec::Auto => auto(),
            ParamSpec::Value(v) => v,
        }
    }
}

impl fmt::Display for ParamSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamSpec::Auto => f.write_str("auto"),
            ParamSpec::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for ParamSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "auto" {
            return Ok(ParamSpec::Auto);
        }
        s.trim()
            .parse()
            .map(ParamSpec::Value)
            .map_err(|_| Error::InvalidInput(format!("expected \"auto\" or a number, got {s:?}")))
    }
}

impl Serialize for ParamSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ParamSpec::Auto => serializer.serialize_str("auto"),
            ParamSpec::Value(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for ParamSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(ParamSpec::Value(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Either a replicate count (seeds `0..n`) or explicit seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::Count(n) => (0..*n).collect(),
            SeedSpec::List(v) => v.clone(),
        }
    }
}

impl FromStr for SeedSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let parse = |p: &str| {
            p.parse::<u64>()
                .map_err(|_| Error::InvalidInput(format!("invalid seed {p:?}")))
        };
        if parts.len() == 1 {
            Ok(SeedSpec::Count(parse(parts[0])?))
        } else {
            parts
                .into_iter()
                .map(parse)
                .collect::<Result<_>>()
                .map(SeedSpec::List)
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Catalog name or path to a game document.
    pub game: String,
    pub adversary: AdversaryKind,
    pub horizons: Vec<usize>,
    pub seeds: SeedSpec,
    #[serde(default)]
    pub eta: ParamSpec,
    #[serde(default)]
    pub gamma: ParamSpec,
    /// Rounds at which curve rows are written; defaults to about a thousand
    /// evenly spaced rounds plus the last one.
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(Error::InvalidInput(
                "at least one horizon is required".into(),
            ));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "horizons must be strictly ascending, got {:?}",
                self.horizons
            )));
        }
        let mut seeds = self.seeds.seeds();
        if seeds.is_empty() {
            return Err(Error::InvalidInput("at least one seed is required".into()));
        }
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("seeds must be distinct".into()));
        }
        if let ParamSpec::Value(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "eta must be positive, got {eta}"
                )));
            }
        }
        if let ParamSpec::Value(gamma) = self.gamma {
            if !(0.0..0.5).contains(&gamma) {
                return Err(Error::InvalidInput(format!(
                    "gamma must lie in [0, 1/2), got {gamma}"
                )));
            }
        }
        Ok(())
    }
}
