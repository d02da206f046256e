use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Rows per gradient step: the whole sample or fixed-size shuffled chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchSize {
    #[default]
    Full,
    Rows(usize),
}

impl Serialize for BatchSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Rows(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct BatchVisitor;

        impl Visitor<'_> for BatchVisitor {
            type Value = BatchSize;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive integer or \"full\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<BatchSize, E> {
                if v == 0 {
                    return Err(E::custom("batch_size must be positive"));
                }
                Ok(BatchSize::Rows(v as usize))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<BatchSize, E> {
                if v <= 0 {
                    return Err(E::custom("batch_size must be positive"));
                }
                Ok(BatchSize::Rows(v as usize))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<BatchSize, E> {
                if v.eq_ignore_ascii_case("full") {
                    Ok(BatchSize::Full)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        d.deserialize_any(BatchVisitor)
    }
}

/// Architecture, optimizer and budget for one critic training run.
///
/// Field names double as the JSON config format; missing fields take the
/// defaults below and unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_widths: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub power_iterations: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_widths: vec![100, 100, 100],
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            epochs: 500,
            batch_size: BatchSize::Full,
            power_iterations: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.is_empty() {
            return Err(Error::Config("hidden_widths must be non-empty".into()));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.power_iterations == 0 {
            return Err(Error::Config("power_iterations must be >= 1".into()));
        }
        if self.batch_size == BatchSize::Rows(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }

    /// Parameter count `S` of the architecture on `d`-dimensional inputs
    /// (weights and biases of every layer, output layer included).
    pub fn param_count(&self, d: usize) -> usize {
        let mut fan_in = d;
        let mut total = 0;
        for &w in self.hidden_widths.iter().chain(std::iter::once(&1)) {
            total += w * fan_in + w;
            fan_in = w;
        }
        total
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn digest(&self) -> String {
        digest_json(&[self])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Digest of two configurations, in order.
pub fn digest_pair(a: &TrainConfig, b: &TrainConfig) -> String {
    digest_json(&[a, b])
}

fn digest_json(cfgs: &[&TrainConfig]) -> String {
    let mut hasher = Sha256::new();
    for cfg in cfgs {
        // Serializing a plain struct of numbers and strings cannot fail.
        let text = serde_json::to_string(cfg).unwrap_or_default();
        hasher.update(text.as_bytes());
    }
    hex::encode(hasher.finalize())
}
