//! Coarse-to-fine sampling schedule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::OptimizeError;

/// How the SRDF kernel width follows the sampling offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaDRule {
    /// `sigma_d = (offset / k)^2`.
    OffsetFraction(f64),
    /// Constant `sigma_d`.
    Fixed(f64),
}

impl Default for SigmaDRule {
    fn default() -> Self {
        SigmaDRule::OffsetFraction(3.0)
    }
}

impl SigmaDRule {
    pub fn sigma_d(&self, offset: f64) -> f64 {
        match *self {
            SigmaDRule::OffsetFraction(k) => (offset / k).powi(2),
            SigmaDRule::Fixed(v) => v,
        }
    }

    fn validate(&self) -> Result<(), String> {
        match *self {
            SigmaDRule::OffsetFraction(k) if k > 0.0 && k.is_finite() => Ok(()),
            SigmaDRule::Fixed(v) if v > 0.0 && v.is_finite() => Ok(()),
            _ => Err(format!("sigma_d rule '{self}' must use a positive finite value")),
        }
    }
}

impl fmt::Display for SigmaDRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaDRule::OffsetFraction(k) => write!(f, "offset/{k}"),
            SigmaDRule::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

impl FromStr for SigmaDRule {
    type Err = String;

    /// Accepts `offset/<k>` and `fixed:<value>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("invalid sigma_d rule '{s}'"))
        };
        if let Some(k) = s.strip_prefix("offset/") {
            Ok(SigmaDRule::OffsetFraction(parse(k)?))
        } else if let Some(v) = s.strip_prefix("fixed:") {
            Ok(SigmaDRule::Fixed(parse(v)?))
        } else {
            Err(format!(
                "invalid sigma_d rule '{s}', expected 'offset/<k>' or 'fixed:<value>'"
            ))
        }
    }
}

impl Serialize for SigmaDRule {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SigmaDRule {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-stage sampling interval and density.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSchedule {
    /// Half-width of the first stage's sampling interval (world units).
    pub offset_init: f64,
    /// Factor applied to the offset at each new stage.
    pub offset_decay: f64,
    pub stages: usize,
    pub epochs_per_stage: usize,
    /// Samples per ray; odd so the current depth is itself a sample.
    pub samples_per_ray: usize,
    pub sigma_d_rule: SigmaDRule,
}

impl SamplingSchedule {
    /// Four stages halving the offset, nine samples per ray, 40 epochs each.
    pub fn with_offset(offset_init: f64) -> Self {
        Self {
            offset_init,
            offset_decay: 0.5,
            stages: 4,
            epochs_per_stage: 40,
            samples_per_ray: 9,
            sigma_d_rule: SigmaDRule::default(),
        }
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: String| Err(OptimizeError::InvalidSchedule(m));
        if !(self.offset_init > 0.0 && self.offset_init.is_finite()) {
            return bad(format!("offset_init must be > 0, got {}", self.offset_init));
        }
        if !(self.offset_decay > 0.0 && self.offset_decay < 1.0) {
            return bad(format!(
                "offset_decay must be in (0,1), got {}",
                self.offset_decay
            ));
        }
        if self.stages == 0 {
            return bad("stages must be >= 1".into());
        }
        if self.samples_per_ray < 3 || self.samples_per_ray % 2 == 0 {
            return bad(format!(
                "samples_per_ray must be odd and >= 3, got {}",
                self.samples_per_ray
            ));
        }
        self.sigma_d_rule
            .validate()
            .map_err(OptimizeError::InvalidSchedule)
    }

    pub fn offset(&self, stage: usize) -> f64 {
        self.offset_init * self.offset_decay.powi(stage as i32)
    }

    pub fn final_offset(&self) -> f64 {
        self.offset(self.stages - 1)
    }

    pub fn sigma_d(&self, stage: usize) -> f64 {
        self.sigma_d_rule.sigma_d(self.offset(stage))
    }

    /// Distance between neighboring samples of a ray at `stage`.
    pub fn sample_spacing(&self, stage: usize) -> f64 {
        2.0 * self.offset(stage) / (self.samples_per_ray - 1) as f64
    }
}
