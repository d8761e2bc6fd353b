use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::protocol::ProtocolId;
use crate::scenarios::generic::AdversaryId;
use crate::time::Time;
use crate::types::{ResilienceError, Value};

/// How honest links pick delays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// Every message takes δ (sync), Δ (psync) or 1 (async).
    #[default]
    Uniform,
    /// Seeded random delays within the model's bounds.
    Seeded { seed: u64 },
    /// Asynchrony: start-step messages take [1, 10], all others [10, 30].
    Layered { seed: u64 },
}

/// One simulated world, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: ProtocolId,
    pub n: usize,
    pub f: usize,
    /// Actual synchrony delay δ; defaults to Δ.
    #[serde(default)]
    pub delta: Option<Time>,
    #[serde(default = "default_big_delta")]
    pub big_delta: Time,
    /// Declared skew bound σ; defaults to `skew`.
    #[serde(default)]
    pub sigma: Option<Time>,
    /// Actual start-time spread: odd-indexed parties start this late.
    #[serde(default)]
    pub skew: Time,
    #[serde(default)]
    pub gst: Time,
    #[serde(default = "yes")]
    pub broadcaster_honest: bool,
    #[serde(default)]
    pub adversary: Option<AdversaryId>,
    /// Run a named scenario instead of a single world.
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default)]
    pub horizon: Option<Time>,
    #[serde(default = "default_input")]
    pub input: Value,
    #[serde(default)]
    pub override_resilience: bool,
    #[serde(default)]
    pub trace_out: Option<PathBuf>,
    #[serde(default)]
    pub report_out: Option<PathBuf>,
}

fn default_big_delta() -> Time {
    Time::int(10)
}

fn default_m() -> u32 {
    5
}

fn default_input() -> Value {
    Value::num(7)
}

fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn new(protocol: ProtocolId, n: usize, f: usize) -> Self {
        RunConfig {
            protocol,
            n,
            f,
            delta: None,
            big_delta: default_big_delta(),
            sigma: None,
            skew: Time::ZERO,
            gst: Time::ZERO,
            broadcaster_honest: true,
            adversary: None,
            scenario: None,
            schedule: Schedule::Uniform,
            m: default_m(),
            horizon: None,
            input: default_input(),
            override_resilience: false,
            trace_out: None,
            report_out: None,
        }
    }

    pub fn with_delta(mut self, d: Time) -> Self {
        self.delta = Some(d);
        self
    }

    pub fn with_skew(mut self, s: Time) -> Self {
        self.skew = s;
        self
    }

    pub fn with_schedule(mut self, s: Schedule) -> Self {
        self.schedule = s;
        self
    }

    pub fn with_adversary(mut self, a: AdversaryId) -> Self {
        self.adversary = Some(a);
        self
    }

    pub fn with_m(mut self, m: u32) -> Self {
        self.m = m;
        self
    }

    pub fn with_gst(mut self, g: Time) -> Self {
        self.gst = g;
        self
    }

    pub fn overridden(mut self) -> Self {
        self.override_resilience = true;
        self
    }

    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error(transparent)]
    Resilience(#[from] ResilienceError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_json() {
        let c = RunConfig::from_json(r#"{"protocol":"bb-1p5","n":5,"f":2,"delta":"2/1","skew":"1"}"#).unwrap();
        assert_eq!(c.protocol, ProtocolId::Bb15);
        assert_eq!(c.delta, Some(Time::int(2)));
        assert_eq!(c.skew, Time::int(1));
        assert_eq!(c.big_delta, Time::int(10));
        assert_eq!(c.schedule, Schedule::Uniform);
    }

    #[test]
    fn rejects_unknown_fields() {
        let e = RunConfig::from_json(r#"{"protocol":"brb","n":4,"f":1,"colour":"red"}"#).unwrap_err();
        assert!(e.to_string().contains("colour"));
    }

    #[test]
    fn round_trips() {
        let c = RunConfig::new(ProtocolId::PsyncVbb, 9, 2).with_schedule(Schedule::Seeded { seed: 3 });
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&s).unwrap(), c);
    }
}
