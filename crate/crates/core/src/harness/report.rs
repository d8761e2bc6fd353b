use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::ConfigError;
use crate::simnet::{assign_async_rounds, EventKind, SimError, TimingModel, Trace};
use crate::time::Time;
use crate::types::{PartyId, Value};

/// A latency target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "unit", content = "value", rename_all = "snake_case")]
pub enum Bound {
    Time(Time),
    Rounds(u32),
}

/// A measured latency in the unit of the run's timing model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "unit", content = "value", rename_all = "snake_case")]
pub enum Measured {
    Time(Time),
    Rounds(Time),
}

impl Measured {
    pub fn within(&self, b: &Bound) -> bool {
        match (self, b) {
            (Measured::Time(x), Bound::Time(y)) => x <= y,
            (Measured::Rounds(x), Bound::Rounds(r)) => *x <= Time::int(*r as i64),
            _ => false,
        }
    }
}

fn show(t: &Time) -> String {
    if t.is_integer() {
        t.numer().to_string()
    } else {
        t.to_string()
    }
}

impl fmt::Display for Measured {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measured::Time(t) => write!(f, "{t}"),
            Measured::Rounds(r) => f.write_str(&show(r)),
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Time(t) => write!(f, "{t}"),
            Bound::Rounds(r) => write!(f, "{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub model: String,
    /// Global time of the last honest first-commit.
    pub last_commit: Time,
    pub measured: Measured,
    pub bound: Bound,
    pub pass: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("incomplete run: honest party {0} never committed before the horizon")]
    Incomplete(PartyId),
    #[error("good-case latency needs an honest broadcaster")]
    ByzantineBroadcaster,
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Good-case latency of `trace`. Partial-synchrony runs are normalized to
/// rounds only when `unit_delays` says every delay was Δ with GST = 0;
/// otherwise the raw time is reported.
pub fn measure_good_case(trace: &Trace, unit_delays: bool, bound: Bound) -> Result<LatencyReport, HarnessError> {
    if !trace.is_honest(trace.broadcaster) {
        return Err(HarnessError::ByzantineBroadcaster);
    }
    let commits = trace.commits();
    let mut last = Time::ZERO;
    for p in trace.honest_parties() {
        match &commits[p] {
            Some((t, _)) => last = last.max(*t),
            None => return Err(HarnessError::Incomplete(p)),
        }
    }
    let elapsed = last - trace.offsets[trace.broadcaster];
    let measured = match trace.model {
        TimingModel::Synchrony { .. } => Measured::Time(elapsed),
        TimingModel::PartialSynchrony { big_delta, gst } => {
            if unit_delays && gst.is_zero() {
                Measured::Rounds(elapsed.ratio(big_delta))
            } else {
                Measured::Time(elapsed)
            }
        }
        TimingModel::Asynchrony => {
            let rounds = assign_async_rounds(trace);
            let max = trace
                .events
                .iter()
                .enumerate()
                .filter(|(_, e)| trace.is_honest(e.party) && matches!(e.kind, EventKind::Commit(_)))
                .map(|(i, _)| rounds.event_round[i])
                .max()
                .unwrap_or(0);
            Measured::Rounds(Time::int(max as i64))
        }
    };
    Ok(LatencyReport {
        model: trace.model.name().to_string(),
        last_commit: last,
        pass: measured.within(&bound),
        measured,
        bound,
    })
}

/// Safety and liveness of a run in which some parties may be corrupt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SafetyReport {
    pub model: String,
    /// Every honest Commit carries the same value.
    pub agreement: bool,
    /// With an honest broadcaster, every honest Commit carries its input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validity: Option<bool>,
    /// Every honest party committed; under `totality_only`, either all or none did.
    pub terminated: bool,
    /// First commit value per honest party.
    pub commits: Vec<(PartyId, Option<Value>)>,
    /// Some honest party committed ⊥ after BA found no proposal.
    pub bot_commit: bool,
    pub pass: bool,
}

pub fn check_safety(trace: &Trace, input: &Value, totality_only: bool) -> SafetyReport {
    let honest: Vec<PartyId> = trace.honest_parties().collect();
    let all: Vec<&Value> = trace
        .all_commits()
        .into_iter()
        .filter(|(_, p, _)| trace.is_honest(*p))
        .map(|(_, _, v)| v)
        .collect();
    let agreement = all.windows(2).all(|w| w[0] == w[1]);
    let validity = trace
        .is_honest(trace.broadcaster)
        .then(|| all.iter().all(|v| *v == input));
    let first = trace.commits();
    let done = honest.iter().filter(|&&p| first[p].is_some()).count();
    let terminated = done == honest.len() || (totality_only && done == 0);
    SafetyReport {
        model: trace.model.name().to_string(),
        agreement,
        validity,
        terminated,
        commits: honest.iter().map(|&p| (p, first[p].as_ref().map(|(_, v)| v.clone()))).collect(),
        bot_commit: all.iter().any(|v| v.is_bot()),
        pass: agreement && validity.unwrap_or(true) && terminated,
    }
}
