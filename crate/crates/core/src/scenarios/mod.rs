//! Scripted worlds: the lower-bound executions, generic adversaries and the
//! checkers that decide their expectations.

mod check;
pub mod generic;
mod lb;
pub mod lemmas;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::protocol::ProtocolId;
use crate::simnet::{Trace, World};
use crate::time::Time;
use crate::types::{PartyId, Value};

pub use check::{check_expectations, Verdict, VerdictReport};
pub use table::{DelayRule, DelayTable, Rule, Sel, When};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScenarioName {
    LbAsync,
    LbPsync,
    LbSyncDPlusD,
    LbSync1p5,
    LbDishonest,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::LbAsync,
        ScenarioName::LbPsync,
        ScenarioName::LbSyncDPlusD,
        ScenarioName::LbSync1p5,
        ScenarioName::LbDishonest,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioName::LbAsync => "LB-ASYNC",
            ScenarioName::LbPsync => "LB-PSYNC",
            ScenarioName::LbSyncDPlusD => "LB-SYNC-DPLUSD",
            ScenarioName::LbSync1p5 => "LB-SYNC-1P5",
            ScenarioName::LbDishonest => "LB-DISHONEST",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioName {
    type Err = ScenarioError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioName::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ScenarioError::Config(format!("unknown scenario {s:?}")))
    }
}

/// Knobs for [`build_scenario`]; `None` picks the construction's default.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScenarioParams {
    pub n: Option<usize>,
    pub f: Option<usize>,
    pub protocol: Option<ProtocolId>,
    pub override_resilience: bool,
    pub delta: Option<Time>,
    pub big_delta: Option<Time>,
    pub m: Option<u32>,
}

impl ScenarioParams {
    pub fn with_f(mut self, f: usize) -> Self {
        self.f = Some(f);
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_protocol(mut self, p: ProtocolId) -> Self {
        self.protocol = Some(p);
        self
    }

    pub fn overridden(mut self) -> Self {
        self.override_resilience = true;
        self
    }
}

/// Local-time bound for a history comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Cutoff {
    /// Strictly before this local time.
    At(Time),
    /// The whole run.
    Unbounded,
    /// Strictly before the first delivery to the party of a message of this
    /// asynchronous round or later, located in the reference execution.
    BeforeRound(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expectation {
    AgreementHolds,
    CommitsValue { parties: BTreeSet<PartyId>, value: Value },
    CommitsByTime { parties: BTreeSet<PartyId>, by: Time },
    NoCommitBefore { parties: BTreeSet<PartyId>, before: Time },
    LocalHistoryEqual { other: String, party: PartyId, cutoff: Cutoff },
    AgreementViolated,
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set = |s: &BTreeSet<PartyId>| s.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Expectation::AgreementHolds => write!(f, "AgreementHolds"),
            Expectation::CommitsValue { parties, value } => {
                write!(f, "CommitsValue({{{}}}, {value})", set(parties))
            }
            Expectation::CommitsByTime { parties, by } => write!(f, "CommitsByTime({{{}}}, {by})", set(parties)),
            Expectation::NoCommitBefore { parties, before } => {
                write!(f, "NoCommitBefore({{{}}}, {before})", set(parties))
            }
            Expectation::LocalHistoryEqual { other, party, cutoff } => {
                let c = match cutoff {
                    Cutoff::At(t) => format!("< {t}"),
                    Cutoff::Unbounded => "unbounded".into(),
                    Cutoff::BeforeRound(r) => format!("before round {r}"),
                };
                write!(f, "LocalHistoryEqual({other}, {party}, {c})")
            }
            Expectation::AgreementViolated => write!(f, "AgreementViolated"),
        }
    }
}

/// How a Byzantine party behaves in one execution, for the record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScriptNote {
    pub party: PartyId,
    pub behaviour: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExecutionSpec {
    pub id: String,
    pub model: crate::simnet::TimingModel,
    pub start_offsets: Vec<Time>,
    pub broadcaster_input: Value,
    pub byzantine: Vec<ScriptNote>,
    pub delay_table: DelayTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub protocol: ProtocolId,
    pub n: usize,
    pub f: usize,
    pub partition: BTreeMap<String, BTreeSet<PartyId>>,
    pub executions: Vec<ExecutionSpec>,
    /// `(execution id, expectation)`.
    pub expectations: Vec<(String, Expectation)>,
    pub horizon: Time,
}

impl ScenarioSpec {
    pub fn group(&self, g: &str) -> BTreeSet<PartyId> {
        self.partition.get(g).cloned().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario configuration error: {0}")]
    Config(String),
    #[error("execution {0} failed: {1}")]
    Run(String, String),
    #[error("missing trace for execution {0}")]
    MissingTrace(String),
}

/// A scenario after all of its executions ran.
pub struct ScenarioRun {
    pub spec: ScenarioSpec,
    pub traces: BTreeMap<String, Trace>,
}

impl ScenarioRun {
    pub fn verdicts(&self) -> Result<VerdictReport, ScenarioError> {
        check_expectations(&self.spec, &self.traces)
    }
}

/// One world per execution, in construction order. Executions whose Byzantine
/// parties replay earlier executions are built after running those.
pub fn build_scenario(name: ScenarioName, params: &ScenarioParams) -> Result<(ScenarioSpec, Vec<(String, World)>), ScenarioError> {
    lb::build(name, params, false).map(|b| (b.spec, b.worlds))
}

/// Build and run every execution of `name`.
pub fn run_scenario(name: ScenarioName, params: &ScenarioParams) -> Result<ScenarioRun, ScenarioError> {
    let b = lb::build(name, params, true)?;
    Ok(ScenarioRun {
        spec: b.spec,
        traces: b.traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in ScenarioName::ALL {
            assert_eq!(s.name().parse::<ScenarioName>().unwrap(), s);
        }
        assert!("LB-NOPE".parse::<ScenarioName>().is_err());
        assert_eq!("lb-sync-1p5".parse::<ScenarioName>().unwrap(), ScenarioName::LbSync1p5);
    }

    #[test]
    fn every_default_scenario_passes() {
        for s in ScenarioName::ALL {
            let rep = run_scenario(s, &ScenarioParams::default()).unwrap().verdicts().unwrap();
            let failed: Vec<_> = rep.verdicts.iter().filter(|v| !v.pass).map(|v| v.detail.clone()).collect();
            assert!(failed.is_empty(), "{s}: {failed:?}");
            assert!(!rep.verdicts.is_empty());
        }
    }

    #[test]
    fn verdicts_are_deterministic() {
        for s in [ScenarioName::LbAsync, ScenarioName::LbSync1p5] {
            let a = run_scenario(s, &ScenarioParams::default()).unwrap().verdicts().unwrap().to_json();
            let b = run_scenario(s, &ScenarioParams::default()).unwrap().verdicts().unwrap().to_json();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sync_1p5_example_layout() {
        let (spec, worlds) = build_scenario(ScenarioName::LbSync1p5, &ScenarioParams::default()).unwrap();
        assert_eq!((spec.n, spec.f), (5, 2));
        let ids: Vec<&str> = worlds.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["E1", "E2", "E3", "E4"]);
        let e2 = spec.executions.iter().find(|e| e.id == "E2").unwrap();
        let (a, c) = (1, 3);
        assert_eq!(spec.group("A"), BTreeSet::from([a]));
        assert_eq!(spec.group("C"), BTreeSet::from([c]));
        assert_eq!(e2.delay_table.lookup(c, a, false), DelayRule::After(Time::int(8)));
        assert_eq!(e2.delay_table.lookup(a, c, false), DelayRule::After(Time::int(10)));
        assert_eq!(e2.start_offsets[c], Time::int(1));
        assert_eq!(e2.delay_table.lookup(0, 4, false), DelayRule::Drop);
    }

    #[test]
    fn async_overridden_breaks_agreement() {
        let p = ScenarioParams::default().with_n(3).with_f(1).overridden();
        let run = run_scenario(ScenarioName::LbAsync, &p).unwrap();
        let rep = run.verdicts().unwrap();
        assert!(rep.all_pass());
        assert!(run.spec.expectations.iter().any(|(_, x)| *x == Expectation::AgreementViolated));
    }

    #[test]
    fn out_of_region_is_refused_without_override() {
        let p = ScenarioParams::default().with_n(3).with_f(1);
        assert!(matches!(run_scenario(ScenarioName::LbAsync, &p), Err(ScenarioError::Config(_))));
    }
}
