use std::collections::BTreeMap;

use serde::Serialize;

use super::{Cutoff, Expectation, ScenarioError, ScenarioSpec};
use crate::simnet::{assign_async_rounds, first_divergence, EventKind, Trace};
use crate::time::Time;
use crate::types::PartyId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub execution: String,
    pub expectation: String,
    pub pass: bool,
    /// Event index (in this execution's trace) witnessing the outcome.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerdictReport {
    pub scenario: String,
    pub protocol: String,
    pub n: usize,
    pub f: usize,
    pub verdicts: Vec<Verdict>,
}

impl VerdictReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn passed(&self) -> usize {
        self.verdicts.iter().filter(|v| v.pass).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdicts serialize")
    }
}

/// Honest first commits that disagree with the earliest one, as event indices.
fn disagreement(t: &Trace) -> Option<(usize, usize)> {
    let mut first: Option<(usize, &crate::types::Value)> = None;
    for (i, p, v) in t.all_commits() {
        if !t.is_honest(p) {
            continue;
        }
        match first {
            None => first = Some((i, v)),
            Some((j, w)) if w != v => return Some((j, i)),
            _ => {}
        }
    }
    None
}

fn commit_event(t: &Trace, p: PartyId) -> Option<(usize, Time, &crate::types::Value)> {
    t.events.iter().enumerate().find_map(|(i, e)| match &e.kind {
        EventKind::Commit(v) if e.party == p => Some((i, e.g, v)),
        _ => None,
    })
}

/// Local time of the first delivery to `party` of a message of round ≥ `r`.
fn round_cutoff(t: &Trace, party: PartyId, r: u32) -> Option<Time> {
    let rounds = assign_async_rounds(t);
    t.events.iter().find_map(|e| match e.kind {
        EventKind::Deliver { send, .. } if e.party == party && rounds.message_round(send) >= r => Some(e.l),
        _ => None,
    })
}

fn verdict(exec: &str, x: &Expectation, pass: bool, event: Option<usize>, detail: String) -> Verdict {
    Verdict {
        execution: exec.to_string(),
        expectation: x.to_string(),
        pass,
        event,
        detail,
    }
}

fn check_one(exec: &str, x: &Expectation, t: &Trace, traces: &BTreeMap<String, Trace>) -> Result<Verdict, ScenarioError> {
    Ok(match x {
        Expectation::AgreementHolds => match disagreement(t) {
            None => verdict(exec, x, true, None, "honest commits agree".into()),
            Some((a, b)) => verdict(exec, x, false, Some(b), format!("commits at events {a} and {b} differ")),
        },
        Expectation::AgreementViolated => match disagreement(t) {
            Some((a, b)) => verdict(exec, x, true, Some(b), format!("commits at events {a} and {b} differ")),
            None => verdict(exec, x, false, None, "honest commits agree".into()),
        },
        Expectation::CommitsValue { parties, value } => {
            for &p in parties {
                match commit_event(t, p) {
                    Some((_, _, v)) if v == value => {}
                    Some((i, _, v)) => {
                        return Ok(verdict(exec, x, false, Some(i), format!("party {p} committed {v}")));
                    }
                    None => return Ok(verdict(exec, x, false, None, format!("party {p} never committed"))),
                }
            }
            verdict(exec, x, true, None, format!("all committed {value}"))
        }
        Expectation::CommitsByTime { parties, by } => {
            let mut last = Time::ZERO;
            for &p in parties {
                match commit_event(t, p) {
                    Some((_, g, _)) if g <= *by => last = last.max(g),
                    Some((i, g, _)) => {
                        return Ok(verdict(exec, x, false, Some(i), format!("party {p} committed at {g}")));
                    }
                    None => return Ok(verdict(exec, x, false, None, format!("party {p} never committed"))),
                }
            }
            verdict(exec, x, true, None, format!("last commit at {last}"))
        }
        Expectation::NoCommitBefore { parties, before } => {
            for &p in parties {
                if let Some((i, g, _)) = commit_event(t, p) {
                    if g < *before {
                        return Ok(verdict(exec, x, false, Some(i), format!("party {p} committed at {g}")));
                    }
                }
            }
            verdict(exec, x, true, None, "no early commit".into())
        }
        Expectation::LocalHistoryEqual { other, party, cutoff } => {
            let o = traces.get(other).ok_or_else(|| ScenarioError::MissingTrace(other.clone()))?;
            let c = match cutoff {
                Cutoff::At(c) => Some(*c),
                Cutoff::Unbounded => None,
                Cutoff::BeforeRound(r) => round_cutoff(o, *party, *r),
            };
            let shown = c.map_or("unbounded".to_string(), |c| format!("local time < {c}"));
            match first_divergence(t, o, *party, c) {
                None => verdict(exec, x, true, None, format!("identical up to {shown}")),
                Some(k) => {
                    let ev = t
                        .events
                        .iter()
                        .enumerate()
                        .filter(|(_, e)| e.party == *party)
                        .nth(k)
                        .map(|(i, _)| i);
                    verdict(exec, x, false, ev, format!("histories differ at local event {k} ({shown})"))
                }
            }
        }
    })
}

/// Decide every expectation of `spec` against its execution traces.
pub fn check_expectations(spec: &ScenarioSpec, traces: &BTreeMap<String, Trace>) -> Result<VerdictReport, ScenarioError> {
    let mut verdicts = Vec::new();
    for (exec, x) in &spec.expectations {
        let t = traces.get(exec).ok_or_else(|| ScenarioError::MissingTrace(exec.clone()))?;
        verdicts.push(check_one(exec, x, t, traces)?);
    }
    Ok(VerdictReport {
        scenario: spec.name.clone(),
        protocol: spec.protocol.name().to_string(),
        n: spec.n,
        f: spec.f,
        verdicts,
    })
}
