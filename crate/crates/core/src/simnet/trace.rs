use std::sync::Arc;

use serde::Serialize;

use crate::sig::{digest_of, Message};
use crate::time::Time;
use crate::types::{PartyId, Value};

use super::TimingModel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Start,
    Send { to: Vec<PartyId>, msg: Arc<Message> },
    /// `send` is the index of the matching Send event.
    Deliver {
        from: PartyId,
        msg: Arc<Message>,
        send: usize,
    },
    TimerFire(u64),
    Commit(Value),
    Terminate,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Start => "start",
            EventKind::Send { .. } => "send",
            EventKind::Deliver { .. } => "deliver",
            EventKind::TimerFire(_) => "timer",
            EventKind::Commit(_) => "commit",
            EventKind::Terminate => "terminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub g: Time,
    pub party: PartyId,
    pub l: Time,
    /// Index of the atomic step this event belongs to.
    pub step: usize,
    pub kind: EventKind,
}

/// What triggered an atomic step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepInput {
    Start,
    Deliver,
    Timer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepInfo {
    pub party: PartyId,
    pub input: StepInput,
    /// Index of the step's first event.
    pub first_event: usize,
}

/// Totally ordered log of one run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub n: usize,
    pub broadcaster: PartyId,
    pub honest: Vec<bool>,
    pub offsets: Vec<Time>,
    pub model: TimingModel,
    pub events: Vec<Event>,
    pub steps: Vec<StepInfo>,
}

/// One JSONL record.
#[derive(Serialize)]
struct Line<'a> {
    g_time: Time,
    party: PartyId,
    l_time: Time,
    step: usize,
    kind: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    peer: Option<Vec<PartyId>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<&'a Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tag: Option<u64>,
}

/// Projection of an event that an honest party can observe locally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LocalView<'a> {
    Start,
    Send(&'a [PartyId], &'a Message),
    Deliver(PartyId, &'a Message),
    Timer(u64),
    Commit(&'a Value),
    Terminate,
}

impl Trace {
    pub fn is_honest(&self, p: PartyId) -> bool {
        self.honest.get(p).copied().unwrap_or(false)
    }

    pub fn honest_parties(&self) -> impl Iterator<Item = PartyId> + '_ {
        (0..self.n).filter(|&p| self.honest[p])
    }

    /// `(global time, value)` of each party's first Commit.
    pub fn commits(&self) -> Vec<Option<(Time, Value)>> {
        let mut out = vec![None; self.n];
        for e in &self.events {
            if let EventKind::Commit(v) = &e.kind {
                if out[e.party].is_none() {
                    out[e.party] = Some((e.g, v.clone()));
                }
            }
        }
        out
    }

    /// Every Commit event, including repeats, as `(event index, party, value)`.
    pub fn all_commits(&self) -> Vec<(usize, PartyId, &Value)> {
        self.events
            .iter()
            .enumerate()
            .filter_map(|(i, e)| match &e.kind {
                EventKind::Commit(v) => Some((i, e.party, v)),
                _ => None,
            })
            .collect()
    }

    pub fn honest_commits(&self) -> Vec<(PartyId, Time, Value)> {
        self.commits()
            .into_iter()
            .enumerate()
            .filter(|(p, _)| self.honest[*p])
            .filter_map(|(p, c)| c.map(|(t, v)| (p, t, v)))
            .collect()
    }

    pub fn last_event_time(&self) -> Time {
        self.events.last().map(|e| e.g).unwrap_or(Time::ZERO)
    }

    pub fn step_is_start(&self, step: usize) -> bool {
        self.steps[step].input == StepInput::Start
    }

    /// The local history of `party` restricted to local times before `cutoff`.
    pub fn local_history(&self, party: PartyId, cutoff: Option<Time>) -> Vec<(Time, LocalView<'_>)> {
        self.events
            .iter()
            .filter(|e| e.party == party && cutoff.is_none_or(|c| e.l < c))
            .map(|e| {
                let v = match &e.kind {
                    EventKind::Start => LocalView::Start,
                    EventKind::Send { to, msg } => LocalView::Send(to, msg),
                    EventKind::Deliver { from, msg, .. } => LocalView::Deliver(*from, msg),
                    EventKind::TimerFire(t) => LocalView::Timer(*t),
                    EventKind::Commit(v) => LocalView::Commit(v),
                    EventKind::Terminate => LocalView::Terminate,
                };
                (e.l, v)
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let mut line = Line {
                g_time: e.g,
                party: e.party,
                l_time: e.l,
                step: e.step,
                kind: e.kind.name(),
                digest: None,
                peer: None,
                value: None,
                tag: None,
            };
            match &e.kind {
                EventKind::Send { to, msg } => {
                    line.digest = Some(msg.digest());
                    line.peer = Some(to.clone());
                }
                EventKind::Deliver { from, msg, .. } => {
                    line.digest = Some(msg.digest());
                    line.peer = Some(vec![*from]);
                }
                EventKind::TimerFire(t) => line.tag = Some(*t),
                EventKind::Commit(v) => {
                    line.digest = Some(digest_of(v));
                    line.value = Some(v);
                }
                EventKind::Start | EventKind::Terminate => {}
            }
            out.push_str(&serde_json::to_string(&line).expect("trace lines serialize"));
            out.push('\n');
        }
        out
    }
}

/// Index into `a`'s projected local history where the two histories first
/// differ, or `None` if they agree up to `cutoff`.
pub fn first_divergence(a: &Trace, b: &Trace, party: PartyId, cutoff: Option<Time>) -> Option<usize> {
    let ha = a.local_history(party, cutoff);
    let hb = b.local_history(party, cutoff);
    let common = ha.len().min(hb.len());
    (0..common)
        .find(|&i| ha[i] != hb[i])
        .or((ha.len() != hb.len()).then_some(common))
}

/// Whether `party` observes identical local histories strictly before `cutoff`.
pub fn compare_local_history(a: &Trace, b: &Trace, party: PartyId, cutoff: Option<Time>) -> bool {
    first_divergence(a, b, party, cutoff).is_none()
}
