//! Two-round Byzantine reliable broadcast for n ≥ 3f+1 under asynchrony.
//!
//! The broadcaster proposes, every party votes for the first proposal it
//! receives, and a party holding n−f votes for one value forwards them,
//! commits and terminates.

use std::collections::{BTreeMap, BTreeSet};

use crate::sig::{sign, Body, Message, Signed};
use crate::simnet::{Action, Input, Party};
use crate::time::Time;
use crate::types::{PartyId, ThresholdSet, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BrbRole {
    Broadcaster(Value),
    Follower,
}

#[derive(Debug, Clone)]
pub struct BrbState {
    pub me: PartyId,
    pub broadcaster: PartyId,
    pub role: BrbRole,
    pub voted: Option<Value>,
    /// Votes per value, keyed by signer.
    pub vote_tally: BTreeMap<Value, BTreeMap<PartyId, Signed>>,
    pub committed: Option<Value>,
    pub terminated: bool,
}

impl BrbState {
    pub fn new(me: PartyId, broadcaster: PartyId, input: Option<Value>) -> Self {
        let role = match input {
            Some(v) if me == broadcaster => BrbRole::Broadcaster(v),
            _ => BrbRole::Follower,
        };
        BrbState {
            me,
            broadcaster,
            role,
            voted: None,
            vote_tally: BTreeMap::new(),
            committed: None,
            terminated: false,
        }
    }
}

pub enum BrbEvent<'a> {
    Start,
    Deliver { from: PartyId, msg: &'a Message },
}

/// Advance `state` by one event. Malformed items are ignored.
pub fn brb_step(state: &mut BrbState, event: BrbEvent<'_>, t: &ThresholdSet) -> Vec<Action> {
    let mut out = Vec::new();
    if state.terminated {
        return out;
    }
    match event {
        BrbEvent::Start => {
            if let BrbRole::Broadcaster(v) = &state.role {
                let p = sign(state.me, Body::Propose(v.clone()));
                out.push(Action::multicast(t.n, Message::one(p)));
            }
        }
        BrbEvent::Deliver { from, msg } => {
            for item in msg.items() {
                on_item(state, from, item, t, &mut out);
                if state.terminated {
                    break;
                }
            }
        }
    }
    out
}

fn on_item(state: &mut BrbState, from: PartyId, item: &Signed, t: &ThresholdSet, out: &mut Vec<Action>) {
    match &item.body {
        Body::Propose(v) => {
            let direct = from == state.broadcaster && item.chain == [state.broadcaster];
            if direct && !v.is_bot() && state.voted.is_none() {
                state.voted = Some(v.clone());
                let vote = sign(state.me, Body::Vote(v.clone()));
                out.push(Action::multicast(t.n, Message::one(vote)));
            }
        }
        Body::Vote(v) => {
            let [j] = item.chain[..] else { return };
            if v.is_bot() || j >= t.n {
                return;
            }
            let votes = state.vote_tally.entry(v.clone()).or_default();
            votes.entry(j).or_insert_with(|| item.clone());
            if votes.len() >= t.q_nf {
                let bundle: Vec<Signed> = votes.values().take(t.q_nf).cloned().collect();
                let others: Vec<PartyId> = (0..t.n).filter(|&p| p != state.me).collect();
                out.push(Action::Send {
                    to: others,
                    msg: Message(bundle),
                });
                out.push(Action::Commit(v.clone()));
                out.push(Action::Terminate);
                state.committed = Some(v.clone());
                state.terminated = true;
            }
        }
        _ => {}
    }
}

/// [`BrbState`] as a simulated party.
pub struct Brb {
    pub state: BrbState,
    t: ThresholdSet,
}

impl Brb {
    pub fn new(me: PartyId, broadcaster: PartyId, input: Option<Value>, t: ThresholdSet) -> Self {
        Brb {
            state: BrbState::new(me, broadcaster, input),
            t,
        }
    }
}

impl Party for Brb {
    fn step(&mut self, _now: Time, input: Input<'_>) -> Vec<Action> {
        let ev = match input {
            Input::Start => BrbEvent::Start,
            Input::Deliver { from, msg } => BrbEvent::Deliver { from, msg },
            Input::Timer(_) => return Vec::new(),
        };
        brb_step(&mut self.state, ev, &self.t)
    }
}

/// Distinct signers of the votes for `v`.
pub fn voters(state: &BrbState, v: &Value) -> BTreeSet<PartyId> {
    state
        .vote_tally
        .get(v)
        .map(|m| m.keys().copied().collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{thresholds, Resilience, Setting};

    fn t41() -> ThresholdSet {
        thresholds(&Resilience::new(4, 1, Setting::AsyncBrb)).unwrap()
    }

    #[test]
    fn broadcaster_proposes_on_start() {
        let mut s = BrbState::new(0, 0, Some(Value::num(7)));
        let out = brb_step(&mut s, BrbEvent::Start, &t41());
        assert_eq!(out.len(), 1);
        let mut f = BrbState::new(1, 0, None);
        assert!(brb_step(&mut f, BrbEvent::Start, &t41()).is_empty());
    }

    #[test]
    fn votes_once_for_first_direct_proposal() {
        let t = t41();
        let mut s = BrbState::new(1, 0, None);
        let p0 = Message::one(sign(0, Body::Propose(Value::num(0))));
        let p1 = Message::one(sign(0, Body::Propose(Value::num(1))));
        assert_eq!(brb_step(&mut s, BrbEvent::Deliver { from: 0, msg: &p0 }, &t).len(), 1);
        assert!(brb_step(&mut s, BrbEvent::Deliver { from: 0, msg: &p1 }, &t).is_empty());
        assert_eq!(s.voted, Some(Value::num(0)));
    }

    #[test]
    fn relayed_proposal_is_not_voted() {
        let t = t41();
        let mut s = BrbState::new(1, 0, None);
        let p = Message::one(sign(0, Body::Propose(Value::num(0))));
        assert!(brb_step(&mut s, BrbEvent::Deliver { from: 2, msg: &p }, &t).is_empty());
    }

    #[test]
    fn commits_on_quorum_from_bundle() {
        let t = t41();
        let mut s = BrbState::new(3, 0, None);
        let bundle = Message((0..3).map(|j| sign(j, Body::Vote(Value::num(5)))).collect());
        let out = brb_step(&mut s, BrbEvent::Deliver { from: 1, msg: &bundle }, &t);
        assert_eq!(s.committed, Some(Value::num(5)));
        assert!(s.terminated);
        assert!(matches!(out.last(), Some(Action::Terminate)));
        assert_eq!(voters(&s, &Value::num(5)).len(), 3);
    }

    #[test]
    fn duplicate_signers_do_not_count() {
        let t = t41();
        let mut s = BrbState::new(3, 0, None);
        let dup = Message(vec![sign(1, Body::Vote(Value::num(5))); 3]);
        brb_step(&mut s, BrbEvent::Deliver { from: 1, msg: &dup }, &t);
        assert!(s.committed.is_none());
    }
}
