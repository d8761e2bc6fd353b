//! Two-round partially synchronous validated Byzantine broadcast for n ≥ 5f−1.
//!
//! Views rotate leaders round-robin. A view commits on 4f−1 votes; otherwise
//! parties time out after 4Δ, aggregate timeouts into a certificate and report
//! their highest certificate to the next leader, who re-proposes whatever value
//! that certificate locks.

mod cert;

use std::collections::{BTreeMap, BTreeSet};

use crate::sig::{sign, Body, Certificate, Message, Proof, Signed};
use crate::simnet::{Action, Input, Party, Validity};
use crate::time::Time;
use crate::types::{PartyId, ThresholdSet, Value};

pub use cert::{
    cert_status, check_certificate, leader_of, parse_entry, parse_proposal, parse_status, validate_proposal,
    CertStatus,
};

pub struct PsyncVbb {
    pub me: PartyId,
    t: ThresholdSet,
    big_delta: Time,
    input: Value,
    valid: Validity,
    pub view: u64,
    pub highest_cert: Certificate,
    pub committed: Option<Value>,
    terminated: bool,
    /// My countersigned `⟨v, w⟩_{L,me}` per view I voted in.
    voted: BTreeMap<u64, Signed>,
    timed_out: BTreeSet<u64>,
    /// Leader-signed values seen per view.
    leader_values: BTreeMap<u64, BTreeSet<Value>>,
    pending_proposals: BTreeMap<u64, Signed>,
    votes: BTreeMap<(u64, Value), BTreeMap<PartyId, Signed>>,
    timeouts: BTreeMap<u64, BTreeMap<PartyId, Signed>>,
    statuses: BTreeMap<u64, BTreeMap<PartyId, Signed>>,
    proposed: BTreeSet<u64>,
    out: Vec<Action>,
}

impl PsyncVbb {
    pub fn new(me: PartyId, t: ThresholdSet, big_delta: Time, input: Value, valid: Validity) -> Self {
        PsyncVbb {
            me,
            t,
            big_delta,
            input,
            valid,
            view: 1,
            highest_cert: Certificate::empty(),
            committed: None,
            terminated: false,
            voted: BTreeMap::new(),
            timed_out: BTreeSet::new(),
            leader_values: BTreeMap::new(),
            pending_proposals: BTreeMap::new(),
            votes: BTreeMap::new(),
            timeouts: BTreeMap::new(),
            statuses: BTreeMap::new(),
            proposed: BTreeSet::new(),
            out: Vec::new(),
        }
    }

    fn leader(&self, w: u64) -> PartyId {
        leader_of(w, self.t.n)
    }

    fn multicast(&mut self, s: Signed) {
        self.out.push(Action::multicast(self.t.n, Message::one(s)));
    }

    fn others(&self) -> Vec<PartyId> {
        (0..self.t.n).filter(|&p| p != self.me).collect()
    }

    fn is_valid(&self, v: &Value) -> bool {
        !v.is_bot() && (self.valid)(v)
    }

    fn note_leader_values(&mut self, item: &Signed) {
        let n = self.t.n;
        let lv = &mut self.leader_values;
        item.walk(&mut |x| {
            if let Body::Slot(v, w) = &x.body {
                if !v.is_bot() && *w >= 1 && x.origin() == Some(leader_of(*w, n)) {
                    lv.entry(*w).or_default().insert(v.clone());
                }
            }
        });
    }

    fn equivocated(&self, w: u64) -> bool {
        self.leader_values.get(&w).is_some_and(|s| s.len() >= 2)
    }

    fn start(&mut self) {
        self.out.push(Action::SetTimer {
            at: self.big_delta * 4,
            tag: 1,
        });
        if self.leader(1) == self.me {
            self.proposed.insert(1);
            let inner = sign(self.me, Body::Slot(self.input.clone(), 1));
            let prop = sign(self.me, Body::ViewPropose(Box::new(inner), Proof::None));
            self.multicast(prop);
        }
    }

    fn on_item(&mut self, now: Time, item: &Signed) {
        self.note_leader_values(item);
        match &item.body {
            Body::ViewPropose(..) => {
                let Some((w, ..)) = parse_proposal(item, &self.t) else { return };
                if w == self.view {
                    self.try_vote(item);
                } else if w > self.view {
                    self.pending_proposals.entry(w).or_insert_with(|| item.clone());
                }
            }
            Body::ViewVote(inner) => {
                let &[j] = &item.chain[..] else { return };
                let Body::Slot(v, w) = &inner.body else { return };
                if v.is_bot() || inner.chain != [self.leader(*w), j] || !self.is_valid(v) {
                    return;
                }
                let key = (*w, v.clone());
                let tally = self.votes.entry(key).or_default();
                tally.entry(j).or_insert_with(|| item.clone());
                if tally.len() >= self.t.q_cert && self.committed.is_none() {
                    let bundle: Vec<Signed> = tally.values().take(self.t.q_cert).cloned().collect();
                    let v = v.clone();
                    self.out.push(Action::Send {
                        to: self.others(),
                        msg: Message(bundle),
                    });
                    self.out.push(Action::Commit(v.clone()));
                    self.out.push(Action::Terminate);
                    self.committed = Some(v);
                    self.terminated = true;
                }
            }
            Body::Timeout(inner) => {
                let &[j] = &item.chain[..] else { return };
                let Body::Slot(_, w) = &inner.body else { return };
                let w = *w;
                let valid = self.valid.clone();
                match parse_entry(inner, w, &self.t, &*valid) {
                    Ok((_, sj)) if sj == j && w >= 1 => {}
                    _ => return,
                }
                self.timeouts.entry(w).or_default().entry(j).or_insert_with(|| item.clone());
                self.try_new_view(now, w);
            }
            Body::Status(u, _) => {
                let u = *u;
                if self.leader(u + 1) != self.me {
                    return;
                }
                let valid = self.valid.clone();
                let Some((j, ..)) = parse_status(item, u, &self.t, &*valid) else { return };
                self.statuses.entry(u).or_default().entry(j).or_insert_with(|| item.clone());
                self.try_lead(u + 1);
            }
            _ => {}
        }
    }

    fn try_vote(&mut self, prop: &Signed) {
        let Some((w, _, inner, _)) = parse_proposal(prop, &self.t) else { return };
        if w != self.view
            || self.committed.is_some()
            || self.voted.contains_key(&w)
            || self.timed_out.contains(&w)
            || self.equivocated(w)
        {
            return;
        }
        let valid = self.valid.clone();
        if !validate_proposal(prop, &self.t, &*valid) {
            return;
        }
        let slot = inner.countersign(self.me);
        self.voted.insert(w, slot.clone());
        self.multicast(sign(self.me, Body::ViewVote(Box::new(slot))));
    }

    fn time_out(&mut self, w: u64) {
        if !self.timed_out.insert(w) {
            return;
        }
        let entry = match self.voted.get(&w) {
            Some(s) => s.clone(),
            None => sign(self.me, Body::Slot(Value::Bot, w)),
        };
        self.multicast(sign(self.me, Body::Timeout(Box::new(entry))));
    }

    /// Pick 4f−1 view-`w` timeouts that allow moving to view `w+1`.
    fn select_timeouts(&self, w: u64) -> Option<Vec<Signed>> {
        let pool = self.timeouts.get(&w)?;
        let q = self.t.q_cert;
        if pool.len() < q || q == 0 {
            return None;
        }
        let inner_value = |s: &Signed| match &s.body {
            Body::Timeout(i) => match &i.body {
                Body::Slot(v, _) => v.clone(),
                _ => Value::Bot,
            },
            _ => Value::Bot,
        };
        let bots: Vec<&Signed> = pool.values().filter(|s| inner_value(s).is_bot()).collect();
        let mut by_value: BTreeMap<Value, Vec<&Signed>> = BTreeMap::new();
        for s in pool.values() {
            let v = inner_value(s);
            if !v.is_bot() {
                by_value.entry(v).or_default().push(s);
            }
        }
        // A subset naming at most one leader-signed value; prefer the value
        // with most support so the certificate can lock it.
        let best = by_value
            .iter()
            .filter(|(_, vs)| vs.len() + bots.len() >= q)
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(a.0)));
        if let Some((_, vs)) = best {
            let mut chosen: Vec<Signed> = vs.iter().take(q).map(|s| (*s).clone()).collect();
            chosen.extend(bots.iter().take(q - chosen.len()).map(|s| (*s).clone()));
            return Some(chosen);
        }
        if bots.len() >= q {
            return Some(bots.iter().take(q).map(|s| (*s).clone()).collect());
        }
        let l = self.leader(w);
        let non_leader: Vec<Signed> = pool
            .iter()
            .filter(|(j, _)| **j != l)
            .map(|(_, s)| s.clone())
            .take(q)
            .collect();
        (non_leader.len() >= q).then_some(non_leader)
    }

    fn try_new_view(&mut self, now: Time, w: u64) {
        if self.terminated || w < self.view {
            return;
        }
        let Some(chosen) = self.select_timeouts(w) else { return };
        self.out.push(Action::Send {
            to: self.others(),
            msg: Message(chosen.clone()),
        });
        let entries: Vec<Signed> = chosen
            .iter()
            .filter_map(|s| match &s.body {
                Body::Timeout(i) => Some((**i).clone()),
                _ => None,
            })
            .collect();
        let valid = self.valid.clone();
        if let CertStatus::ValidLocks(v) = check_certificate(&entries, w, &self.t, &*valid) {
            if !v.is_bot() && w > self.highest_cert.view {
                self.highest_cert = Certificate { view: w, entries };
            }
        }
        let cur = self.view;
        self.time_out(cur);
        self.enter_view(now, w + 1);
    }

    fn enter_view(&mut self, now: Time, w: u64) {
        self.view = w;
        self.out.push(Action::SetTimer {
            at: now + self.big_delta * 4,
            tag: w,
        });
        let status = sign(self.me, Body::Status(w - 1, self.highest_cert.clone()));
        self.out.push(Action::Send {
            to: vec![self.leader(w)],
            msg: Message::one(status),
        });
        if let Some(p) = self.pending_proposals.remove(&w) {
            self.try_vote(&p);
        }
        self.try_lead(w);
        self.try_new_view(now, w);
    }

    /// Leader of view `w` proposes once it holds 4f−1 view-(w−1) statuses.
    fn try_lead(&mut self, w: u64) {
        if w < 2 || self.view != w || self.leader(w) != self.me || self.proposed.contains(&w) || self.terminated {
            return;
        }
        let Some(pool) = self.statuses.get(&(w - 1)) else { return };
        if pool.len() < self.t.q_cert {
            return;
        }
        let valid = self.valid.clone();
        let valid = &*valid;
        let parsed: Vec<(&Certificate, CertStatus)> = pool
            .values()
            .filter_map(|s| parse_status(s, w - 1, &self.t, valid).map(|(_, c, st)| (c, st)))
            .collect();
        let own = (&self.highest_cert, cert_status(&self.highest_cert, &self.t, valid));

        let fresh = parsed
            .iter()
            .chain(std::iter::once(&own))
            .filter(|(c, _)| c.view == w - 1)
            .filter_map(|(c, st)| match st {
                CertStatus::ValidLocks(v) => Some((v.clone(), (*c).clone())),
                _ => None,
            })
            .min_by(|a, b| a.0.cmp(&b.0));
        let (value, proof) = match fresh {
            Some((v, c)) => (v, Proof::Cert(c)),
            None => {
                let top = parsed.iter().map(|(c, _)| c.view).max().unwrap_or(0);
                let v = parsed
                    .iter()
                    .filter(|(c, _)| c.view == top)
                    .filter_map(|(_, st)| match st {
                        CertStatus::ValidLocks(v) => Some(v.clone()),
                        _ => None,
                    })
                    .min()
                    .unwrap_or_else(|| self.input.clone());
                (v, Proof::Statuses(pool.values().cloned().collect()))
            }
        };
        self.proposed.insert(w);
        let inner = sign(self.me, Body::Slot(value, w));
        let prop = sign(self.me, Body::ViewPropose(Box::new(inner), proof));
        self.multicast(prop);
    }
}

impl Party for PsyncVbb {
    fn step(&mut self, now: Time, input: Input<'_>) -> Vec<Action> {
        if self.terminated {
            return Vec::new();
        }
        match input {
            Input::Start => self.start(),
            Input::Deliver { msg, .. } => {
                for item in msg.items() {
                    self.on_item(now, item);
                    if self.terminated {
                        break;
                    }
                }
            }
            Input::Timer(w) => {
                if w == self.view && self.committed.is_none() {
                    self.time_out(w);
                    self.try_new_view(now, w);
                }
            }
        }
        std::mem::take(&mut self.out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::accept_all;

    const N: usize = 4;

    fn party(me: PartyId) -> PsyncVbb {
        PsyncVbb::new(me, ThresholdSet::raw(N, 1), Time::int(10), Value::num(7), accept_all())
    }

    fn items(acts: &[Action]) -> Vec<&Body> {
        acts.iter()
            .flat_map(|a| match a {
                Action::Send { msg, .. } => msg.items().iter().map(|s| &s.body).collect(),
                _ => Vec::new(),
            })
            .collect()
    }

    fn proposal(w: u64, v: u64) -> Message {
        let inner = sign(leader_of(w, N), Body::Slot(Value::num(v), w));
        Message::one(sign(leader_of(w, N), Body::ViewPropose(Box::new(inner), Proof::None)))
    }

    fn vote(j: PartyId, v: u64) -> Message {
        let slot = sign(0, Body::Slot(Value::num(v), 1)).countersign(j);
        Message::one(sign(j, Body::ViewVote(Box::new(slot))))
    }

    #[test]
    fn leader_proposes_and_arms_timer() {
        let acts = party(0).step(Time::ZERO, Input::Start);
        assert!(acts.contains(&Action::SetTimer { at: Time::int(40), tag: 1 }));
        assert!(matches!(items(&acts)[..], [Body::ViewPropose(..)]));
        assert!(items(&party(1).step(Time::ZERO, Input::Start)).is_empty());
    }

    #[test]
    fn votes_once_and_not_after_equivocation() {
        let mut p = party(1);
        p.step(Time::ZERO, Input::Start);
        let acts = p.step(Time::int(1), Input::Deliver { from: 0, msg: &proposal(1, 7) });
        assert!(matches!(items(&acts)[..], [Body::ViewVote(_)]));
        let again = p.step(Time::int(2), Input::Deliver { from: 0, msg: &proposal(1, 8) });
        assert!(items(&again).is_empty());

        let mut q = party(2);
        q.step(Time::ZERO, Input::Start);
        q.step(Time::int(1), Input::Deliver { from: 3, msg: &vote(3, 8) });
        let acts = q.step(Time::int(1), Input::Deliver { from: 0, msg: &proposal(1, 7) });
        // The relayed vote revealed a second leader value.
        let acts: Vec<_> = acts.iter().filter(|a| !matches!(a, Action::SetTimer { .. })).collect();
        assert!(acts.is_empty());
    }

    #[test]
    fn commits_on_quorum_and_forwards_bundle() {
        let mut p = party(1);
        p.step(Time::ZERO, Input::Start);
        let mut last = Vec::new();
        for j in 1..=3 {
            last = p.step(Time::int(2), Input::Deliver { from: j, msg: &vote(j, 7) });
        }
        assert!(last.contains(&Action::Commit(Value::num(7))));
        assert!(last.contains(&Action::Terminate));
        assert_eq!(items(&last).len(), 3);
        assert_eq!(p.committed, Some(Value::num(7)));
    }

    #[test]
    fn timeout_after_four_deltas() {
        let mut p = party(1);
        p.step(Time::ZERO, Input::Start);
        let acts = p.step(Time::int(40), Input::Timer(1));
        assert!(matches!(items(&acts)[..], [Body::Timeout(_)]));
        assert_eq!(p.view, 1);
    }

    #[test]
    fn view_change_on_timeout_quorum() {
        let mut p = party(2);
        p.step(Time::ZERO, Input::Start);
        for j in [0, 1, 3] {
            let t = sign(j, Body::Timeout(Box::new(sign(j, Body::Slot(Value::Bot, 1)))));
            p.step(Time::int(41), Input::Deliver { from: j, msg: &Message::one(t) });
        }
        assert_eq!(p.view, 2);
        assert_eq!(leader_of(2, N), 1);
    }
}
