//! Synchronous Byzantine broadcast with known bound Δ and unknown actual delay δ.
//!
//! Four protocols share one state machine, [`SyncBb`], differing in their
//! vote and commit rules:
//!
//! | kind | region | good-case latency |
//! |---|---|---|
//! | `TwoDelta` | f < n/3 | 2δ |
//! | `EqThird` | f = n/3 | Δ+δ |
//! | `SyncStart` | n/3 < f < n/2, σ = 0 | Δ+δ |
//! | `OneAndHalf` | n/3 < f < n/2 | Δ+1.5δ (Δ+δ+0.5d* on a grid) |
//!
//! All of them fall back to [`ba::Ba`] on their lock.

pub mod ba;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::sig::{sign, Body, Message, Signed};
use crate::simnet::{Action, Input, Party};
use crate::time::Time;
use crate::types::{PartyId, ThresholdSet, Value};

pub use ba::{plurality, Ba, BaConfig, BaParty, BA_DECIDE_TAG};

const T_BA: u64 = 1;
const T_VOTE: u64 = 2;
const T_COMMIT: u64 = 3;
const T_GRID: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyncKind {
    TwoDelta,
    EqThird,
    SyncStart,
    OneAndHalf { m: u32 },
}

/// The vote levels `kΔ/m` for `k = 0..=m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DGrid {
    pub m: u32,
    pub points: Vec<Time>,
}

impl DGrid {
    pub fn new(m: u32, big_delta: Time) -> Self {
        assert!(m > 0, "grid needs m ≥ 1");
        DGrid {
            m,
            points: (0..=m as i64).map(|k| big_delta * k / m as i64).collect(),
        }
    }

    pub fn index_of(&self, d: Time) -> Option<usize> {
        self.points.binary_search(&d).ok()
    }

    /// Smallest grid point not below `x`.
    pub fn ceil(&self, x: Time) -> Option<Time> {
        self.points.iter().copied().find(|&p| p >= x)
    }
}

pub struct SyncBb {
    pub kind: SyncKind,
    pub me: PartyId,
    pub broadcaster: PartyId,
    t: ThresholdSet,
    big_delta: Time,
    pub sigma_param: Time,
    input: Option<Value>,
    grid: Option<DGrid>,

    pub lock: Value,
    pub rank: Time,
    pub direct_rcv: bool,
    pub t_prop: Option<Time>,
    proposal: Option<Signed>,
    seen_values: BTreeSet<Value>,
    pub equivocation_at: Option<Time>,

    /// Plain votes (`TwoDelta`, `EqThird`) per value.
    votes: BTreeMap<Value, BTreeMap<PartyId, Signed>>,
    quorum_at: BTreeMap<Value, Time>,
    forwarded: BTreeSet<Value>,
    /// `SyncStart` votes per value: signer → (d, vote).
    timed: BTreeMap<Value, BTreeMap<PartyId, (Time, Signed)>>,
    /// `OneAndHalf` votes per (grid index, value).
    graded: BTreeMap<(usize, Value), BTreeMap<PartyId, Signed>>,
    pending_commits: Vec<(Value, Time)>,
    vote_timer_done: bool,
    fast_armed: bool,
    commit_msgs: Vec<(PartyId, Value)>,

    pub committed: Option<Value>,
    pub ba: Ba,
    ba_input: Option<Value>,
    terminated: bool,
    out: Vec<Action>,
}

impl SyncBb {
    pub fn new(kind: SyncKind, me: PartyId, broadcaster: PartyId, t: ThresholdSet, big_delta: Time, input: Option<Value>) -> Self {
        let sigma_param = match kind {
            SyncKind::SyncStart => Time::ZERO,
            _ => big_delta,
        };
        let grid = match kind {
            SyncKind::OneAndHalf { m } => Some(DGrid::new(m, big_delta)),
            _ => None,
        };
        SyncBb {
            kind,
            me,
            broadcaster,
            t,
            big_delta,
            sigma_param,
            input: if me == broadcaster { input } else { None },
            grid,
            lock: Value::Bot,
            rank: big_delta + Time::int(1),
            direct_rcv: false,
            t_prop: None,
            proposal: None,
            seen_values: BTreeSet::new(),
            equivocation_at: None,
            votes: BTreeMap::new(),
            quorum_at: BTreeMap::new(),
            forwarded: BTreeSet::new(),
            timed: BTreeMap::new(),
            graded: BTreeMap::new(),
            pending_commits: Vec::new(),
            vote_timer_done: false,
            fast_armed: false,
            commit_msgs: Vec::new(),
            committed: None,
            ba: Ba::new(me, t.n, t.f, big_delta),
            ba_input: None,
            terminated: false,
            out: Vec::new(),
        }
    }

    /// Local time at which the BA subroutine starts.
    pub fn ba_time(&self) -> Time {
        let (d, s) = (self.big_delta, self.sigma_param);
        match self.kind {
            SyncKind::TwoDelta | SyncKind::EqThird => d * 3 + s * 2,
            SyncKind::SyncStart => d * 4,
            SyncKind::OneAndHalf { .. } => d * 13 / 2 + s * 2,
        }
    }

    /// The lock carried into BA, once invoked.
    pub fn ba_input(&self) -> Option<&Value> {
        self.ba_input.as_ref()
    }

    fn others(&self) -> Vec<PartyId> {
        (0..self.t.n).filter(|&p| p != self.me).collect()
    }

    fn multicast(&mut self, s: Signed) {
        self.out.push(Action::multicast(self.t.n, Message::one(s)));
    }

    fn forward(&mut self, items: Vec<Signed>) {
        self.out.push(Action::Send {
            to: self.others(),
            msg: Message(items),
        });
    }

    fn commit(&mut self, v: Value) {
        if self.committed.is_none() {
            self.committed = Some(v.clone());
            self.out.push(Action::Commit(v));
        }
    }

    fn no_equivocation_until(&self, t: Time) -> bool {
        self.equivocation_at.is_none_or(|e| e > t)
    }

    /// `⟨propose, v⟩_L` with the right signer, or `None`.
    fn proposal_value<'a>(&self, p: &'a Signed) -> Option<&'a Value> {
        match &p.body {
            Body::Propose(v) if p.chain == [self.broadcaster] && !v.is_bot() => Some(v),
            _ => None,
        }
    }

    fn note_equivocation(&mut self, now: Time, item: &Signed) {
        let b = self.broadcaster;
        let seen = &mut self.seen_values;
        item.walk(&mut |x| {
            if let Body::Propose(v) = &x.body {
                if x.origin() == Some(b) && !v.is_bot() {
                    seen.insert(v.clone());
                }
            }
        });
        if self.seen_values.len() >= 2 && self.equivocation_at.is_none() {
            self.equivocation_at = Some(now);
        }
    }

    fn start(&mut self) {
        if let Some(v) = self.input.clone() {
            self.multicast(sign(self.me, Body::Propose(v)));
        }
        let at = self.ba_time();
        self.out.push(Action::SetTimer { at, tag: T_BA });
    }

    fn on_item(&mut self, now: Time, from: PartyId, item: &Signed) {
        self.note_equivocation(now, item);
        match &item.body {
            Body::Propose(_) => self.on_proposal(now, from, item),
            Body::Vote(v) => self.on_plain_vote(now, item, v.clone()),
            Body::Echo(inner) => {
                if let Some(v) = self.proposal_value(inner).cloned() {
                    self.on_plain_vote(now, item, v);
                }
            }
            Body::TimedVote(d, inner) => {
                if let Some(v) = self.proposal_value(inner).cloned() {
                    match self.kind {
                        SyncKind::SyncStart => self.on_timed_vote(now, item, *d, v),
                        SyncKind::OneAndHalf { .. } => self.on_graded_vote(now, item, *d, v),
                        _ => {}
                    }
                }
            }
            Body::Commit(v) => {
                if let &[j] = &item.chain[..] {
                    if !v.is_bot() {
                        self.commit_msgs.push((j, v.clone()));
                    }
                }
            }
            Body::Ds { .. } => {
                let acts = self.ba.on_item(now, item);
                self.out.extend(acts);
            }
            _ => {}
        }
    }

    fn on_proposal(&mut self, now: Time, from: PartyId, item: &Signed) {
        if self.proposal.is_some() {
            return;
        }
        let Some(v) = self.proposal_value(item).cloned() else { return };
        let direct = from == self.broadcaster;
        match self.kind {
            SyncKind::TwoDelta => {
                if !direct {
                    return;
                }
                self.proposal = Some(item.clone());
                self.multicast(sign(self.me, Body::Vote(v)));
            }
            SyncKind::EqThird => {
                if !direct {
                    return;
                }
                self.proposal = Some(item.clone());
                self.multicast(sign(self.me, Body::Echo(Box::new(item.clone()))));
                self.out.push(Action::SetTimer {
                    at: now + self.big_delta,
                    tag: T_VOTE,
                });
            }
            SyncKind::SyncStart => {
                if !direct {
                    return;
                }
                self.proposal = Some(item.clone());
                if now <= self.big_delta {
                    self.multicast(sign(self.me, Body::TimedVote(now, Box::new(item.clone()))));
                }
            }
            SyncKind::OneAndHalf { .. } => {
                self.proposal = Some(item.clone());
                self.t_prop = Some(now);
                self.direct_rcv = direct && now <= self.big_delta + self.sigma_param;
                self.forward(vec![item.clone()]);
                let points = self.grid.as_ref().map(|g| g.points.clone()).unwrap_or_default();
                for (k, d) in points.into_iter().enumerate() {
                    self.out.push(Action::SetTimer {
                        at: now + self.big_delta - d / 2,
                        tag: T_GRID + k as u64,
                    });
                }
            }
        }
    }

    fn on_plain_vote(&mut self, now: Time, item: &Signed, v: Value) {
        let &[j] = &item.chain[..] else { return };
        if j >= self.t.n {
            return;
        }
        let tally = self.votes.entry(v.clone()).or_default();
        tally.entry(j).or_insert_with(|| item.clone());
        if tally.len() < self.t.q_nf {
            return;
        }
        self.quorum_at.entry(v.clone()).or_insert(now);
        match self.kind {
            SyncKind::TwoDelta => {
                if self.forwarded.insert(v.clone()) {
                    let bundle = self.quorum_bundle(&v);
                    self.forward(bundle);
                    self.lock = v.clone();
                    if now <= self.big_delta * 2 + self.sigma_param {
                        self.commit(v);
                    }
                }
            }
            SyncKind::EqThird if self.vote_timer_done && self.fast_armed => self.fast_path(&v),
            _ => {}
        }
    }

    fn quorum_bundle(&self, v: &Value) -> Vec<Signed> {
        self.votes
            .get(v)
            .map(|m| m.values().take(self.t.q_nf).cloned().collect())
            .unwrap_or_default()
    }

    /// Forward a quorum and commit if it completed in time.
    fn fast_path(&mut self, v: &Value) {
        if !self.forwarded.insert(v.clone()) {
            return;
        }
        let bundle = self.quorum_bundle(v);
        self.forward(bundle);
        let deadline = self.big_delta * 2 + self.sigma_param;
        if self.quorum_at.get(v).is_some_and(|&t| t <= deadline) && self.committed.is_none() {
            self.commit(v.clone());
            self.lock = v.clone();
            self.multicast(sign(self.me, Body::Commit(v.clone())));
        }
    }

    fn on_timed_vote(&mut self, now: Time, item: &Signed, d: Time, v: Value) {
        let &[j] = &item.chain[..] else { return };
        if j >= self.t.n || d.is_negative() || d > self.big_delta {
            return;
        }
        self.timed
            .entry(v.clone())
            .or_default()
            .entry(j)
            .or_insert_with(|| (d, item.clone()));
        let Some(tv) = self.t_min(&v) else { return };
        let t_star = tv.max(now - self.big_delta * 2);
        if t_star <= self.big_delta && self.rank > t_star {
            self.lock = v.clone();
            self.rank = t_star;
        }
        if self.committed.is_none() {
            self.out.push(Action::SetTimer {
                at: (tv + self.big_delta).max(now),
                tag: T_COMMIT,
            });
        }
    }

    /// The (f+1)-th smallest vote time for `v`.
    pub fn t_min(&self, v: &Value) -> Option<Time> {
        let mut ds: Vec<Time> = self.timed.get(v)?.values().map(|(d, _)| *d).collect();
        ds.sort();
        ds.get(self.t.q_f1 - 1).copied()
    }

    fn on_graded_vote(&mut self, now: Time, item: &Signed, d: Time, v: Value) {
        let &[j] = &item.chain[..] else { return };
        let Some(k) = self.grid.as_ref().and_then(|g| g.index_of(d)) else { return };
        if j >= self.t.n {
            return;
        }
        let tally = self.graded.entry((k, v.clone())).or_default();
        if tally.contains_key(&j) {
            return;
        }
        tally.insert(j, item.clone());
        if tally.len() != self.t.q_f1 {
            return;
        }
        let bundle: Vec<Signed> = tally.values().cloned().collect();
        self.forward(bundle);
        let Some(tp) = self.t_prop else { return };
        let elapsed = now - tp;
        if self.direct_rcv && elapsed <= self.big_delta + d * 3 / 2 {
            let deadline = tp + self.big_delta + d / 2;
            self.pending_commits.push((v.clone(), deadline));
            self.out.push(Action::SetTimer {
                at: deadline.max(now),
                tag: T_COMMIT,
            });
        }
        if elapsed <= self.big_delta * 9 / 2 && self.rank > d {
            self.lock = v;
            self.rank = d;
        }
    }

    fn on_timer(&mut self, now: Time, tag: u64) {
        match tag {
            T_BA => {
                self.on_ba_time();
                let cfg = BaConfig::new(self.t.f, self.big_delta, self.lock.clone());
                self.ba_input = Some(self.lock.clone());
                let acts = self.ba.invoke(now, &cfg);
                self.out.extend(acts);
            }
            T_VOTE => {
                self.vote_timer_done = true;
                self.fast_armed = self.equivocation_at.is_none();
                if self.fast_armed {
                    let ready: Vec<Value> = self.quorum_at.keys().cloned().collect();
                    for v in ready {
                        self.fast_path(&v);
                    }
                }
            }
            T_COMMIT => self.check_commits(now),
            BA_DECIDE_TAG => {
                if let Some(d) = self.ba.on_timer(tag) {
                    self.commit(d);
                    self.out.push(Action::Terminate);
                    self.terminated = true;
                }
            }
            k if k >= T_GRID => {
                let k = (k - T_GRID) as usize;
                let (Some(p), Some(g)) = (self.proposal.clone(), self.grid.as_ref()) else { return };
                let Some(&d) = g.points.get(k) else { return };
                if self.equivocation_at.is_none() {
                    self.multicast(sign(self.me, Body::TimedVote(d, Box::new(p))));
                }
            }
            _ => {}
        }
    }

    fn check_commits(&mut self, now: Time) {
        if self.committed.is_some() {
            return;
        }
        match self.kind {
            SyncKind::SyncStart => {
                let values: Vec<Value> = self.timed.keys().cloned().collect();
                for v in values {
                    let Some(tv) = self.t_min(&v) else { continue };
                    if tv + self.big_delta <= now && self.no_equivocation_until(tv + self.big_delta) {
                        let mut vs: Vec<(Time, Signed)> = self.timed[&v].values().cloned().collect();
                        vs.sort();
                        let bundle = vs.into_iter().take(self.t.q_f1).map(|(_, s)| s).collect();
                        self.commit(v);
                        self.forward(bundle);
                        return;
                    }
                }
            }
            SyncKind::OneAndHalf { .. } => {
                let due: Vec<(Value, Time)> = self.pending_commits.iter().filter(|(_, dl)| *dl <= now).cloned().collect();
                self.pending_commits.retain(|(_, dl)| *dl > now);
                for (v, dl) in due {
                    if self.no_equivocation_until(dl) {
                        self.commit(v);
                        return;
                    }
                }
            }
            _ => {}
        }
    }

    /// `EqThird`: resolve conflicting quorums with commit messages before BA.
    fn on_ba_time(&mut self) {
        if self.kind != SyncKind::EqThird {
            return;
        }
        let quorums: Vec<Value> = self
            .votes
            .iter()
            .filter(|(_, m)| m.len() >= self.t.q_nf)
            .map(|(v, _)| v.clone())
            .collect();
        match &quorums[..] {
            [v] => self.lock = v.clone(),
            [a, b, ..] => {
                let sa: BTreeSet<PartyId> = self.votes[a].keys().copied().collect();
                let sb: BTreeSet<PartyId> = self.votes[b].keys().copied().collect();
                let both: BTreeSet<PartyId> = sa.intersection(&sb).copied().collect();
                if let Some((_, v)) = self.commit_msgs.iter().find(|(j, _)| !both.contains(j)).cloned() {
                    self.commit(v.clone());
                    self.lock = v;
                }
            }
            [] => {}
        }
    }
}

impl Party for SyncBb {
    fn step(&mut self, now: Time, input: Input<'_>) -> Vec<Action> {
        if self.terminated {
            return Vec::new();
        }
        match input {
            Input::Start => self.start(),
            Input::Deliver { from, msg } => {
                for item in msg.items() {
                    self.on_item(now, from, item);
                }
            }
            Input::Timer(tag) => self.on_timer(now, tag),
        }
        std::mem::take(&mut self.out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        let g = DGrid::new(5, Time::int(10));
        assert_eq!(g.points.len(), 6);
        assert_eq!(g.points[1], Time::int(2));
        assert_eq!(g.ceil(Time::int(3)), Some(Time::int(4)));
        assert_eq!(g.ceil(Time::int(2)), Some(Time::int(2)));
        assert!(g.index_of(Time::int(3)).is_none());
        let odd = DGrid::new(3, Time::int(10));
        assert_eq!(odd.points[1], Time::new(10, 3));
    }

    #[test]
    fn ba_times() {
        let t = ThresholdSet::raw(5, 2);
        let d = Time::int(10);
        let mk = |k| SyncBb::new(k, 0, 0, t, d, None).ba_time();
        assert_eq!(mk(SyncKind::TwoDelta), Time::int(50));
        assert_eq!(mk(SyncKind::EqThird), Time::int(50));
        assert_eq!(mk(SyncKind::SyncStart), Time::int(40));
        assert_eq!(mk(SyncKind::OneAndHalf { m: 5 }), Time::int(85));
    }

    mod props {
        use super::*;
        use crate::harness::{check_safety, measure_good_case, RunConfig, Schedule};
        use crate::protocol::ProtocolId;
        use proptest::prelude::*;

        fn direct_first(t: &crate::simnet::Trace) -> bool {
            t.honest_parties().all(|p| {
                t.events
                    .iter()
                    .find_map(|e| match &e.kind {
                        crate::simnet::EventKind::Deliver { from, msg, .. }
                            if e.party == p && msg.items().iter().any(|x| matches!(x.body, Body::Propose(_))) =>
                        {
                            Some(*from == t.broadcaster)
                        }
                        _ => None,
                    })
                    .unwrap_or(false)
            })
        }

        fn config() -> impl Strategy<Value = RunConfig> {
            let proto = prop_oneof![
                Just((ProtocolId::Bb2Delta, 4, 1)),
                Just((ProtocolId::BbN3, 3, 1)),
                Just((ProtocolId::BbSyncStart, 5, 2)),
                Just((ProtocolId::Bb15, 5, 2)),
            ];
            (proto, 1i64..=10, any::<u64>(), 0i64..=2).prop_map(|((p, n, f), delta, seed, skew_q)| {
                let delta = Time::int(delta);
                let mut c = RunConfig::new(p, n, f)
                    .with_delta(delta)
                    .with_schedule(Schedule::Seeded { seed });
                if p == ProtocolId::Bb15 {
                    // Skew in quarter steps up to δ/2.
                    c = c.with_skew(delta * skew_q / 4);
                }
                c
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn honest_broadcaster_meets_bound(c in config()) {
                let t = c.run().unwrap();
                let s = check_safety(&t, &c.input, false);
                prop_assert!(s.pass, "{s:?}");
                // The Δ+1.5δ fast path needs the broadcaster's own copy to be
                // the first proposal a party sees; a faster relay sends that
                // party through BA instead.
                if c.protocol == ProtocolId::Bb15 && !direct_first(&t) {
                    return Ok(());
                }
                let r = measure_good_case(&t, false, c.bound()).unwrap();
                prop_assert!(r.pass, "{:?} {:?}", c.protocol, r);
            }

            #[test]
            fn grid_is_sorted_within_delta(m in 1u32..12, big in 1i64..50) {
                let g = DGrid::new(m, Time::int(big));
                prop_assert_eq!(g.points.len(), m as usize + 1);
                prop_assert_eq!(g.points[0], Time::ZERO);
                prop_assert_eq!(*g.points.last().unwrap(), Time::int(big));
                prop_assert!(g.points.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
