//! Trace scanners for the protocols' correctness lemmas, and the exhaustive
//! BA enumeration.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::proto_psync::{check_certificate, cert_status, leader_of, CertStatus};
use crate::proto_sync::{BaParty, DGrid, BA_DECIDE_TAG};
use crate::sig::{sign, Body, Message, Signed};
use crate::simnet::{fixed_delay, run, Action, EventKind, Input, Party, Role, StepInput, TimingModel, Trace, World};
use crate::time::Time;
use crate::types::{PartyId, Resilience, Setting, ThresholdSet, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaViolation {
    pub lemma: &'static str,
    pub event: Option<usize>,
    pub detail: String,
}

fn violation(lemma: &'static str, event: Option<usize>, detail: String) -> LemmaViolation {
    LemmaViolation { lemma, event, detail }
}

/// Every signed item inside every sent message, with the send event index.
fn sent_items(trace: &Trace) -> impl Iterator<Item = (usize, PartyId, &Signed)> {
    trace.events.iter().enumerate().flat_map(|(i, e)| {
        let mut out = Vec::new();
        if let EventKind::Send { msg, .. } = &e.kind {
            for item in msg.items() {
                item.walk(&mut |x| out.push((i, e.party, x)));
            }
        }
        out
    })
}

/// Items a party itself signed as the outermost signer, per send event.
fn own_items(trace: &Trace) -> impl Iterator<Item = (usize, PartyId, &Signed)> {
    trace.events.iter().enumerate().flat_map(|(i, e)| {
        let mut out = Vec::new();
        if let EventKind::Send { msg, .. } = &e.kind {
            for item in msg.items() {
                if item.outer() == Some(e.party) {
                    out.push((i, e.party, item));
                }
            }
        }
        out
    })
}

/// `(party, value, view, commit event)` of each honest psync commit; the view
/// is read off the vote bundle forwarded in the same step.
pub fn psync_commit_views(trace: &Trace) -> Vec<(PartyId, Value, u64, usize)> {
    let mut out = Vec::new();
    for (i, e) in trace.events.iter().enumerate() {
        let EventKind::Commit(v) = &e.kind else { continue };
        if !trace.is_honest(e.party) {
            continue;
        }
        let first = trace.steps[e.step].first_event;
        let view = trace.events[first..i].iter().rev().find_map(|x| match &x.kind {
            EventKind::Send { msg, .. } => msg.items().iter().find_map(|it| match &it.body {
                Body::ViewVote(inner) => match &inner.body {
                    Body::Slot(_, w) => Some(*w),
                    _ => None,
                },
                _ => None,
            }),
            _ => None,
        });
        if let Some(w) = view {
            out.push((e.party, v.clone(), w, i));
        }
    }
    out
}

/// Honest view votes: `(party, view, value, send event)`.
fn honest_votes(trace: &Trace) -> Vec<(PartyId, u64, Value, usize)> {
    own_items(trace)
        .filter(|(_, p, _)| trace.is_honest(*p))
        .filter_map(|(i, p, it)| match &it.body {
            Body::ViewVote(inner) => match &inner.body {
                Body::Slot(v, w) => Some((p, *w, v.clone(), i)),
                _ => None,
            },
            _ => None,
        })
        .collect()
}

/// Well-formed view-`w` certificate entries found anywhere in the trace.
fn entry_pool(trace: &Trace, t: &ThresholdSet) -> BTreeMap<u64, Vec<Signed>> {
    let mut pool: BTreeMap<u64, BTreeSet<Signed>> = BTreeMap::new();
    for (_, _, x) in sent_items(trace) {
        if let Body::Slot(v, w) = &x.body {
            let ok = match (&x.chain[..], v.is_bot()) {
                (&[_], true) => true,
                (&[l, _], false) => l == leader_of(*w, t.n),
                _ => false,
            };
            if ok && *w >= 1 {
                pool.entry(*w).or_default().insert(x.clone());
            }
        }
    }
    pool.into_iter().map(|(w, s)| (w, s.into_iter().collect())).collect()
}

fn slot_value(e: &Signed) -> Value {
    match &e.body {
        Body::Slot(v, _) => v.clone(),
        _ => Value::Bot,
    }
}

/// The entry set most favourable to locking `target`: one entry per signer,
/// preferring `target`, then ⊥, then anything else.
fn favourable(entries: &[Signed], target: &Value, q: usize) -> Vec<Signed> {
    let rank = |e: &Signed| {
        let v = slot_value(e);
        if &v == target {
            0
        } else if v.is_bot() {
            1
        } else {
            2
        }
    };
    let mut best: BTreeMap<PartyId, &Signed> = BTreeMap::new();
    for e in entries {
        let Some(j) = e.outer() else { continue };
        match best.get(&j) {
            Some(b) if rank(b) <= rank(e) => {}
            _ => {
                best.insert(j, e);
            }
        }
    }
    let mut chosen: Vec<&Signed> = best.into_values().collect();
    chosen.sort_by_key(|e| rank(e));
    chosen.into_iter().take(q).cloned().collect()
}

fn locks_other(pool: &[Signed], w: u64, v: &Value, t: &ThresholdSet, valid: &dyn Fn(&Value) -> bool) -> Option<Value> {
    let others: BTreeSet<Value> = pool.iter().map(slot_value).filter(|x| !x.is_bot() && x != v).collect();
    others.into_iter().find(|x| {
        let set = favourable(pool, x, t.q_cert);
        matches!(check_certificate(&set, w, t, valid), CertStatus::ValidLocks(y) if &y == x)
    })
}

/// Certificate locking: when 3f−1 honest parties vote `v` in view `w`, no
/// view-`w` entry set locks another value, and each honest party entering
/// `w+1` carries a view-`w` certificate locking `v`. Across views: once an
/// honest party commits `v` in view `w`, no entry set of any view ≥ `w`
/// locks another value and no honest party votes another value in a later view.
pub fn scan_psync(trace: &Trace, t: &ThresholdSet, valid: &dyn Fn(&Value) -> bool) -> Vec<LemmaViolation> {
    let mut out = Vec::new();
    let pool = entry_pool(trace, t);
    let votes = honest_votes(trace);
    let mut voters: BTreeMap<(u64, Value), BTreeSet<PartyId>> = BTreeMap::new();
    for (p, w, v, _) in &votes {
        voters.entry((*w, v.clone())).or_default().insert(*p);
    }
    let need = (3 * t.f).saturating_sub(1).max(1);
    for ((w, v), who) in &voters {
        if who.len() < need {
            continue;
        }
        if let Some(x) = pool.get(w).and_then(|p| locks_other(p, *w, v, t, valid)) {
            out.push(violation(
                "cert-lock",
                None,
                format!("view {w}: {} honest votes for {v} yet an entry set locks {x}", who.len()),
            ));
        }
        for (i, p, it) in own_items(trace) {
            let Body::Status(u, c) = &it.body else { continue };
            if *u != *w || !trace.is_honest(p) {
                continue;
            }
            let ok = c.view == *w && cert_status(c, t, valid) == CertStatus::ValidLocks(v.clone());
            if !ok {
                out.push(violation(
                    "cert-lock",
                    Some(i),
                    format!("party {p} entered view {} without a view-{w} certificate locking {v}", w + 1),
                ));
            }
        }
    }
    for (p, v, w, ci) in psync_commit_views(trace) {
        for (&u, entries) in pool.range(w..) {
            if let Some(x) = locks_other(entries, u, &v, t, valid) {
                out.push(violation(
                    "commit-lock",
                    Some(ci),
                    format!("party {p} committed {v} in view {w} but a view-{u} entry set locks {x}"),
                ));
            }
        }
        for (q, u, x, i) in &votes {
            if *u > w && x != &v {
                out.push(violation(
                    "commit-lock",
                    Some(*i),
                    format!("party {q} voted {x} in view {u} after {v} was committed in view {w}"),
                ));
            }
        }
    }
    out
}

/// `(party, value, event)` of honest commits made outside the BA decision.
fn fast_commits(trace: &Trace) -> Vec<(PartyId, Value, usize)> {
    trace
        .events
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match &e.kind {
            EventKind::Commit(v) if trace.is_honest(e.party) => {
                let s = &trace.steps[e.step];
                let by_ba = s.input == StepInput::Timer
                    && matches!(trace.events[s.first_event].kind, EventKind::TimerFire(t) if t == BA_DECIDE_TAG);
                (!by_ba).then(|| (e.party, v.clone(), i))
            }
            _ => None,
        })
        .collect()
}

/// Each honest party's BA input: the value of its own Dolev-Strong instance.
fn ba_inputs(trace: &Trace) -> BTreeMap<PartyId, (Value, usize)> {
    let mut out = BTreeMap::new();
    for (i, p, it) in own_items(trace) {
        if let Body::Ds { instance, value } = &it.body {
            if *instance == p && it.chain == [p] && trace.is_honest(p) {
                out.entry(p).or_insert((value.clone(), i));
            }
        }
    }
    out
}

/// Fast commits agree, and every honest party enters BA locked on the
/// fast-committed value.
pub fn scan_sync_locks(trace: &Trace) -> Vec<LemmaViolation> {
    let mut out = Vec::new();
    let fast = fast_commits(trace);
    let Some((_, v, _)) = fast.first().cloned() else { return out };
    for (p, x, i) in &fast {
        if *x != v {
            out.push(violation("fast-lock", Some(*i), format!("party {p} fast-committed {x}, another {v}")));
        }
    }
    for (p, (x, i)) in ba_inputs(trace) {
        if x != v {
            out.push(violation("fast-lock", Some(i), format!("party {p} entered BA with {x} after a fast commit of {v}")));
        }
    }
    out
}

/// Graded votes: when an honest party fast-commits `v` at grid level `d`, no
/// honest party sends a vote `(d' ≤ d, v' ≠ v)`; and all honest BA inputs are `v`.
pub fn scan_graded(trace: &Trace, grid: &DGrid, big_delta: Time) -> Vec<LemmaViolation> {
    let mut out: Vec<LemmaViolation> = scan_sync_locks(trace)
        .into_iter()
        .map(|mut x| {
            x.lemma = "graded-lock";
            x
        })
        .collect();
    let mut honest_votes: Vec<(PartyId, Time, Value, usize)> = Vec::new();
    for (i, p, it) in own_items(trace) {
        if let Body::TimedVote(d, inner) = &it.body {
            if let Body::Propose(v) = &inner.body {
                if trace.is_honest(p) {
                    honest_votes.push((p, *d, v.clone(), i));
                }
            }
        }
    }
    for (p, v, ci) in fast_commits(trace) {
        let Some(level) = commit_level(trace, p, &v, ci, grid, big_delta) else { continue };
        for (q, d, x, i) in &honest_votes {
            if *d <= level && *x != v {
                out.push(violation(
                    "graded-lock",
                    Some(*i),
                    format!("party {q} voted ({d}, {x}) although {p} committed {v} at level {level}"),
                ));
            }
        }
    }
    out
}

/// The largest grid level whose forwarded f+1 bundle explains the commit time.
fn commit_level(trace: &Trace, p: PartyId, v: &Value, ci: usize, grid: &DGrid, big_delta: Time) -> Option<Time> {
    let at = trace.events[ci].l;
    let mut t_prop = None;
    let mut best = None;
    for e in trace.events[..ci].iter().filter(|e| e.party == p) {
        let EventKind::Send { msg, .. } = &e.kind else { continue };
        let items = msg.items();
        if t_prop.is_none() && items.iter().any(|it| matches!(it.body, Body::Propose(_))) {
            t_prop = Some(e.l);
        }
        let levels: BTreeSet<Time> = items
            .iter()
            .filter_map(|it| match &it.body {
                Body::TimedVote(d, inner) if matches!(&inner.body, Body::Propose(x) if x == v) => Some(*d),
                _ => None,
            })
            .collect();
        if let (Some(tp), [d]) = (t_prop, &levels.into_iter().collect::<Vec<_>>()[..]) {
            if items.len() > 1 && grid.index_of(*d).is_some() && (tp + big_delta + *d / 2).max(e.l) == at {
                best = best.max(Some(*d));
            }
        }
    }
    best
}

/// One Byzantine Dolev-Strong instance's output toward one honest recipient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DsChoice {
    /// Values sent with a single signature at invocation.
    pub first: (bool, bool),
    /// Value relayed late with a chain of `f` Byzantine signatures.
    pub late: Option<bool>,
}

impl DsChoice {
    pub fn all() -> Vec<DsChoice> {
        let mut out = Vec::new();
        for a in [false, true] {
            for b in [false, true] {
                for late in [None, Some(false), Some(true)] {
                    out.push(DsChoice { first: (a, b), late });
                }
            }
        }
        out
    }
}

fn bit(b: bool) -> Value {
    Value::num(b as u64)
}

/// A Byzantine BA participant following a fixed output plan.
struct DsAdversary {
    me: PartyId,
    byz: Vec<PartyId>,
    plan: Vec<(PartyId, DsChoice)>,
    round: Time,
    f: usize,
}

impl Party for DsAdversary {
    fn step(&mut self, now: Time, input: Input<'_>) -> Vec<Action> {
        if !matches!(input, Input::Start) {
            return Vec::new();
        }
        let mut out = Vec::new();
        for &(to, c) in &self.plan {
            for (on, val) in [(c.first.0, false), (c.first.1, true)] {
                if on {
                    out.push(Action::Inject {
                        to,
                        msg: Message::one(sign(self.me, Body::Ds { instance: self.me, value: bit(val) })),
                        at: now,
                    });
                }
            }
            if let Some(val) = c.late {
                let mut s = sign(self.me, Body::Ds { instance: self.me, value: bit(val) });
                for &b in self.byz.iter().filter(|&&b| b != self.me).take(self.f.saturating_sub(1)) {
                    s = s.countersign(b);
                }
                let k = s.chain.len() as i64;
                out.push(Action::Inject {
                    to,
                    msg: Message::one(s),
                    at: now + self.round * k,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BaEnumReport {
    pub n: usize,
    pub f: usize,
    pub runs: usize,
    pub agreement_violations: usize,
    pub validity_violations: usize,
    pub undecided: usize,
}

fn ba_run(n: usize, f: usize, inputs: &[bool], plans: &BTreeMap<PartyId, Vec<(PartyId, DsChoice)>>) -> Vec<Option<Value>> {
    let big_delta = Time::int(10);
    let byz: Vec<PartyId> = plans.keys().copied().collect();
    let honest: Vec<PartyId> = (0..n).filter(|p| !plans.contains_key(p)).collect();
    let mut roles = Vec::new();
    let mut k = 0;
    for p in 0..n {
        if let Some(plan) = plans.get(&p) {
            roles.push(Role::Byzantine(Box::new(DsAdversary {
                me: p,
                byz: byz.clone(),
                plan: plan.clone(),
                round: big_delta * 2,
                f,
            })));
        } else {
            roles.push(Role::Honest(Box::new(BaParty::new(p, n, f, big_delta, bit(inputs[k])))));
            k += 1;
        }
    }
    let world = World {
        resilience: Resilience::new(n, f, Setting::SyncMajority).overridden(),
        model: TimingModel::Synchrony {
            delta: big_delta,
            big_delta,
            sigma: Time::ZERO,
        },
        roles,
        start_offsets: vec![Time::ZERO; n],
        delay: Box::new(fixed_delay(big_delta)),
        broadcaster: honest[0],
        external_validity: crate::simnet::accept_all(),
        separate_keys: false,
    };
    let trace = run(world, big_delta * (4 * (f as i64 + 4))).expect("BA enumeration run");
    let commits = trace.commits();
    honest.iter().map(|&p| commits[p].as_ref().map(|(_, v)| v.clone())).collect()
}

fn judge(report: &mut BaEnumReport, inputs: &[bool], decisions: &[Option<Value>]) {
    report.runs += 1;
    if decisions.iter().any(Option::is_none) {
        report.undecided += 1;
        return;
    }
    let ds: BTreeSet<&Value> = decisions.iter().flatten().collect();
    if ds.len() > 1 {
        report.agreement_violations += 1;
    }
    if inputs.iter().all(|&b| b == inputs[0]) && ds.iter().any(|d| **d != bit(inputs[0])) {
        report.validity_violations += 1;
    }
}

/// Byzantine agreement over every honest input vector and every output plan
/// of the first Byzantine party; further Byzantine parties range over
/// consistent, split and silent plans.
pub fn ba_enumeration(n: usize, f: usize) -> BaEnumReport {
    let mut report = BaEnumReport {
        n,
        f,
        ..Default::default()
    };
    let byz: Vec<PartyId> = (n - f..n).collect();
    let honest: Vec<PartyId> = (0..n - f).collect();
    let h = honest.len();
    let choices = DsChoice::all();
    // Every assignment of a choice to each honest recipient.
    let mut full_plans: Vec<Vec<(PartyId, DsChoice)>> = vec![Vec::new()];
    for &p in &honest {
        full_plans = full_plans
            .into_iter()
            .flat_map(|pl| {
                choices.iter().map(move |&c| {
                    let mut x = pl.clone();
                    x.push((p, c));
                    x
                })
            })
            .collect();
    }
    let simple = |c: &dyn Fn(usize) -> DsChoice| -> Vec<(PartyId, DsChoice)> {
        honest.iter().enumerate().map(|(i, &p)| (p, c(i))).collect()
    };
    let none = DsChoice { first: (false, false), late: None };
    let side_plans: Vec<Vec<(PartyId, DsChoice)>> = vec![
        simple(&|_| none),
        simple(&|_| DsChoice { first: (true, false), late: None }),
        simple(&|_| DsChoice { first: (false, true), late: None }),
        simple(&|i| DsChoice { first: (i % 2 == 0, i % 2 == 1), late: None }),
        simple(&|i| DsChoice { first: (false, false), late: (i == 0).then_some(true) }),
    ];
    for mask in 0..(1u32 << h) {
        let inputs: Vec<bool> = (0..h).map(|i| mask >> i & 1 == 1).collect();
        for plan in &full_plans {
            let rest: Vec<Vec<(PartyId, DsChoice)>> = if byz.len() > 1 { side_plans.clone() } else { vec![Vec::new()] };
            for side in &rest {
                let mut plans = BTreeMap::new();
                plans.insert(byz[0], plan.clone());
                for &b in &byz[1..] {
                    plans.insert(b, side.clone());
                }
                let d = ba_run(n, f, &inputs, &plans);
                judge(&mut report, &inputs, &d);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{Script, Silent};
    use crate::harness::RunConfig;
    use crate::proto_psync::PsyncVbb;
    use crate::protocol::ProtocolId;
    use crate::scenarios::generic::AdversaryId;
    use crate::sig::Proof;
    use crate::simnet::accept_all;

    #[test]
    fn clean_psync_run_has_no_violations() {
        let c = RunConfig::new(ProtocolId::PsyncVbb, 4, 1);
        let t = c.run().unwrap();
        assert!(scan_psync(&t, &ThresholdSet::raw(4, 1), &*accept_all()).is_empty());
        assert_eq!(psync_commit_views(&t).len(), 4);
        assert!(psync_commit_views(&t).iter().all(|(_, _, w, _)| *w == 1));
    }

    /// Three colluding parties make party 3 commit 7 in view 1, then publish
    /// timeout entries that lock 8 for the same view.
    #[test]
    fn commit_lock_catches_conflicting_certificate() {
        let n = 4;
        let t = ThresholdSet::raw(n, 1);
        let slot = |v: u64, j: PartyId| sign(0, Body::Slot(Value::num(v), 1)).countersign(j);
        let script = Script(move |_now: Time, input: Input<'_>| {
            if !matches!(input, Input::Start) {
                return Vec::new();
            }
            let prop = sign(0, Body::ViewPropose(Box::new(sign(0, Body::Slot(Value::num(7), 1))), Proof::None));
            let mut items = vec![prop];
            items.extend((0..3).map(|j| sign(j, Body::ViewVote(Box::new(slot(7, j))))));
            let timeouts = Message(vec![
                sign(0, Body::Timeout(Box::new(sign(0, Body::Slot(Value::Bot, 1))))),
                sign(1, Body::Timeout(Box::new(slot(8, 1)))),
                sign(2, Body::Timeout(Box::new(sign(2, Body::Slot(Value::Bot, 1))))),
            ]);
            vec![
                Action::Send { to: vec![3], msg: Message(items) },
                Action::Send { to: vec![3], msg: timeouts },
            ]
        });
        let mut roles = vec![Role::Byzantine(Box::new(script))];
        roles.extend((1..3).map(|_| Role::Byzantine(Box::new(Silent) as Box<dyn Party>)));
        roles.push(Role::Honest(Box::new(PsyncVbb::new(3, t, Time::int(10), Value::num(7), accept_all()))));
        let world = World {
            resilience: Resilience::new(n, 3, Setting::PsyncFast).overridden(),
            model: TimingModel::PartialSynchrony {
                big_delta: Time::int(10),
                gst: Time::ZERO,
            },
            roles,
            start_offsets: vec![Time::ZERO; n],
            delay: Box::new(fixed_delay(Time::int(1))),
            broadcaster: 0,
            external_validity: accept_all(),
            separate_keys: false,
        };
        let trace = run(world, Time::int(100)).unwrap();
        assert_eq!(trace.commits()[3].as_ref().map(|(_, v)| v.clone()), Some(Value::num(7)));
        let found = scan_psync(&trace, &t, &*accept_all());
        assert!(found.iter().any(|v| v.lemma == "commit-lock"), "{found:?}");
    }

    #[test]
    fn fast_lock_catches_out_of_region_split() {
        let c = RunConfig::new(ProtocolId::Bb2Delta, 4, 2)
            .overridden()
            .with_adversary(AdversaryId::Equivocate);
        let t = c.run().unwrap();
        assert!(scan_sync_locks(&t).iter().all(|v| v.lemma == "fast-lock"));
        assert!(!scan_sync_locks(&t).is_empty());
    }

    #[test]
    fn graded_scan_is_clean_in_good_case() {
        let c = RunConfig::new(ProtocolId::Bb15, 5, 2).with_delta(Time::int(2));
        let t = c.run().unwrap();
        assert!(scan_graded(&t, &DGrid::new(5, Time::int(10)), Time::int(10)).is_empty());
        assert_eq!(fast_commits(&t).len(), 5);
    }

    #[test]
    fn ba_choices_and_small_enumeration() {
        let all = DsChoice::all();
        assert_eq!(all.len(), 12);
        assert_eq!(all.iter().collect::<BTreeSet<_>>().len(), 12);
        let r = ba_enumeration(3, 1);
        assert_eq!(r.runs, 4 * 144);
        assert_eq!((r.agreement_violations, r.validity_violations, r.undecided), (0, 0, 0));
    }
}
