//! Deterministic discrete-event simulator.
//!
//! Parties are state machines driven by [`Input`]s at their local time and
//! answering with [`Action`]s. The simulator owns a single global event queue,
//! validates every honest-to-honest delay against the [`TimingModel`], checks
//! unforgeability at send time and records a [`Trace`].

mod knowledge;
pub mod rounds;
pub mod trace;

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::sig::Message;
use crate::time::Time;
use crate::types::{PartyId, Resilience, ResilienceError, Value};

pub use rounds::{assign_async_rounds, RoundAssignment};
pub use trace::{compare_local_history, first_divergence, Event, EventKind, StepInput, Trace};

use knowledge::Knowledge;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimingModel {
    Synchrony {
        delta: Time,
        big_delta: Time,
        sigma: Time,
    },
    PartialSynchrony {
        big_delta: Time,
        gst: Time,
    },
    Asynchrony,
}

impl TimingModel {
    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            TimingModel::Synchrony {
                delta,
                big_delta,
                sigma,
            } => {
                if !(Time::ZERO < delta && delta <= big_delta) {
                    return Err(SimError::Config(format!(
                        "synchrony needs 0 < δ ≤ Δ, got δ={delta} Δ={big_delta}"
                    )));
                }
                if sigma.is_negative() || sigma > delta {
                    return Err(SimError::Config(format!(
                        "synchrony needs 0 ≤ σ ≤ δ, got σ={sigma} δ={delta}"
                    )));
                }
            }
            TimingModel::PartialSynchrony { big_delta, gst } => {
                if gst.is_negative() || big_delta <= Time::ZERO {
                    return Err(SimError::Config(format!(
                        "partial synchrony needs GST ≥ 0 and Δ > 0, got GST={gst} Δ={big_delta}"
                    )));
                }
            }
            TimingModel::Asynchrony => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            TimingModel::Synchrony { .. } => "sync",
            TimingModel::PartialSynchrony { .. } => "psync",
            TimingModel::Asynchrony => "async",
        }
    }
}

/// What a party is reacting to.
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Start,
    Deliver { from: PartyId, msg: &'a Message },
    Timer(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// Send to each listed party; delays come from the world's delay policy.
    Send { to: Vec<PartyId>, msg: Message },
    /// Byzantine only: deliver at global time `at`, or silently withhold if
    /// the message carries a signature the coalition cannot produce yet.
    Inject { to: PartyId, msg: Message, at: Time },
    /// Fire `Input::Timer(tag)` at local time `at`.
    SetTimer { at: Time, tag: u64 },
    Commit(Value),
    Terminate,
}

impl Action {
    pub fn multicast(n: usize, msg: Message) -> Action {
        Action::Send {
            to: (0..n).collect(),
            msg,
        }
    }
}

/// A simulated party.
pub trait Party {
    fn step(&mut self, now: Time, input: Input<'_>) -> Vec<Action>;
}

pub enum Role {
    Honest(Box<dyn Party>),
    Byzantine(Box<dyn Party>),
}

impl Role {
    pub fn is_honest(&self) -> bool {
        matches!(self, Role::Honest(_))
    }

    fn party(&mut self) -> &mut dyn Party {
        match self {
            Role::Honest(p) | Role::Byzantine(p) => p.as_mut(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delay {
    After(Time),
    Drop,
}

/// Per-recipient information handed to the delay policy.
pub struct SendCtx<'a> {
    pub from: PartyId,
    pub to: PartyId,
    pub msg: &'a Message,
    pub send_time: Time,
    pub send_event: usize,
    /// The message was produced while handling `Input::Start`.
    pub from_start_step: bool,
    pub from_honest: bool,
    pub to_honest: bool,
    pub model: &'a TimingModel,
    pub trace: &'a Trace,
}

pub trait DelayPolicy {
    fn delay(&mut self, ctx: &SendCtx<'_>) -> Delay;
}

impl<F: FnMut(&SendCtx<'_>) -> Delay> DelayPolicy for F {
    fn delay(&mut self, ctx: &SendCtx<'_>) -> Delay {
        self(ctx)
    }
}

/// Every link takes exactly `d`.
pub fn fixed_delay(d: Time) -> impl FnMut(&SendCtx<'_>) -> Delay {
    move |_| Delay::After(d)
}

pub type Validity = Arc<dyn Fn(&Value) -> bool + Send + Sync>;

pub fn accept_all() -> Validity {
    Arc::new(|v: &Value| !v.is_bot())
}

pub struct World {
    pub resilience: Resilience,
    pub model: TimingModel,
    pub roles: Vec<Role>,
    pub start_offsets: Vec<Time>,
    pub delay: Box<dyn DelayPolicy>,
    pub broadcaster: PartyId,
    pub external_validity: Validity,
    /// When set, a Byzantine party may sign only as itself and must relay
    /// other signatures it has seen, like everyone else.
    pub separate_keys: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Resilience(#[from] ResilienceError),
    #[error("model violation on message {send_event} ({from}→{to}, sent at {send_time}): {reason}")]
    ModelViolation {
        send_event: usize,
        from: PartyId,
        to: PartyId,
        send_time: Time,
        reason: String,
    },
    #[error("fairness violation on message {send_event} ({from}→{to}): {reason}")]
    Fairness {
        send_event: usize,
        from: PartyId,
        to: PartyId,
        reason: String,
    },
    #[error("forgery: party {party} emitted a signature of party {signer} it never received")]
    Forgery { party: PartyId, signer: PartyId },
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Class {
    Start = 0,
    Deliver = 1,
    Timer = 2,
}

#[derive(Debug)]
enum What {
    Start,
    Deliver {
        from: PartyId,
        msg: Arc<Message>,
        send: usize,
    },
    Timer(u64),
}

#[derive(Debug)]
struct Pending {
    time: Time,
    class: Class,
    src: PartyId,
    seq: u64,
    dst: PartyId,
    what: What,
}

impl Pending {
    fn key(&self) -> (Time, &Class, PartyId, u64) {
        (self.time, &self.class, self.src, self.seq)
    }
}

impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        self.key() == o.key()
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Pending {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.key().cmp(&o.key())
    }
}

struct Sim {
    model: TimingModel,
    delay: Box<dyn DelayPolicy>,
    horizon: Time,
    queue: BinaryHeap<Reverse<Pending>>,
    seq: Vec<u64>,
    started: Vec<bool>,
    terminated: Vec<bool>,
    knowledge: Knowledge,
    trace: Trace,
}

impl Sim {
    fn push(&mut self, time: Time, class: Class, src: PartyId, dst: PartyId, what: What) {
        let seq = self.seq[src];
        self.seq[src] += 1;
        self.queue.push(Reverse(Pending {
            time,
            class,
            src,
            seq,
            dst,
            what,
        }));
    }

    fn record(&mut self, g: Time, party: PartyId, step: usize, kind: EventKind) -> usize {
        let l = g - self.trace.offsets[party];
        self.trace.events.push(Event {
            g,
            party,
            l,
            step,
            kind,
        });
        self.trace.events.len() - 1
    }

    fn check_delay(&self, ctx: &SendCtx<'_>, d: Delay) -> Result<(), SimError> {
        let violation = |reason: String| SimError::ModelViolation {
            send_event: ctx.send_event,
            from: ctx.from,
            to: ctx.to,
            send_time: ctx.send_time,
            reason,
        };
        if let Delay::After(x) = d {
            if x.is_negative() {
                return Err(violation(format!("negative delay {x}")));
            }
        }
        if !(ctx.from_honest && ctx.to_honest) {
            return Ok(());
        }
        match (self.model, d) {
            (TimingModel::Synchrony { delta, .. }, Delay::After(x)) => {
                if x > delta {
                    return Err(violation(format!("delay {x} exceeds δ={delta}")));
                }
            }
            (TimingModel::PartialSynchrony { big_delta, gst }, Delay::After(x)) => {
                let bound = ctx.send_time.max(gst) + big_delta;
                if ctx.send_time + x > bound {
                    return Err(violation(format!(
                        "delivery at {} after max(send, GST)+Δ = {bound}",
                        ctx.send_time + x
                    )));
                }
            }
            (TimingModel::Asynchrony, Delay::After(x)) => {
                if ctx.send_time + x > self.horizon {
                    return Err(SimError::Fairness {
                        send_event: ctx.send_event,
                        from: ctx.from,
                        to: ctx.to,
                        reason: format!("delivery at {} is past the horizon {}", ctx.send_time + x, self.horizon),
                    });
                }
            }
            (TimingModel::Asynchrony, Delay::Drop) => {
                return Err(SimError::Fairness {
                    send_event: ctx.send_event,
                    from: ctx.from,
                    to: ctx.to,
                    reason: "honest message dropped".into(),
                })
            }
            (_, Delay::Drop) => return Err(violation("honest message dropped".into())),
        }
        Ok(())
    }

    fn apply(
        &mut self,
        party: PartyId,
        g: Time,
        step: usize,
        actions: Vec<Action>,
    ) -> Result<(), SimError> {
        let honest = self.trace.honest[party];
        let from_start = self.trace.steps[step].input == StepInput::Start;
        for a in actions {
            if self.terminated[party] {
                break;
            }
            match a {
                Action::Send { to, msg } => {
                    if let Err(signer) = self.knowledge.check(party, &msg) {
                        return Err(SimError::Forgery { party, signer });
                    }
                    self.knowledge.learn(party, &msg);
                    let msg = Arc::new(msg);
                    let send = self.record(
                        g,
                        party,
                        step,
                        EventKind::Send {
                            to: to.clone(),
                            msg: msg.clone(),
                        },
                    );
                    for dst in to {
                        if dst >= self.trace.n {
                            return Err(SimError::Config(format!(
                                "party {party} sent to nonexistent party {dst}"
                            )));
                        }
                        let ctx = SendCtx {
                            from: party,
                            to: dst,
                            msg: &msg,
                            send_time: g,
                            send_event: send,
                            from_start_step: from_start,
                            from_honest: honest,
                            to_honest: self.trace.honest[dst],
                            model: &self.model,
                            trace: &self.trace,
                        };
                        let d = self.delay.delay(&ctx);
                        self.check_delay(&ctx, d)?;
                        if let Delay::After(x) = d {
                            self.push(
                                g + x,
                                Class::Deliver,
                                party,
                                dst,
                                What::Deliver {
                                    from: party,
                                    msg: msg.clone(),
                                    send,
                                },
                            );
                        }
                    }
                }
                Action::Inject { to, msg, at } => {
                    if honest {
                        return Err(SimError::Config(format!(
                            "honest party {party} used a Byzantine-only injection"
                        )));
                    }
                    if to >= self.trace.n || at < g {
                        return Err(SimError::Config(format!(
                            "bad injection by {party}: to {to} at {at} (now {g})"
                        )));
                    }
                    if self.knowledge.check(party, &msg).is_err() {
                        continue;
                    }
                    self.knowledge.learn(party, &msg);
                    let msg = Arc::new(msg);
                    let send = self.record(
                        g,
                        party,
                        step,
                        EventKind::Send {
                            to: vec![to],
                            msg: msg.clone(),
                        },
                    );
                    self.push(
                        at,
                        Class::Deliver,
                        party,
                        to,
                        What::Deliver {
                            from: party,
                            msg,
                            send,
                        },
                    );
                }
                Action::SetTimer { at, tag } => {
                    let at_g = (at + self.trace.offsets[party]).max(g);
                    self.push(at_g, Class::Timer, party, party, What::Timer(tag));
                }
                Action::Commit(v) => {
                    self.record(g, party, step, EventKind::Commit(v));
                }
                Action::Terminate => {
                    self.record(g, party, step, EventKind::Terminate);
                    self.terminated[party] = true;
                }
            }
        }
        Ok(())
    }
}

/// Execute `world` until quiescence or until the next event would be past `horizon`.
pub fn run(world: World, horizon: Time) -> Result<Trace, SimError> {
    let World {
        resilience,
        model,
        mut roles,
        start_offsets,
        delay,
        broadcaster,
        external_validity: _,
        separate_keys,
    } = world;
    resilience.check()?;
    model.validate()?;
    let n = resilience.n;
    if roles.len() != n || start_offsets.len() != n {
        return Err(SimError::Config(format!(
            "world has {} roles and {} offsets for n={n}",
            roles.len(),
            start_offsets.len()
        )));
    }
    if broadcaster >= n {
        return Err(SimError::Config(format!("broadcaster {broadcaster} out of range")));
    }
    let honest: Vec<bool> = roles.iter().map(Role::is_honest).collect();
    let byz = honest.iter().filter(|h| !**h).count();
    if byz > resilience.f {
        return Err(SimError::Config(format!(
            "{byz} Byzantine parties exceed f={}",
            resilience.f
        )));
    }
    for (p, &o) in start_offsets.iter().enumerate() {
        if o.is_negative() {
            return Err(SimError::Config(format!("party {p} has negative start offset {o}")));
        }
        if let TimingModel::Synchrony { sigma, .. } = model {
            if honest[p] && o > sigma {
                return Err(SimError::Config(format!(
                    "honest party {p} starts at {o}, beyond skew σ={sigma}"
                )));
            }
        }
    }

    let mut sim = Sim {
        model,
        delay,
        horizon,
        queue: BinaryHeap::new(),
        seq: vec![0; n],
        started: vec![false; n],
        terminated: vec![false; n],
        knowledge: Knowledge::new(&honest, separate_keys),
        trace: Trace {
            n,
            broadcaster,
            honest,
            offsets: start_offsets.clone(),
            model,
            events: Vec::new(),
            steps: Vec::new(),
        },
    };
    for (p, &o) in start_offsets.iter().enumerate() {
        sim.push(o, Class::Start, p, p, What::Start);
    }

    while let Some(Reverse(ev)) = sim.queue.pop() {
        if ev.time > horizon {
            break;
        }
        let p = ev.dst;
        // A terminated party still reads deliveries (they count as steps for
        // round numbering) but never acts; its timers are dropped.
        if sim.terminated[p] && matches!(ev.what, What::Timer(_)) {
            continue;
        }
        if !sim.started[p] && !matches!(ev.what, What::Start) {
            let at = start_offsets[p];
            sim.push(at, ev.class, ev.src, p, ev.what);
            continue;
        }
        let step = sim.trace.steps.len();
        let now = ev.time - start_offsets[p];
        let (input, kind) = match &ev.what {
            What::Start => (StepInput::Start, EventKind::Start),
            What::Deliver { from, msg, send } => (
                StepInput::Deliver,
                EventKind::Deliver {
                    from: *from,
                    msg: msg.clone(),
                    send: *send,
                },
            ),
            What::Timer(t) => (StepInput::Timer, EventKind::TimerFire(*t)),
        };
        sim.trace.steps.push(trace::StepInfo {
            party: p,
            input,
            first_event: sim.trace.events.len(),
        });
        sim.record(ev.time, p, step, kind);
        if sim.terminated[p] {
            if let What::Deliver { msg, .. } = &ev.what {
                sim.knowledge.learn(p, msg);
            }
            continue;
        }
        let actions = match &ev.what {
            What::Start => {
                sim.started[p] = true;
                roles[p].party().step(now, Input::Start)
            }
            What::Deliver { from, msg, .. } => {
                sim.knowledge.learn(p, msg);
                roles[p].party().step(now, Input::Deliver { from: *from, msg })
            }
            What::Timer(t) => roles[p].party().step(now, Input::Timer(*t)),
        };
        sim.apply(p, ev.time, step, actions)?;
    }
    Ok(sim.trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{RunConfig, Schedule};
    use crate::protocol::ProtocolId;
    use crate::sig::{sign, Body};
    use crate::types::Setting;
    use proptest::prelude::*;

    /// Party 0 pings everyone at start; others answer once; 0 commits on the
    /// first answer.
    struct Ping {
        me: PartyId,
        n: usize,
        done: bool,
    }

    impl Party for Ping {
        fn step(&mut self, _now: Time, input: Input<'_>) -> Vec<Action> {
            match input {
                Input::Start if self.me == 0 => vec![Action::Send {
                    to: (1..self.n).collect(),
                    msg: Message::one(sign(0, Body::Propose(Value::num(1)))),
                }],
                Input::Deliver { from: 0, msg } => vec![Action::Send {
                    to: vec![0],
                    msg: Message::one(msg.items()[0].countersign(self.me)),
                }],
                Input::Deliver { .. } if !self.done => {
                    self.done = true;
                    vec![Action::Commit(Value::num(1)), Action::Terminate]
                }
                _ => Vec::new(),
            }
        }
    }

    fn ping_world(n: usize, model: TimingModel, delay: Box<dyn DelayPolicy>) -> World {
        World {
            resilience: Resilience::new(n, 0, Setting::AsyncBrb),
            model,
            roles: (0..n)
                .map(|me| Role::Honest(Box::new(Ping { me, n, done: false })))
                .collect(),
            start_offsets: vec![Time::ZERO; n],
            delay,
            broadcaster: 0,
            external_validity: accept_all(),
            separate_keys: false,
        }
    }

    fn sync(delta: i64) -> TimingModel {
        TimingModel::Synchrony {
            delta: Time::int(delta),
            big_delta: Time::int(10),
            sigma: Time::ZERO,
        }
    }

    #[test]
    fn ping_pong_times_and_rounds() {
        let t = run(ping_world(3, sync(2), Box::new(fixed_delay(Time::int(2)))), Time::int(100)).unwrap();
        assert_eq!(t.commits()[0], Some((Time::int(4), Value::num(1))));
        let r = assign_async_rounds(&t);
        // Steps: 3 starts, 2 pings delivered, 2 answers delivered.
        assert_eq!(r.step_round, vec![0, 0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn slow_honest_link_is_rejected() {
        let e = run(ping_world(2, sync(2), Box::new(fixed_delay(Time::int(3)))), Time::int(100)).unwrap_err();
        assert!(matches!(e, SimError::ModelViolation { from: 0, to: 1, .. }));
    }

    #[test]
    fn psync_holds_until_gst_plus_delta() {
        let model = TimingModel::PartialSynchrony {
            big_delta: Time::int(10),
            gst: Time::int(50),
        };
        let early = |first: i64| {
            move |ctx: &SendCtx<'_>| Delay::After(Time::int(if ctx.send_time < Time::int(50) { first } else { 10 }))
        };
        let t = run(ping_world(2, model, Box::new(early(60))), Time::int(200)).unwrap();
        assert_eq!(t.commits()[0], Some((Time::int(70), Value::num(1))));
        let e = run(ping_world(2, model, Box::new(early(61))), Time::int(200)).unwrap_err();
        assert!(matches!(e, SimError::ModelViolation { .. }));
    }

    #[test]
    fn async_drop_is_unfair() {
        let w = ping_world(2, TimingModel::Asynchrony, Box::new(|_: &SendCtx<'_>| Delay::Drop));
        assert!(matches!(run(w, Time::int(10)).unwrap_err(), SimError::Fairness { .. }));
    }

    #[test]
    fn bad_models_are_rejected() {
        let bad = TimingModel::Synchrony {
            delta: Time::int(3),
            big_delta: Time::int(2),
            sigma: Time::ZERO,
        };
        assert!(bad.validate().is_err());
        let skew = TimingModel::Synchrony {
            delta: Time::int(2),
            big_delta: Time::int(2),
            sigma: Time::int(3),
        };
        assert!(skew.validate().is_err());
    }

    /// Sends one message signed as `signer` on start.
    struct Forger {
        signer: PartyId,
        inject: bool,
    }

    impl Party for Forger {
        fn step(&mut self, now: Time, input: Input<'_>) -> Vec<Action> {
            let msg = Message::one(sign(self.signer, Body::Vote(Value::num(9))));
            match input {
                Input::Start if self.inject => vec![Action::Inject { to: 0, msg, at: now + Time::int(1) }],
                Input::Start => vec![Action::Send { to: vec![0], msg }],
                _ => Vec::new(),
            }
        }
    }

    fn forger_world(roles: Vec<Role>, separate_keys: bool) -> World {
        let n = roles.len();
        World {
            resilience: Resilience::new(n, n - 1, Setting::SyncMajority).overridden(),
            model: sync(1),
            roles,
            start_offsets: vec![Time::ZERO; n],
            delay: Box::new(fixed_delay(Time::int(1))),
            broadcaster: 0,
            external_validity: accept_all(),
            separate_keys,
        }
    }

    fn idle() -> Box<dyn Party> {
        Box::new(crate::adversary::Silent)
    }

    #[test]
    fn honest_signature_cannot_be_forged() {
        let w = forger_world(
            vec![Role::Honest(idle()), Role::Byzantine(Box::new(Forger { signer: 0, inject: false }))],
            false,
        );
        assert_eq!(run(w, Time::int(10)).unwrap_err(), SimError::Forgery { party: 1, signer: 0 });
    }

    #[test]
    fn forged_injection_is_withheld() {
        let w = forger_world(
            vec![Role::Honest(idle()), Role::Byzantine(Box::new(Forger { signer: 0, inject: true }))],
            false,
        );
        let t = run(w, Time::int(10)).unwrap();
        assert!(!t.events.iter().any(|e| matches!(e.kind, EventKind::Send { .. } | EventKind::Deliver { .. })));
    }

    #[test]
    fn coalition_shares_keys_unless_separated() {
        let roles = || {
            vec![
                Role::Honest(idle()),
                Role::Byzantine(Box::new(Forger { signer: 2, inject: false })),
                Role::Byzantine(idle()),
            ]
        };
        let t = run(forger_world(roles(), false), Time::int(10)).unwrap();
        assert_eq!(t.events.iter().filter(|e| matches!(e.kind, EventKind::Deliver { .. })).count(), 1);
        assert_eq!(
            run(forger_world(roles(), true), Time::int(10)).unwrap_err(),
            SimError::Forgery { party: 1, signer: 2 }
        );
    }

    #[test]
    fn horizon_cuts_the_run() {
        let t = run(ping_world(3, sync(2), Box::new(fixed_delay(Time::int(2)))), Time::int(3)).unwrap();
        assert!(t.commits()[0].is_none());
        assert!(t.events.iter().all(|e| e.g <= Time::int(3)));
    }

    fn brb(n: usize, f: usize, seed: u64) -> Trace {
        RunConfig::new(ProtocolId::Brb, n, f)
            .with_schedule(Schedule::Layered { seed })
            .run()
            .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn trace_well_formed(seed in any::<u64>(), big in any::<bool>()) {
            let (n, f) = if big { (7, 2) } else { (4, 1) };
            let t = brb(n, f, seed);
            let mut sent = std::collections::BTreeSet::new();
            for (i, e) in t.events.iter().enumerate() {
                if i > 0 {
                    prop_assert!(t.events[i - 1].g <= e.g);
                }
                prop_assert_eq!(e.l, e.g - t.offsets[e.party]);
                match &e.kind {
                    EventKind::Send { .. } => {
                        sent.insert(i);
                    }
                    EventKind::Deliver { send, .. } => prop_assert!(sent.contains(send)),
                    _ => {}
                }
            }
            for p in t.honest_parties() {
                let c = t.events.iter().filter(|e| e.party == p && matches!(e.kind, EventKind::Commit(_))).count();
                prop_assert!(c <= 1);
            }
        }

        #[test]
        fn runs_are_deterministic(seed in any::<u64>()) {
            prop_assert_eq!(brb(4, 1, seed).to_jsonl(), brb(4, 1, seed).to_jsonl());
        }

        #[test]
        fn rounds_are_contiguous_blocks(seed in any::<u64>()) {
            let t = brb(4, 1, seed);
            let r = assign_async_rounds(&t);
            for w in r.step_round.windows(2) {
                prop_assert!(w[1] == w[0] || w[1] == w[0] + 1 || (w[0] == 0 && w[1] == 1) || (w[0] == 1 && w[1] == 0));
            }
            for (i, e) in t.events.iter().enumerate() {
                if let EventKind::Deliver { send, .. } = e.kind {
                    let (sr, dr) = (r.message_round(send), r.event_round[i]);
                    prop_assert!(sr <= dr && dr <= sr + 1);
                }
            }
        }

        #[test]
        fn sync_deliveries_respect_delta(seed in any::<u64>()) {
            let t = RunConfig::new(ProtocolId::BbSyncStart, 5, 2)
                .with_delta(Time::int(3))
                .with_schedule(Schedule::Seeded { seed })
                .run()
                .unwrap();
            for e in &t.events {
                if let EventKind::Deliver { send, .. } = e.kind {
                    prop_assert!(e.g - t.events[send].g <= Time::int(3));
                }
            }
        }
    }
}
