//! Byzantine behaviours as message-level combinators.

use std::collections::{BTreeMap, BTreeSet};

use crate::sig::Message;
use crate::simnet::{Action, EventKind, Input, Party, Trace};
use crate::time::Time;
use crate::types::PartyId;

/// Never sends anything.
pub struct Silent;

impl Party for Silent {
    fn step(&mut self, _: Time, _: Input<'_>) -> Vec<Action> {
        Vec::new()
    }
}

/// An inner behaviour seen through hear/talk filters.
pub struct Persona {
    pub inner: Box<dyn Party>,
    /// Senders whose messages reach this persona; `None` means everyone.
    pub hears: Option<BTreeSet<PartyId>>,
    /// Recipients this persona talks to; `None` means everyone.
    pub talks: Option<BTreeSet<PartyId>>,
    /// Only messages produced while starting are sent.
    pub start_only: bool,
    /// Nothing is sent from this local time on.
    pub stop_at: Option<Time>,
}

impl Persona {
    pub fn new(inner: Box<dyn Party>) -> Self {
        Persona {
            inner,
            hears: None,
            talks: None,
            start_only: false,
            stop_at: None,
        }
    }

    pub fn hears(mut self, s: impl IntoIterator<Item = PartyId>) -> Self {
        self.hears = Some(s.into_iter().collect());
        self
    }

    pub fn talks(mut self, s: impl IntoIterator<Item = PartyId>) -> Self {
        self.talks = Some(s.into_iter().collect());
        self
    }

    pub fn start_only(mut self) -> Self {
        self.start_only = true;
        self
    }

    pub fn stop_at(mut self, t: Time) -> Self {
        self.stop_at = Some(t);
        self
    }
}

const PERSONA_SHIFT: u32 = 48;
const LOOP_BIT: u64 = 1 << 47;

/// One or more personas sharing a party index. Each persona runs its own state
/// machine; messages a persona sends to its own index loop back to it alone,
/// immediately or after the loopback delay.
pub struct Personas {
    me: PartyId,
    list: Vec<Persona>,
    done: Vec<bool>,
    loopback: Option<Time>,
    looped: Vec<Message>,
}

impl Personas {
    pub fn new(me: PartyId, list: Vec<Persona>) -> Self {
        let done = vec![false; list.len()];
        Personas {
            me,
            list,
            done,
            loopback: None,
            looped: Vec::new(),
        }
    }

    /// Deliver self-addressed messages `d` after sending, as the network would.
    pub fn with_loopback(mut self, d: Time) -> Self {
        self.loopback = Some(d);
        self
    }

    pub fn single(me: PartyId, p: Persona) -> Self {
        Self::new(me, vec![p])
    }

    fn run_one(&mut self, k: usize, now: Time, input: Input<'_>, starting: bool, out: &mut Vec<Action>) {
        let mut queue: Vec<Message> = Vec::new();
        let mut acts = self.list[k].inner.step(now, input);
        loop {
            for a in acts {
                self.filter(k, now, starting, a, &mut queue, out);
            }
            let Some(m) = queue.pop() else { break };
            if self.done[k] {
                break;
            }
            acts = self.list[k].inner.step(
                now,
                Input::Deliver {
                    from: self.me,
                    msg: &m,
                },
            );
        }
    }

    fn filter(&mut self, k: usize, now: Time, starting: bool, a: Action, queue: &mut Vec<Message>, out: &mut Vec<Action>) {
        let p = &self.list[k];
        let muted = (p.start_only && !starting) || p.stop_at.is_some_and(|s| now >= s);
        match a {
            Action::Send { to, msg } => {
                if to.contains(&self.me) {
                    match self.loopback {
                        None => queue.insert(0, msg.clone()),
                        Some(d) => {
                            out.push(Action::SetTimer {
                                at: now + d,
                                tag: ((k as u64) << PERSONA_SHIFT) | LOOP_BIT | self.looped.len() as u64,
                            });
                            self.looped.push(msg.clone());
                        }
                    }
                }
                if muted {
                    return;
                }
                let to: Vec<PartyId> = to
                    .into_iter()
                    .filter(|&d| d != self.me && p.talks.as_ref().is_none_or(|t| t.contains(&d)))
                    .collect();
                if !to.is_empty() {
                    out.push(Action::Send { to, msg });
                }
            }
            Action::Inject { to, msg, at } => {
                if !muted && p.talks.as_ref().is_none_or(|t| t.contains(&to)) {
                    out.push(Action::Inject { to, msg, at });
                }
            }
            Action::SetTimer { at, tag } => out.push(Action::SetTimer {
                at,
                tag: ((k as u64) << PERSONA_SHIFT) | tag,
            }),
            Action::Terminate => self.done[k] = true,
            Action::Commit(_) => {}
        }
    }
}

impl Party for Personas {
    fn step(&mut self, now: Time, input: Input<'_>) -> Vec<Action> {
        let mut out = Vec::new();
        match input {
            Input::Start => {
                for k in 0..self.list.len() {
                    self.run_one(k, now, Input::Start, true, &mut out);
                }
            }
            Input::Deliver { from, msg } => {
                for k in 0..self.list.len() {
                    let hears = self.list[k].hears.as_ref().is_none_or(|h| h.contains(&from));
                    if hears && !self.done[k] {
                        self.run_one(k, now, Input::Deliver { from, msg }, false, &mut out);
                    }
                }
            }
            Input::Timer(tag) => {
                let k = (tag >> PERSONA_SHIFT) as usize;
                let inner = tag & ((1u64 << PERSONA_SHIFT) - 1);
                if k < self.list.len() && !self.done[k] && inner & LOOP_BIT != 0 {
                    let m = self.looped[(inner & !LOOP_BIT) as usize].clone();
                    let input = Input::Deliver { from: self.me, msg: &m };
                    self.run_one(k, now, input, false, &mut out);
                } else if k < self.list.len() && !self.done[k] {
                    self.run_one(k, now, Input::Timer(inner), false, &mut out);
                }
            }
        }
        out
    }
}

/// One message to re-deliver: sent at global `send`, delivered at global `deliver`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayItem {
    pub send: Time,
    pub deliver: Time,
    pub to: PartyId,
    pub msg: Message,
}

/// Messages `sender` delivered to `recipients` in `trace`.
pub fn replay_script(trace: &Trace, sender: PartyId, recipients: &BTreeSet<PartyId>, start_only: bool) -> Vec<ReplayItem> {
    trace
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Deliver { from, msg, send } if *from == sender && recipients.contains(&e.party) => {
                let s = &trace.events[*send];
                if start_only && !trace.step_is_start(s.step) {
                    return None;
                }
                Some(ReplayItem {
                    send: s.g,
                    deliver: e.g,
                    to: e.party,
                    msg: (**msg).clone(),
                })
            }
            _ => None,
        })
        .collect()
}

/// Re-sends recorded messages at their original global send and delivery
/// times. Messages carrying signatures the coalition cannot yet produce are
/// withheld by the simulator.
pub struct Replay {
    offset: Time,
    by_time: BTreeMap<Time, Vec<ReplayItem>>,
    slots: Vec<Time>,
}

impl Replay {
    /// `offset` is the replaying party's start offset in the new world.
    pub fn new(offset: Time, items: impl IntoIterator<Item = ReplayItem>) -> Self {
        let mut by_time: BTreeMap<Time, Vec<ReplayItem>> = BTreeMap::new();
        for it in items {
            by_time.entry(it.send).or_default().push(it);
        }
        let slots = by_time.keys().copied().collect();
        Replay { offset, by_time, slots }
    }
}

impl Party for Replay {
    fn step(&mut self, _now: Time, input: Input<'_>) -> Vec<Action> {
        match input {
            Input::Start => self
                .slots
                .iter()
                .enumerate()
                .map(|(k, &g)| Action::SetTimer {
                    at: g - self.offset,
                    tag: k as u64,
                })
                .collect(),
            Input::Timer(k) => {
                let Some(g) = self.slots.get(k as usize) else { return Vec::new() };
                self.by_time
                    .get(g)
                    .into_iter()
                    .flatten()
                    .map(|it| Action::Inject {
                        to: it.to,
                        msg: it.msg.clone(),
                        at: it.deliver,
                    })
                    .collect()
            }
            Input::Deliver { .. } => Vec::new(),
        }
    }
}

/// Behaviour given by a closure.
pub struct Script<F>(pub F);

impl<F: FnMut(Time, Input<'_>) -> Vec<Action>> Party for Script<F> {
    fn step(&mut self, now: Time, input: Input<'_>) -> Vec<Action> {
        (self.0)(now, input)
    }
}

const LATE_TAG: u64 = 1 << 62;

/// Starts the inner behaviour `by` local time units late, on a clock that
/// reads zero at its start; deliveries that arrive before then are held back
/// and handed over right after its start.
pub struct Late {
    inner: Box<dyn Party>,
    by: Time,
    started: bool,
    held: Vec<(PartyId, Message)>,
}

impl Late {
    pub fn new(inner: Box<dyn Party>, by: Time) -> Self {
        Late {
            inner,
            by,
            started: false,
            held: Vec::new(),
        }
    }

    fn shifted(&self, acts: Vec<Action>) -> Vec<Action> {
        acts.into_iter()
            .map(|a| match a {
                Action::SetTimer { at, tag } => Action::SetTimer { at: at + self.by, tag },
                other => other,
            })
            .collect()
    }
}

impl Party for Late {
    fn step(&mut self, now: Time, input: Input<'_>) -> Vec<Action> {
        let inner_now = now - self.by;
        let acts = match input {
            Input::Start => {
                return vec![Action::SetTimer {
                    at: now + self.by,
                    tag: LATE_TAG,
                }]
            }
            Input::Timer(LATE_TAG) if !self.started => {
                self.started = true;
                let mut out = self.inner.step(inner_now, Input::Start);
                for (from, msg) in std::mem::take(&mut self.held) {
                    out.extend(self.inner.step(inner_now, Input::Deliver { from, msg: &msg }));
                }
                out
            }
            Input::Deliver { from, msg } if !self.started => {
                self.held.push((from, msg.clone()));
                return Vec::new();
            }
            other => self.inner.step(inner_now, other),
        };
        self.shifted(acts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sig::{sign, Body};
    use crate::types::Value;

    /// Records every input with its local time; sends one self-addressed and
    /// one outside message on start and sets a timer at local 5.
    #[derive(Default)]
    struct Probe {
        seen: std::rc::Rc<std::cell::RefCell<Vec<(Time, String)>>>,
    }

    impl Party for Probe {
        fn step(&mut self, now: Time, input: Input<'_>) -> Vec<Action> {
            let label = match input {
                Input::Start => "start".to_string(),
                Input::Deliver { from, .. } => format!("from {from}"),
                Input::Timer(t) => format!("timer {t}"),
            };
            self.seen.borrow_mut().push((now, label));
            match input {
                Input::Start => vec![
                    Action::Send {
                        to: vec![0, 1],
                        msg: Message::one(sign(0, Body::Vote(Value::num(1)))),
                    },
                    Action::SetTimer { at: Time::int(5), tag: 3 },
                ],
                _ => Vec::new(),
            }
        }
    }

    fn t(x: i64) -> Time {
        Time::int(x)
    }

    #[test]
    fn late_shifts_clock_and_holds_deliveries() {
        let probe = Probe::default();
        let seen = probe.seen.clone();
        let mut late = Late::new(Box::new(probe), t(10));
        let msg = Message::one(sign(2, Body::Vote(Value::num(2))));
        assert_eq!(late.step(t(0), Input::Start), vec![Action::SetTimer { at: t(10), tag: LATE_TAG }]);
        assert!(late.step(t(4), Input::Deliver { from: 2, msg: &msg }).is_empty());
        let out = late.step(t(10), Input::Timer(LATE_TAG));
        assert!(out.contains(&Action::SetTimer { at: t(15), tag: 3 }));
        late.step(t(15), Input::Timer(3));
        let seen = seen.borrow();
        assert_eq!(
            *seen,
            vec![
                (t(0), "start".to_string()),
                (t(0), "from 2".to_string()),
                (t(5), "timer 3".to_string()),
            ]
        );
    }

    #[test]
    fn persona_filters_and_loops_back() {
        let probe = Probe::default();
        let seen = probe.seen.clone();
        let mut ps = Personas::single(0, Persona::new(Box::new(probe)).talks([2]));
        let out = ps.step(t(0), Input::Start);
        // The outside send to 1 is filtered; the self copy is handled at once.
        assert!(!out.iter().any(|a| matches!(a, Action::Send { .. })));
        assert_eq!(seen.borrow().len(), 2);

        let probe = Probe::default();
        let seen = probe.seen.clone();
        let mut ps = Personas::single(0, Persona::new(Box::new(probe))).with_loopback(t(2));
        let out = ps.step(t(0), Input::Start);
        assert!(out.contains(&Action::Send {
            to: vec![1],
            msg: Message::one(sign(0, Body::Vote(Value::num(1)))),
        }));
        let tag = out
            .iter()
            .find_map(|a| match a {
                Action::SetTimer { at, tag } if *at == t(2) => Some(*tag),
                _ => None,
            })
            .expect("loopback timer");
        ps.step(t(2), Input::Timer(tag));
        assert_eq!(seen.borrow().last(), Some(&(t(2), "from 0".to_string())));
    }

    #[test]
    fn start_only_persona_goes_quiet() {
        let mut ps = Personas::single(
            0,
            Persona::new(Box::new(Script(|_, _: Input<'_>| {
                vec![Action::Send {
                    to: vec![1],
                    msg: Message::one(sign(0, Body::Vote(Value::num(1)))),
                }]
            })))
            .start_only(),
        );
        assert_eq!(ps.step(t(0), Input::Start).len(), 1);
        let msg = Message::one(sign(1, Body::Vote(Value::num(1))));
        assert!(ps.step(t(1), Input::Deliver { from: 1, msg: &msg }).is_empty());
    }

    #[test]
    fn replay_injects_at_recorded_times() {
        let msg = Message::one(sign(0, Body::Vote(Value::num(1))));
        let item = ReplayItem {
            send: t(3),
            deliver: t(4),
            to: 1,
            msg: msg.clone(),
        };
        let mut r = Replay::new(t(1), [item]);
        assert_eq!(r.step(t(0), Input::Start), vec![Action::SetTimer { at: t(2), tag: 0 }]);
        assert_eq!(r.step(t(2), Input::Timer(0)), vec![Action::Inject { to: 1, msg, at: t(4) }]);
    }
}
