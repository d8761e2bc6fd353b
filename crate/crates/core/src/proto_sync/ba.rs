//! Byzantine agreement from n parallel Dolev-Strong broadcasts in lock-step
//! rounds of 2Δ, tolerating invocation skew of up to Δ.

use std::collections::{BTreeMap, BTreeSet};

use crate::sig::{sign, Body, Message, Signed};
use crate::simnet::{Action, Input, Party};
use crate::time::Time;
use crate::types::{PartyId, Value};

pub const BA_DECIDE_TAG: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaConfig {
    pub round_duration: Time,
    /// f+1 relay rounds plus the decision round.
    pub rounds: u32,
    pub input: Value,
}

impl BaConfig {
    pub fn new(f: usize, big_delta: Time, input: Value) -> Self {
        BaConfig {
            round_duration: big_delta * 2,
            rounds: f as u32 + 2,
            input,
        }
    }
}

/// Plurality of the non-⊥ outcomes; ties go to the smallest value.
pub fn plurality(outcomes: &[Value]) -> Value {
    let mut counts: BTreeMap<&Value, usize> = BTreeMap::new();
    for v in outcomes.iter().filter(|v| !v.is_bot()) {
        *counts.entry(v).or_default() += 1;
    }
    let mut best: Option<(&Value, usize)> = None;
    for (v, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v.clone()).unwrap_or(Value::Bot)
}

#[derive(Debug, Clone)]
pub struct Ba {
    me: PartyId,
    n: usize,
    f: usize,
    big_delta: Time,
    t0: Option<Time>,
    extracted: Vec<BTreeSet<Value>>,
    early: Vec<(Time, Signed)>,
    pub decided: Option<Value>,
}

impl Ba {
    pub fn new(me: PartyId, n: usize, f: usize, big_delta: Time) -> Self {
        Ba {
            me,
            n,
            f,
            big_delta,
            t0: None,
            extracted: vec![BTreeSet::new(); n],
            early: Vec::new(),
            decided: None,
        }
    }

    pub fn invoked(&self) -> bool {
        self.t0.is_some()
    }

    pub fn invoke(&mut self, now: Time, cfg: &BaConfig) -> Vec<Action> {
        let mut out = Vec::new();
        if self.t0.is_some() {
            return out;
        }
        self.t0 = Some(now);
        let mine = sign(
            self.me,
            Body::Ds {
                instance: self.me,
                value: cfg.input.clone(),
            },
        );
        out.push(Action::multicast(self.n, Message::one(mine)));
        out.push(Action::SetTimer {
            at: now + cfg.round_duration * (cfg.rounds as i64 - 1),
            tag: BA_DECIDE_TAG,
        });
        for (at, item) in std::mem::take(&mut self.early) {
            self.accept(at, &item, &mut out);
        }
        out
    }

    pub fn on_item(&mut self, now: Time, item: &Signed) -> Vec<Action> {
        let mut out = Vec::new();
        if !matches!(item.body, Body::Ds { .. }) || self.decided.is_some() {
            return out;
        }
        if self.t0.is_none() {
            self.early.push((now, item.clone()));
        } else {
            self.accept(now, item, &mut out);
        }
        out
    }

    fn accept(&mut self, arrival: Time, item: &Signed, out: &mut Vec<Action>) {
        let Body::Ds { instance, value } = &item.body else { return };
        let k = item.chain.len();
        let distinct: BTreeSet<_> = item.chain.iter().collect();
        if k == 0
            || *instance >= self.n
            || item.chain[0] != *instance
            || distinct.len() != k
            || item.chain.iter().any(|&p| p >= self.n)
        {
            return;
        }
        let t0 = self.t0.expect("accept after invoke");
        if arrival > t0 + self.big_delta * (2 * k as i64) {
            return;
        }
        let seen = &mut self.extracted[*instance];
        if seen.len() >= 2 || seen.contains(value) {
            return;
        }
        seen.insert(value.clone());
        if k <= self.f && !item.chain.contains(&self.me) {
            out.push(Action::multicast(self.n, Message::one(item.countersign(self.me))));
        }
    }

    /// Per-instance outcomes: the unique extracted value, else ⊥.
    pub fn outcomes(&self) -> Vec<Value> {
        self.extracted
            .iter()
            .map(|s| match s.len() {
                1 => s.iter().next().cloned().unwrap_or(Value::Bot),
                _ => Value::Bot,
            })
            .collect()
    }

    pub fn on_timer(&mut self, tag: u64) -> Option<Value> {
        if tag != BA_DECIDE_TAG || self.decided.is_some() || self.t0.is_none() {
            return None;
        }
        let d = plurality(&self.outcomes());
        self.decided = Some(d.clone());
        Some(d)
    }
}

/// A party that runs only the BA, invoked at its start with a fixed input.
pub struct BaParty {
    ba: Ba,
    cfg: BaConfig,
}

impl BaParty {
    pub fn new(me: PartyId, n: usize, f: usize, big_delta: Time, input: Value) -> Self {
        BaParty {
            ba: Ba::new(me, n, f, big_delta),
            cfg: BaConfig::new(f, big_delta, input),
        }
    }
}

impl Party for BaParty {
    fn step(&mut self, now: Time, input: Input<'_>) -> Vec<Action> {
        match input {
            Input::Start => self.ba.invoke(now, &self.cfg),
            Input::Deliver { msg, .. } => msg.items().iter().flat_map(|it| self.ba.on_item(now, it)).collect(),
            Input::Timer(tag) => match self.ba.on_timer(tag) {
                Some(v) => vec![Action::Commit(v), Action::Terminate],
                None => Vec::new(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plurality_rules() {
        let v = |x| Value::num(x);
        assert_eq!(plurality(&[v(1), v(2), v(2)]), v(2));
        assert_eq!(plurality(&[v(2), v(1)]), v(1));
        assert_eq!(plurality(&[Value::Bot, Value::Bot, v(3)]), v(3));
        assert_eq!(plurality(&[Value::Bot, Value::Bot]), Value::Bot);
        assert_eq!(plurality(&[]), Value::Bot);
    }

    #[test]
    fn config_shape() {
        let c = BaConfig::new(2, Time::int(10), Value::Bot);
        assert_eq!(c.rounds, 4);
        assert_eq!(c.round_duration, Time::int(20));
    }

    #[test]
    fn late_chain_rejected_and_relay_bounded() {
        let mut ba = Ba::new(1, 3, 1, Time::int(10));
        let cfg = BaConfig::new(1, Time::int(10), Value::num(1));
        ba.invoke(Time::ZERO, &cfg);
        let one = sign(0, Body::Ds { instance: 0, value: Value::num(5) });
        assert!(ba.on_item(Time::int(21), &one).is_empty());
        let out = ba.on_item(Time::int(20), &one);
        assert_eq!(out.len(), 1);
        let two = sign(2, Body::Ds { instance: 2, value: Value::num(6) }).countersign(0);
        // Two signatures accepted until 4Δ; no relay since f+1 links already.
        assert!(ba.on_item(Time::int(40), &two).is_empty());
        assert_eq!(ba.outcomes()[2], Value::num(6));
    }

    #[test]
    fn equivocating_instance_is_bot() {
        let mut ba = Ba::new(1, 3, 1, Time::int(10));
        ba.invoke(Time::ZERO, &BaConfig::new(1, Time::int(10), Value::num(1)));
        for x in [5, 6] {
            ba.on_item(Time::int(1), &sign(0, Body::Ds { instance: 0, value: Value::num(x) }));
        }
        assert_eq!(ba.outcomes()[0], Value::Bot);
    }
}
