use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::simnet::{Delay, DelayPolicy, SendCtx};
use crate::time::Time;
use crate::types::PartyId;

/// Which parties a rule endpoint matches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "group", rename_all = "snake_case")]
pub enum Sel {
    Any,
    In(String),
    NotIn(String),
}

/// Which messages a rule applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum When {
    Always,
    /// Messages sent while the sender was starting (round 0).
    StartStep,
    /// Everything else.
    AfterStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DelayRule {
    After(Time),
    Drop,
    /// Delivered at `max(send + base, at)`.
    NotBefore { base: Time, at: Time },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rule {
    pub from: Sel,
    pub to: Sel,
    pub when: When,
    pub delay: DelayRule,
}

/// Group-to-group delays; the first matching rule wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DelayTable {
    #[serde(skip)]
    groups: BTreeMap<String, BTreeSet<PartyId>>,
    pub rules: Vec<Rule>,
    pub default: DelayRule,
}

impl DelayTable {
    pub fn new(groups: &BTreeMap<String, BTreeSet<PartyId>>, default: DelayRule) -> Self {
        DelayTable {
            groups: groups.clone(),
            rules: Vec::new(),
            default,
        }
    }

    /// Delay for `from → to` in both directions.
    pub fn both(self, a: &str, b: &str, d: DelayRule) -> Self {
        self.one(a, b, d).one(b, a, d)
    }

    pub fn one(self, from: &str, to: &str, d: DelayRule) -> Self {
        self.rule(Sel::In(from.into()), Sel::In(to.into()), When::Always, d)
    }

    pub fn rule(mut self, from: Sel, to: Sel, when: When, delay: DelayRule) -> Self {
        assert!(
            [&from, &to].iter().all(|s| match s {
                Sel::In(g) | Sel::NotIn(g) => self.groups.contains_key(g),
                Sel::Any => true,
            }),
            "rule names an unknown group"
        );
        self.rules.push(Rule { from, to, when, delay });
        self
    }

    fn matches(&self, s: &Sel, p: PartyId) -> bool {
        match s {
            Sel::Any => true,
            Sel::In(g) => self.groups[g].contains(&p),
            Sel::NotIn(g) => !self.groups[g].contains(&p),
        }
    }

    pub fn lookup(&self, from: PartyId, to: PartyId, start_step: bool) -> DelayRule {
        self.rules
            .iter()
            .find(|r| {
                self.matches(&r.from, from)
                    && self.matches(&r.to, to)
                    && match r.when {
                        When::Always => true,
                        When::StartStep => start_step,
                        When::AfterStart => !start_step,
                    }
            })
            .map(|r| r.delay)
            .unwrap_or(self.default)
    }
}

impl DelayPolicy for DelayTable {
    fn delay(&mut self, ctx: &SendCtx<'_>) -> Delay {
        match self.lookup(ctx.from, ctx.to, ctx.from_start_step) {
            DelayRule::After(d) => Delay::After(d),
            DelayRule::Drop => Delay::Drop,
            DelayRule::NotBefore { base, at } => Delay::After((ctx.send_time + base).max(at) - ctx.send_time),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups() -> BTreeMap<String, BTreeSet<PartyId>> {
        [("A".to_string(), BTreeSet::from([1])), ("B".to_string(), BTreeSet::from([2, 3]))]
            .into_iter()
            .collect()
    }

    #[test]
    fn first_match_wins() {
        let t = DelayTable::new(&groups(), DelayRule::After(Time::int(1)))
            .one("A", "B", DelayRule::After(Time::int(5)))
            .rule(Sel::In("A".into()), Sel::Any, When::Always, DelayRule::Drop);
        assert_eq!(t.lookup(1, 3, false), DelayRule::After(Time::int(5)));
        assert_eq!(t.lookup(1, 0, false), DelayRule::Drop);
        assert_eq!(t.lookup(2, 1, false), DelayRule::After(Time::int(1)));
    }

    #[test]
    fn start_step_filter() {
        let t = DelayTable::new(&groups(), DelayRule::After(Time::int(1))).rule(
            Sel::In("A".into()),
            Sel::NotIn("A".into()),
            When::AfterStart,
            DelayRule::Drop,
        );
        assert_eq!(t.lookup(1, 2, true), DelayRule::After(Time::int(1)));
        assert_eq!(t.lookup(1, 2, false), DelayRule::Drop);
        assert_eq!(t.lookup(1, 1, false), DelayRule::After(Time::int(1)));
    }
}
