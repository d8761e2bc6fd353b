use std::collections::HashSet;

use crate::sig::{Message, Signed};
use crate::types::PartyId;

/// Signed prefixes each party has seen. Byzantine parties share one pool.
pub(super) struct Knowledge {
    honest: Vec<bool>,
    sets: Vec<HashSet<Signed>>,
    separate: bool,
}

impl Knowledge {
    pub(super) fn new(honest: &[bool], separate: bool) -> Self {
        Knowledge {
            honest: honest.to_vec(),
            sets: vec![HashSet::new(); honest.len() + 1],
            separate,
        }
    }

    fn owner(&self, p: PartyId) -> usize {
        if self.honest[p] {
            p
        } else {
            self.honest.len()
        }
    }

    fn may_sign(&self, sender: PartyId, signer: PartyId) -> bool {
        signer == sender
            || (!self.separate && signer < self.honest.len() && !self.honest[sender] && !self.honest[signer])
    }

    /// `Err(signer)` names the first link `sender` could not have produced.
    pub(super) fn check(&self, sender: PartyId, msg: &Message) -> Result<(), PartyId> {
        let known = &self.sets[self.owner(sender)];
        let mut bad = None;
        for item in msg.items() {
            item.walk(&mut |x: &Signed| {
                if bad.is_some() {
                    return;
                }
                for k in 1..=x.chain.len() {
                    let signer = x.chain[k - 1];
                    if !self.may_sign(sender, signer) && !known.contains(&x.prefix(k)) {
                        bad = Some(signer);
                        return;
                    }
                }
            });
        }
        bad.map_or(Ok(()), Err)
    }

    pub(super) fn learn(&mut self, p: PartyId, msg: &Message) {
        let o = self.owner(p);
        let set = &mut self.sets[o];
        for item in msg.items() {
            item.walk(&mut |x: &Signed| {
                for k in 1..=x.chain.len() {
                    let pre = x.prefix(k);
                    if !set.contains(&pre) {
                        set.insert(pre);
                    }
                }
            });
        }
    }
}
