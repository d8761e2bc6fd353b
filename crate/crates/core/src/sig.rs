//! Simulated signatures as attribution chains over structured payloads.
//!
//! A [`Signed`] value is a body plus the ordered list of parties that signed
//! it, innermost first. Nothing here is cryptographic: the simulator checks at
//! send time that every link was produced by the sender or was already known
//! to it (see `simnet::knowledge`).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::time::Time;
use crate::types::{PartyId, Value};

/// Message bodies used by all protocols.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    /// ⟨propose, v⟩
    Propose(Value),
    /// ⟨vote, v⟩
    Vote(Value),
    /// ⟨vote, ⟨propose, v⟩_L⟩
    Echo(Box<Signed>),
    /// ⟨vote, d, ⟨propose, v⟩_L⟩
    TimedVote(Time, Box<Signed>),
    /// ⟨commit, v⟩
    Commit(Value),
    /// ⟨v, w⟩
    Slot(Value, u64),
    /// ⟨propose, ⟨v, w⟩_L, S⟩
    ViewPropose(Box<Signed>, Proof),
    /// ⟨vote, ⟨v, w⟩_{L,i}⟩
    ViewVote(Box<Signed>),
    /// ⟨timeout, ⟨v, w⟩_{L,i}⟩ or ⟨timeout, ⟨⊥, w⟩_i⟩
    Timeout(Box<Signed>),
    /// ⟨status, w, C⟩
    Status(u64, Certificate),
    /// Dolev-Strong relay for the instance broadcast by `instance`.
    Ds { instance: PartyId, value: Value },
}

/// Justification attached to a view proposal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proof {
    None,
    Cert(Certificate),
    Statuses(Vec<Signed>),
}

/// A set of countersigned `(value, view)` entries. View 0 with no entries is
/// the empty certificate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Certificate {
    pub view: u64,
    pub entries: Vec<Signed>,
}

impl Certificate {
    pub fn empty() -> Self {
        Certificate {
            view: 0,
            entries: Vec::new(),
        }
    }

    pub fn is_empty_cert(&self) -> bool {
        self.view == 0 && self.entries.is_empty()
    }
}

/// A body with its signer chain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Signed {
    pub body: Body,
    pub chain: Vec<PartyId>,
}

/// One link of a signer chain, identified by content.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub signer: PartyId,
    pub digest: String,
}

/// Sign `body` as `party`.
pub fn sign(party: PartyId, body: Body) -> Signed {
    Signed {
        body,
        chain: vec![party],
    }
}

impl Signed {
    /// Append `party` to the chain.
    pub fn countersign(&self, party: PartyId) -> Signed {
        let mut s = self.clone();
        s.chain.push(party);
        s
    }

    /// The first signer.
    pub fn origin(&self) -> Option<PartyId> {
        self.chain.first().copied()
    }

    /// The last signer.
    pub fn outer(&self) -> Option<PartyId> {
        self.chain.last().copied()
    }

    /// The prefix of this payload signed by the first `k` signers.
    pub fn prefix(&self, k: usize) -> Signed {
        Signed {
            body: self.body.clone(),
            chain: self.chain[..k].to_vec(),
        }
    }

    /// Every link with the digest of the prefix it covers.
    pub fn signatures(&self) -> Vec<Signature> {
        (1..=self.chain.len())
            .map(|k| Signature {
                signer: self.chain[k - 1],
                digest: digest_of(&self.prefix(k)),
            })
            .collect()
    }

    /// Signed payloads nested directly inside the body.
    pub fn children(&self) -> Vec<&Signed> {
        match &self.body {
            Body::Echo(s) | Body::TimedVote(_, s) | Body::ViewVote(s) | Body::Timeout(s) => {
                vec![s.as_ref()]
            }
            Body::ViewPropose(s, proof) => {
                let mut out = vec![s.as_ref()];
                match proof {
                    Proof::None => {}
                    Proof::Cert(c) => out.extend(c.entries.iter()),
                    Proof::Statuses(ss) => out.extend(ss.iter()),
                }
                out
            }
            Body::Status(_, c) => c.entries.iter().collect(),
            Body::Propose(_)
            | Body::Vote(_)
            | Body::Commit(_)
            | Body::Slot(..)
            | Body::Ds { .. } => Vec::new(),
        }
    }

    /// Visit this payload and every nested payload, outermost first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Signed)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }
}

/// A wire message: a bundle of signed items.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Message(pub Vec<Signed>);

impl Message {
    pub fn one(s: Signed) -> Self {
        Message(vec![s])
    }

    pub fn items(&self) -> &[Signed] {
        &self.0
    }

    pub fn digest(&self) -> String {
        digest_of(self)
    }
}

/// Truncated hex sha256 of the JSON encoding.
pub fn digest_of<T: Serialize>(x: &T) -> String {
    let bytes = serde_json::to_vec(x).expect("payloads always serialize");
    let h = Sha256::digest(&bytes);
    hex::encode(&h[..8])
}

/// Values proposed under `broadcaster`'s signature anywhere in `received`.
///
/// Two or more distinct values means the broadcaster equivocated.
pub fn extract_broadcaster_values<'a>(
    received: impl IntoIterator<Item = &'a Signed>,
    broadcaster: PartyId,
) -> BTreeSet<Value> {
    let mut out = BTreeSet::new();
    for s in received {
        s.walk(&mut |x| {
            if x.origin() == Some(broadcaster) {
                if let Body::Propose(v) | Body::Slot(v, _) = &x.body {
                    out.insert(v.clone());
                }
            }
        });
    }
    out
}
