//! Protocol catalog and honest-party construction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::proto_async::Brb;
use crate::proto_psync::PsyncVbb;
use crate::proto_sync::{SyncBb, SyncKind};
use crate::simnet::{Party, Role, Validity};
use crate::time::Time;
use crate::types::{PartyId, Setting, ThresholdSet, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolId {
    /// 2-round-BRB, asynchrony.
    Brb,
    /// (5f−1)-psync-VBB.
    PsyncVbb,
    /// 2δ-BB.
    #[serde(rename = "bb-2delta")]
    Bb2Delta,
    /// (Δ+δ)-BB for f = n/3.
    BbN3,
    /// (Δ+δ)-BB with synchronized start.
    #[serde(rename = "bb-syncstart")]
    BbSyncStart,
    /// (Δ+1.5δ)-BB.
    #[serde(rename = "bb-1p5")]
    Bb15,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 6] = [
        ProtocolId::Brb,
        ProtocolId::PsyncVbb,
        ProtocolId::Bb2Delta,
        ProtocolId::BbN3,
        ProtocolId::BbSyncStart,
        ProtocolId::Bb15,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProtocolId::Brb => "brb",
            ProtocolId::PsyncVbb => "psync-vbb",
            ProtocolId::Bb2Delta => "bb-2delta",
            ProtocolId::BbN3 => "bb-n3",
            ProtocolId::BbSyncStart => "bb-syncstart",
            ProtocolId::Bb15 => "bb-1p5",
        }
    }

    /// Resilience region the protocol is designed for at this `(n, f)`.
    pub fn setting(&self, n: usize, f: usize) -> Setting {
        match self {
            ProtocolId::Brb => Setting::AsyncBrb,
            ProtocolId::PsyncVbb => Setting::PsyncFast,
            ProtocolId::Bb2Delta => Setting::SyncThird,
            ProtocolId::BbN3 if 3 * f == n => Setting::SyncEqThird,
            ProtocolId::BbN3 => Setting::SyncThird,
            ProtocolId::BbSyncStart | ProtocolId::Bb15 => Setting::SyncMinority,
        }
    }

    pub fn sync_kind(&self, m: u32) -> Option<SyncKind> {
        match self {
            ProtocolId::Bb2Delta => Some(SyncKind::TwoDelta),
            ProtocolId::BbN3 => Some(SyncKind::EqThird),
            ProtocolId::BbSyncStart => Some(SyncKind::SyncStart),
            ProtocolId::Bb15 => Some(SyncKind::OneAndHalf { m }),
            _ => None,
        }
    }

    pub fn is_sync(&self) -> bool {
        self.sync_kind(1).is_some()
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProtocolId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown protocol {s:?}"))
    }
}

/// Everything an honest party needs besides its index.
#[derive(Clone)]
pub struct ProtoParams {
    pub protocol: ProtocolId,
    pub t: ThresholdSet,
    pub broadcaster: PartyId,
    pub big_delta: Time,
    pub m: u32,
    pub input: Value,
    pub valid: Validity,
}

impl ProtoParams {
    /// Input of party `p`: the broadcast value for the broadcaster, a
    /// party-specific value otherwise (used by psync leaders of later views).
    pub fn input_of(&self, p: PartyId) -> Value {
        if p == self.broadcaster {
            self.input.clone()
        } else {
            Value::num(1000 + p as u64)
        }
    }

    pub fn honest_party(&self, me: PartyId) -> Box<dyn Party> {
        let input = self.input_of(me);
        match self.protocol {
            ProtocolId::Brb => Box::new(Brb::new(me, self.broadcaster, Some(input), self.t)),
            ProtocolId::PsyncVbb => Box::new(PsyncVbb::new(me, self.t, self.big_delta, input, self.valid.clone())),
            p => Box::new(SyncBb::new(
                p.sync_kind(self.m).expect("sync protocol"),
                me,
                self.broadcaster,
                self.t,
                self.big_delta,
                Some(input),
            )),
        }
    }

    pub fn honest_roles(&self) -> Vec<Role> {
        (0..self.t.n).map(|p| Role::Honest(self.honest_party(p))).collect()
    }
}
