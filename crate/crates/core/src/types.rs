//! Identities, values and quorum arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Index of a party in `[0, n)`.
pub type PartyId = usize;

/// A broadcast value. `Bot` is ⊥ and sorts before every byte string.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Bot,
    Bytes(Vec<u8>),
}

impl Value {
    /// Eight-byte big-endian encoding of `v`, so numeric order matches byte order.
    pub fn num(v: u64) -> Self {
        Value::Bytes(v.to_be_bytes().to_vec())
    }

    pub fn is_bot(&self) -> bool {
        matches!(self, Value::Bot)
    }

    pub fn as_num(&self) -> Option<u64> {
        match self {
            Value::Bytes(b) if b.len() == 8 => {
                let mut a = [0u8; 8];
                a.copy_from_slice(b);
                Some(u64::from_be_bytes(a))
            }
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bot => write!(f, "⊥"),
            Value::Bytes(b) => match self.as_num() {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "0x{}", hex::encode(b)),
            },
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid value literal {0:?}")]
pub struct ParseValueError(pub String);

impl FromStr for Value {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t == "⊥" || t.eq_ignore_ascii_case("bot") {
            return Ok(Value::Bot);
        }
        if let Some(h) = t.strip_prefix("0x") {
            return hex::decode(h)
                .map(Value::Bytes)
                .map_err(|_| ParseValueError(s.to_string()));
        }
        t.parse::<u64>()
            .map(Value::num)
            .map_err(|_| ParseValueError(s.to_string()))
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Resilience regimes with their admissible `(n, f)` regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    AsyncBrb,
    PsyncFast,
    SyncThird,
    SyncEqThird,
    SyncMinority,
    SyncMajority,
}

impl Setting {
    /// The inequality defining the region, as printed in errors.
    pub fn region(&self) -> &'static str {
        match self {
            Setting::AsyncBrb => "n ≥ 3f+1",
            Setting::PsyncFast => "n ≥ 5f−1",
            Setting::SyncThird => "f < n/3",
            Setting::SyncEqThird => "f = n/3",
            Setting::SyncMinority => "n/3 < f < n/2",
            Setting::SyncMajority => "n/2 ≤ f < n",
        }
    }

    pub fn admits(&self, n: usize, f: usize) -> bool {
        match self {
            Setting::AsyncBrb => n > 3 * f,
            Setting::PsyncFast => n + 1 >= 5 * f,
            Setting::SyncThird => 3 * f < n,
            Setting::SyncEqThird => 3 * f == n,
            Setting::SyncMinority => 3 * f > n && 2 * f < n,
            Setting::SyncMajority => 2 * f >= n && f < n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResilienceError {
    #[error("(n={n}, f={f}) violates {region} for {setting:?}; pass the override flag to run it anyway")]
    OutOfRegion {
        n: usize,
        f: usize,
        setting: Setting,
        region: &'static str,
    },
    #[error("need n ≥ 1 and f < n, got n={n} f={f}")]
    Degenerate { n: usize, f: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resilience {
    pub n: usize,
    pub f: usize,
    pub setting: Setting,
    #[serde(default)]
    pub override_region: bool,
}

impl Resilience {
    pub fn new(n: usize, f: usize, setting: Setting) -> Self {
        Resilience {
            n,
            f,
            setting,
            override_region: false,
        }
    }

    pub fn overridden(mut self) -> Self {
        self.override_region = true;
        self
    }

    pub fn check(&self) -> Result<(), ResilienceError> {
        if self.n == 0 || self.f >= self.n {
            return Err(ResilienceError::Degenerate {
                n: self.n,
                f: self.f,
            });
        }
        if !self.override_region && !self.setting.admits(self.n, self.f) {
            return Err(ResilienceError::OutOfRegion {
                n: self.n,
                f: self.f,
                setting: self.setting,
                region: self.setting.region(),
            });
        }
        Ok(())
    }
}

/// Quorum sizes used across the protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub n: usize,
    pub f: usize,
    /// n − f
    pub q_nf: usize,
    /// f + 1
    pub q_f1: usize,
    /// 4f − 1
    pub q_cert: usize,
    /// 2f − 1
    pub q_lock_lo: usize,
    /// 2f
    pub q_lock_hi: usize,
}

impl ThresholdSet {
    /// Thresholds without the region check; for internal use after validation.
    pub fn raw(n: usize, f: usize) -> Self {
        ThresholdSet {
            n,
            f,
            q_nf: n - f,
            q_f1: f + 1,
            q_cert: (4 * f).saturating_sub(1),
            q_lock_lo: (2 * f).saturating_sub(1),
            q_lock_hi: 2 * f,
        }
    }
}

pub fn thresholds(r: &Resilience) -> Result<ThresholdSet, ResilienceError> {
    r.check()?;
    Ok(ThresholdSet::raw(r.n, r.f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn psync_thresholds_at_f1() {
        let t = thresholds(&Resilience::new(4, 1, Setting::PsyncFast)).unwrap();
        assert_eq!((t.q_cert, t.q_lock_lo, t.q_lock_hi), (3, 1, 2));
    }

    #[test]
    fn brb_quorum() {
        let t = thresholds(&Resilience::new(4, 1, Setting::AsyncBrb)).unwrap();
        assert_eq!(t.q_nf, 3);
    }

    #[test]
    fn out_of_region_names_inequality() {
        let e = thresholds(&Resilience::new(4, 2, Setting::PsyncFast)).unwrap_err();
        assert!(e.to_string().contains("n ≥ 5f−1"), "{e}");
        assert!(thresholds(&Resilience::new(4, 2, Setting::PsyncFast).overridden()).is_ok());
    }

    #[test]
    fn regions() {
        assert!(Setting::SyncEqThird.admits(3, 1));
        assert!(!Setting::SyncThird.admits(3, 1));
        assert!(Setting::SyncMinority.admits(5, 2));
        assert!(!Setting::SyncMinority.admits(4, 2));
        assert!(Setting::SyncMajority.admits(6, 4));
        assert!(Setting::PsyncFast.admits(9, 2));
        assert!(!Setting::PsyncFast.admits(8, 2));
    }

    #[test]
    fn value_order_and_text() {
        assert!(Value::Bot < Value::num(0));
        assert!(Value::num(1) < Value::num(256));
        assert_eq!(Value::num(7).to_string(), "7");
        assert_eq!(Value::Bytes(vec![1, 2]).to_string(), "0x0102");
        assert_eq!("⊥".parse::<Value>().unwrap(), Value::Bot);
        assert_eq!("0x0102".parse::<Value>().unwrap(), Value::Bytes(vec![1, 2]));
    }

    proptest! {
        #[test]
        fn quorum_intersection(f in 0usize..40, extra in 0usize..40) {
            let n = 3 * f + 1 + extra;
            let t = thresholds(&Resilience::new(n, f, Setting::AsyncBrb)).unwrap();
            prop_assert!(2 * t.q_nf > n + f);
        }

        #[test]
        fn value_round_trip(b in proptest::collection::vec(any::<u8>(), 0..12)) {
            let v = Value::Bytes(b);
            let back: Value = v.to_string().parse().unwrap();
            prop_assert_eq!(v, back);
        }
    }
}
