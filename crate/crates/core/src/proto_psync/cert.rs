use std::collections::{BTreeMap, BTreeSet};

use crate::sig::{Body, Certificate, Proof, Signed};
use crate::types::{PartyId, ThresholdSet, Value};

/// Round-robin leader of view `w ≥ 1`.
pub fn leader_of(w: u64, n: usize) -> PartyId {
    ((w.max(1) - 1) % n as u64) as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CertStatus {
    Invalid(String),
    ValidNoLock,
    ValidLocks(Value),
    /// The empty view-0 certificate, which locks every externally valid value.
    ValidLocksAny,
}

impl CertStatus {
    pub fn locks(&self, v: &Value, valid: &dyn Fn(&Value) -> bool) -> bool {
        match self {
            CertStatus::ValidLocks(x) => x == v,
            CertStatus::ValidLocksAny => !v.is_bot() && valid(v),
            _ => false,
        }
    }

    pub fn locks_something(&self) -> bool {
        matches!(self, CertStatus::ValidLocks(_) | CertStatus::ValidLocksAny)
    }
}

/// The `(value, outer signer)` of a well-formed view-`w` entry.
pub fn parse_entry(
    e: &Signed,
    w: u64,
    t: &ThresholdSet,
    valid: &dyn Fn(&Value) -> bool,
) -> Result<(Value, PartyId), String> {
    let Body::Slot(x, ew) = &e.body else {
        return Err("entry is not a (value, view) pair".into());
    };
    if *ew != w {
        return Err(format!("entry for view {ew}, expected {w}"));
    }
    match (x.is_bot(), &e.chain[..]) {
        (true, &[j]) if j < t.n => Ok((x.clone(), j)),
        (false, &[l, j]) if l == leader_of(w, t.n) && j < t.n => {
            if valid(x) {
                Ok((x.clone(), j))
            } else {
                Err(format!("value {x} is not externally valid"))
            }
        }
        _ => Err(format!("bad signer chain {:?} for view {w}", e.chain)),
    }
}

/// Validity and lock of a set of view-`w` entries.
pub fn check_certificate(
    entries: &[Signed],
    w: u64,
    t: &ThresholdSet,
    valid: &dyn Fn(&Value) -> bool,
) -> CertStatus {
    let mut signers = BTreeSet::new();
    let mut leader_signed: BTreeMap<Value, Vec<PartyId>> = BTreeMap::new();
    for e in entries {
        let (x, j) = match parse_entry(e, w, t, valid) {
            Ok(p) => p,
            Err(r) => return CertStatus::Invalid(r),
        };
        if !signers.insert(j) {
            return CertStatus::Invalid(format!("duplicate signer {j}"));
        }
        if !x.is_bot() {
            leader_signed.entry(x).or_default().push(j);
        }
    }
    if signers.len() < t.q_cert || t.q_cert == 0 {
        return CertStatus::Invalid(format!("{} signers, need {}", signers.len(), t.q_cert));
    }
    let leader = leader_of(w, t.n);
    let locks: Vec<&Value> = leader_signed
        .iter()
        .filter(|(_, js)| {
            let rule1 = leader_signed.len() == 1 && js.len() >= t.q_lock_lo;
            let rule2 = js.iter().filter(|&&j| j != leader).count() >= t.q_lock_hi;
            rule1 || rule2
        })
        .map(|(v, _)| v)
        .collect();
    match locks[..] {
        [v] => CertStatus::ValidLocks(v.clone()),
        // Two candidate locks can only come from an oversized entry set;
        // neither is usable as a lock.
        _ => CertStatus::ValidNoLock,
    }
}

/// Status of a full certificate, treating the empty one specially.
pub fn cert_status(c: &Certificate, t: &ThresholdSet, valid: &dyn Fn(&Value) -> bool) -> CertStatus {
    if c.view == 0 {
        if c.entries.is_empty() {
            CertStatus::ValidLocksAny
        } else {
            CertStatus::Invalid("view-0 certificate with entries".into())
        }
    } else {
        check_certificate(&c.entries, c.view, t, valid)
    }
}

/// A well-formed status message for view `u`: `(signer, certificate, status)`.
pub fn parse_status<'a>(
    s: &'a Signed,
    u: u64,
    t: &ThresholdSet,
    valid: &dyn Fn(&Value) -> bool,
) -> Option<(PartyId, &'a Certificate, CertStatus)> {
    let Body::Status(su, c) = &s.body else { return None };
    let &[j] = &s.chain[..] else { return None };
    if *su != u || c.view > u || j >= t.n {
        return None;
    }
    let st = cert_status(c, t, valid);
    st.locks_something().then_some((j, c, st))
}

/// Inner `⟨v, w⟩_L` slot and proof of a well-formed view proposal.
pub fn parse_proposal<'a>(prop: &'a Signed, t: &ThresholdSet) -> Option<(u64, &'a Value, &'a Signed, &'a Proof)> {
    let Body::ViewPropose(inner, proof) = &prop.body else { return None };
    let Body::Slot(v, w) = &inner.body else { return None };
    let l = leader_of(*w, t.n);
    if *w == 0 || prop.chain != [l] || inner.chain != [l] || v.is_bot() {
        return None;
    }
    Some((*w, v, inner, proof))
}

/// Whether a view proposal is justified.
pub fn validate_proposal(prop: &Signed, t: &ThresholdSet, valid: &dyn Fn(&Value) -> bool) -> bool {
    let Some((w, v, _, proof)) = parse_proposal(prop, t) else {
        return false;
    };
    if !valid(v) {
        return false;
    }
    if w == 1 {
        return true;
    }
    match proof {
        Proof::None => false,
        Proof::Cert(c) => c.view == w - 1 && cert_status(c, t, valid).locks(v, valid),
        Proof::Statuses(ss) => {
            let mut signers = BTreeSet::new();
            let mut parsed = Vec::new();
            for s in ss {
                let Some((j, c, st)) = parse_status(s, w - 1, t, valid) else {
                    return false;
                };
                if !signers.insert(j) {
                    return false;
                }
                parsed.push((c.view, st));
            }
            if signers.len() < t.q_cert {
                return false;
            }
            let top = parsed.iter().map(|(h, _)| *h).max().unwrap_or(0);
            parsed
                .iter()
                .any(|(h, st)| *h == top && st.locks(v, valid))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sig::sign;
    use crate::types::{thresholds, Resilience, Setting};

    fn t41() -> ThresholdSet {
        thresholds(&Resilience::new(4, 1, Setting::PsyncFast)).unwrap()
    }

    fn any_valid(v: &Value) -> bool {
        !v.is_bot()
    }

    fn bot(j: PartyId, w: u64) -> Signed {
        sign(j, Body::Slot(Value::Bot, w))
    }

    fn led(v: u64, w: u64, j: PartyId, n: usize) -> Signed {
        sign(leader_of(w, n), Body::Slot(Value::num(v), w)).countersign(j)
    }

    #[test]
    fn leaders_rotate() {
        assert_eq!(leader_of(1, 4), 0);
        assert_eq!(leader_of(2, 4), 1);
        assert_eq!(leader_of(5, 4), 0);
    }

    #[test]
    fn rule_one_lock() {
        let e = vec![bot(1, 1), bot(2, 1), led(9, 1, 3, 4)];
        assert_eq!(check_certificate(&e, 1, &t41(), &any_valid), CertStatus::ValidLocks(Value::num(9)));
    }

    #[test]
    fn rule_two_lock_despite_conflict() {
        let e = vec![led(9, 1, 1, 4), led(8, 1, 2, 4), led(9, 1, 3, 4)];
        assert_eq!(check_certificate(&e, 1, &t41(), &any_valid), CertStatus::ValidLocks(Value::num(9)));
    }

    #[test]
    fn conflict_without_quorum_is_no_lock() {
        // Leader's own entry does not count for rule two.
        let e = vec![led(9, 1, 0, 4), led(8, 1, 2, 4), led(9, 1, 3, 4)];
        assert_eq!(check_certificate(&e, 1, &t41(), &any_valid), CertStatus::ValidNoLock);
    }

    #[test]
    fn invalid_cases() {
        let t = t41();
        assert!(matches!(check_certificate(&[bot(1, 1), bot(2, 1)], 1, &t, &any_valid), CertStatus::Invalid(_)));
        assert!(matches!(check_certificate(&[bot(1, 1), bot(1, 1), bot(2, 1)], 1, &t, &any_valid), CertStatus::Invalid(_)));
        assert!(matches!(check_certificate(&[bot(1, 2), bot(2, 1), bot(3, 1)], 1, &t, &any_valid), CertStatus::Invalid(_)));
        let never = |_: &Value| false;
        assert!(matches!(check_certificate(&[bot(1, 1), bot(2, 1), led(9, 1, 3, 4)], 1, &t, &never), CertStatus::Invalid(_)));
        // A value entry must carry the leader's signature first.
        let forged = sign(2, Body::Slot(Value::num(9), 1)).countersign(3);
        assert!(matches!(check_certificate(&[bot(1, 1), bot(2, 1), forged], 1, &t, &any_valid), CertStatus::Invalid(_)));
    }

    #[test]
    fn all_bot_certificate_has_no_lock() {
        let e = vec![bot(1, 1), bot(2, 1), bot(3, 1)];
        assert_eq!(check_certificate(&e, 1, &t41(), &any_valid), CertStatus::ValidNoLock);
    }

    #[test]
    fn empty_locks_any_valid_value() {
        let st = cert_status(&Certificate::empty(), &t41(), &any_valid);
        assert!(st.locks(&Value::num(3), &any_valid));
        assert!(!st.locks(&Value::Bot, &any_valid));
    }

    fn propose(w: u64, v: u64, proof: Proof) -> Signed {
        let l = leader_of(w, 4);
        let inner = sign(l, Body::Slot(Value::num(v), w));
        sign(l, Body::ViewPropose(Box::new(inner), proof))
    }

    #[test]
    fn proposal_validation() {
        let t = t41();
        assert!(validate_proposal(&propose(1, 4, Proof::None), &t, &any_valid));
        assert!(!validate_proposal(&propose(2, 4, Proof::None), &t, &any_valid));

        let cert = Certificate {
            view: 1,
            entries: vec![bot(1, 1), bot(2, 1), led(9, 1, 3, 4)],
        };
        assert!(validate_proposal(&propose(2, 9, Proof::Cert(cert.clone())), &t, &any_valid));
        assert!(!validate_proposal(&propose(2, 8, Proof::Cert(cert)), &t, &any_valid));

        let statuses: Vec<Signed> = (0..3).map(|j| sign(j, Body::Status(1, Certificate::empty()))).collect();
        assert!(validate_proposal(&propose(2, 8, Proof::Statuses(statuses.clone())), &t, &any_valid));
        assert!(!validate_proposal(&propose(2, 8, Proof::Statuses(statuses[..2].to_vec())), &t, &any_valid));
    }

    #[test]
    fn status_highest_certificate_wins() {
        let t = thresholds(&Resilience::new(9, 2, Setting::PsyncFast)).unwrap();
        let n = 9;
        let cert_at = |w: u64, v: u64| Certificate {
            view: w,
            entries: (0..7).map(|j| led(v, w, j + 1, n)).collect(),
        };
        let mut ss: Vec<Signed> = (0..5).map(|j| sign(j, Body::Status(5, Certificate::empty()))).collect();
        ss.push(sign(5, Body::Status(5, cert_at(3, 33))));
        ss.push(sign(6, Body::Status(5, cert_at(5, 55))));
        let prop = |v: u64| {
            let inner = sign(leader_of(6, n), Body::Slot(Value::num(v), 6));
            sign(leader_of(6, n), Body::ViewPropose(Box::new(inner), Proof::Statuses(ss.clone())))
        };
        assert!(validate_proposal(&prop(55), &t, &any_valid));
        assert!(!validate_proposal(&prop(33), &t, &any_valid));
    }
}
