//! Generic Byzantine behaviours for any protocol, and the scripted
//! view-change cases for the partially synchronous protocol.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{Late, Persona, Personas, Silent};
use crate::harness::{ConfigError, RunConfig};
use crate::protocol::{ProtoParams, ProtocolId};
use crate::sig::Body;
use crate::simnet::{Delay, DelayPolicy, Party, Role, SendCtx, TimingModel, World};
use crate::time::Time;
use crate::types::{PartyId, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryId {
    /// The last f parties never send.
    SilentFollowers,
    /// The broadcaster never sends; the other corrupt parties follow the protocol.
    SilentBroadcaster,
    /// The broadcaster runs two copies with different inputs, one per half.
    Equivocate,
    /// Equivocation, with every other corrupt party voting on both sides.
    DoubleVote,
    /// The broadcaster follows the protocol toward f parties only.
    Withhold,
    /// Equivocation that starts Δ late.
    LateEquivocation,
    /// Corrupt followers follow the protocol; every link runs at its maximum delay.
    MaxDelay,
    /// The last f parties stop sending after Δ/2.
    Crash,
    /// One value to half of the honest parties, another to a single party, nothing to the rest.
    EquivocateWithhold,
    /// Seeded random talk subsets for every corrupt copy, seeded link delays.
    Chaos,
}

impl AdversaryId {
    pub const ALL: [AdversaryId; 10] = [
        AdversaryId::SilentFollowers,
        AdversaryId::SilentBroadcaster,
        AdversaryId::Equivocate,
        AdversaryId::DoubleVote,
        AdversaryId::Withhold,
        AdversaryId::LateEquivocation,
        AdversaryId::MaxDelay,
        AdversaryId::Crash,
        AdversaryId::EquivocateWithhold,
        AdversaryId::Chaos,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AdversaryId::SilentFollowers => "silent-followers",
            AdversaryId::SilentBroadcaster => "silent-broadcaster",
            AdversaryId::Equivocate => "equivocate",
            AdversaryId::DoubleVote => "double-vote",
            AdversaryId::Withhold => "withhold",
            AdversaryId::LateEquivocation => "late-equivocation",
            AdversaryId::MaxDelay => "max-delay",
            AdversaryId::Crash => "crash",
            AdversaryId::EquivocateWithhold => "equivocate-withhold",
            AdversaryId::Chaos => "chaos",
        }
    }

    /// Whether the broadcaster is among the corrupt parties.
    pub fn corrupts_broadcaster(&self) -> bool {
        !matches!(
            self,
            AdversaryId::SilentFollowers | AdversaryId::MaxDelay | AdversaryId::Crash
        )
    }
}

impl fmt::Display for AdversaryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdversaryId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AdversaryId::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown adversary {s:?}"))
    }
}

const CHAOS_SEED: u64 = 0xC4A05;

/// A value different from `v`.
pub fn other_value(v: &Value, k: u64) -> Value {
    match v.as_num() {
        Some(x) => Value::num(x.wrapping_add(k)),
        None => Value::num(k),
    }
}

/// The corrupt set: the broadcaster plus the last f−1 parties, or the last f
/// parties when the broadcaster stays honest.
pub fn corrupt_set(adv: AdversaryId, n: usize, f: usize, broadcaster: PartyId) -> BTreeSet<PartyId> {
    let followers: Vec<PartyId> = (0..n).rev().filter(|&p| p != broadcaster).collect();
    if adv.corrupts_broadcaster() && f > 0 {
        std::iter::once(broadcaster).chain(followers.into_iter().take(f - 1)).collect()
    } else {
        followers.into_iter().take(f).collect()
    }
}

fn with_input(params: &ProtoParams, v: Value) -> ProtoParams {
    let mut p = params.clone();
    p.input = v;
    p
}

/// Two halves of the honest parties.
fn halves(n: usize, byz: &BTreeSet<PartyId>) -> (Vec<PartyId>, Vec<PartyId>) {
    let honest: Vec<PartyId> = (0..n).filter(|p| !byz.contains(p)).collect();
    let k = honest.len().div_ceil(2);
    (honest[..k].to_vec(), honest[k..].to_vec())
}

/// A broadcaster copy per `(input, audience)`; each hears everyone and also
/// talks to the other corrupt parties.
fn equivocator(params: &ProtoParams, byz: &BTreeSet<PartyId>, sides: Vec<(Value, Vec<PartyId>)>) -> Personas {
    let b = params.broadcaster;
    let list = sides
        .into_iter()
        .map(|(v, to)| {
            Persona::new(with_input(params, v).honest_party(b)).talks(to.into_iter().chain(byz.iter().copied()))
        })
        .collect();
    Personas::new(b, list)
}

/// A corrupt follower running one copy per half.
fn double_voter(params: &ProtoParams, me: PartyId, byz: &BTreeSet<PartyId>, a: &[PartyId], b: &[PartyId]) -> Personas {
    let side = |g: &[PartyId]| {
        let audience: Vec<PartyId> = g.iter().chain(byz.iter()).copied().collect();
        Persona::new(params.honest_party(me)).hears(audience.clone()).talks(audience)
    };
    Personas::new(me, vec![side(a), side(b)])
}

fn byzantine(p: impl Party + 'static) -> Role {
    Role::Byzantine(Box::new(p))
}

/// Replace the roles of the corrupt parties according to `adv`.
pub fn install(
    adv: AdversaryId,
    params: &ProtoParams,
    roles: &mut [Role],
    _offsets: &[Time],
    cfg: &RunConfig,
) -> Result<(), ConfigError> {
    let n = params.t.n;
    let f = params.t.f;
    if f == 0 {
        return Err(ConfigError::Invalid(format!("adversary {adv} needs f ≥ 1")));
    }
    let b = params.broadcaster;
    let byz = corrupt_set(adv, n, f, b);
    let others: Vec<PartyId> = byz.iter().copied().filter(|&p| p != b).collect();
    let (ha, hb) = halves(n, &byz);
    let v = params.input.clone();
    let w = other_value(&v, 1);
    let puppets = |roles: &mut [Role]| {
        for &p in &others {
            roles[p] = Role::Byzantine(params.honest_party(p));
        }
    };
    match adv {
        AdversaryId::SilentFollowers => {
            for &p in &byz {
                roles[p] = byzantine(Silent);
            }
        }
        AdversaryId::SilentBroadcaster => {
            roles[b] = byzantine(Silent);
            puppets(roles);
        }
        AdversaryId::Equivocate => {
            roles[b] = byzantine(equivocator(params, &byz, vec![(v, ha), (w, hb)]));
            puppets(roles);
        }
        AdversaryId::DoubleVote => {
            roles[b] = byzantine(equivocator(params, &byz, vec![(v, ha.clone()), (w, hb.clone())]));
            for &p in &others {
                roles[p] = byzantine(double_voter(params, p, &byz, &ha, &hb));
            }
        }
        AdversaryId::Withhold => {
            let to: Vec<PartyId> = ha.iter().chain(hb.iter()).copied().take(f).chain(others.iter().copied()).collect();
            roles[b] = byzantine(Personas::single(b, Persona::new(params.honest_party(b)).talks(to)));
            puppets(roles);
        }
        AdversaryId::LateEquivocation => {
            let e = equivocator(params, &byz, vec![(v, ha), (w, hb)]);
            roles[b] = byzantine(Late::new(Box::new(e), cfg.big_delta));
            puppets(roles);
        }
        AdversaryId::MaxDelay => {
            for &p in &byz {
                roles[p] = Role::Byzantine(params.honest_party(p));
            }
        }
        AdversaryId::Crash => {
            for &p in &byz {
                roles[p] = byzantine(Personas::single(p, Persona::new(params.honest_party(p)).stop_at(cfg.big_delta / 2)));
            }
        }
        AdversaryId::EquivocateWithhold => {
            let single: Vec<PartyId> = hb.first().copied().into_iter().collect();
            roles[b] = byzantine(equivocator(params, &byz, vec![(v, ha), (w, single)]));
            puppets(roles);
        }
        AdversaryId::Chaos => {
            let mut rng = ChaCha8Rng::seed_from_u64(CHAOS_SEED ^ (n as u64) << 8 ^ f as u64);
            let everyone: Vec<PartyId> = (0..n).collect();
            let subset = |rng: &mut ChaCha8Rng| {
                let mut s = everyone.clone();
                s.shuffle(rng);
                let k = rng.random_range(1..=n);
                s.truncate(k);
                s
            };
            let sides = (0..3u64).map(|k| (other_value(&v, k), subset(&mut rng))).collect();
            roles[b] = byzantine(equivocator(params, &byz, sides));
            for &p in &others {
                let list = (0..2)
                    .map(|_| {
                        let h = subset(&mut rng);
                        let t = subset(&mut rng);
                        Persona::new(params.honest_party(p)).hears(h).talks(t)
                    })
                    .collect();
                roles[p] = byzantine(Personas::new(p, list));
            }
        }
    }
    Ok(())
}

/// Delay policy replacing the configured schedule, if the adversary controls it.
pub fn delay_override(adv: AdversaryId, cfg: &RunConfig) -> Option<Box<dyn DelayPolicy>> {
    match adv {
        AdversaryId::MaxDelay => {
            let big = cfg.big_delta;
            Some(Box::new(move |ctx: &SendCtx<'_>| {
                let honest = ctx.from_honest && ctx.to_honest;
                Delay::After(match *ctx.model {
                    TimingModel::Synchrony { delta, big_delta, .. } => {
                        if honest {
                            delta
                        } else {
                            big_delta
                        }
                    }
                    TimingModel::PartialSynchrony { big_delta, gst } => (gst - ctx.send_time).max(Time::ZERO) + big_delta,
                    TimingModel::Asynchrony => {
                        if honest {
                            Time::int(1)
                        } else {
                            big
                        }
                    }
                })
            }))
        }
        AdversaryId::Chaos => {
            let mut rng = ChaCha8Rng::seed_from_u64(CHAOS_SEED);
            Some(Box::new(move |ctx: &SendCtx<'_>| {
                let k = rng.random_range(0..=4i64);
                Delay::After(match *ctx.model {
                    TimingModel::Synchrony { delta, big_delta, .. } => {
                        if ctx.from_honest && ctx.to_honest {
                            delta * k / 4
                        } else {
                            big_delta * k / 4
                        }
                    }
                    TimingModel::PartialSynchrony { big_delta, gst } => {
                        ((gst - ctx.send_time).max(Time::ZERO) + big_delta) * k / 4
                    }
                    TimingModel::Asynchrony => Time::new(1 + k, 2),
                })
            }))
        }
        _ => None,
    }
}

/// One scripted Byzantine-leader case for the view change.
pub struct ViewChangeCase {
    pub name: String,
    pub world: World,
    pub horizon: Time,
    /// Party expected to commit in the first view, if the script forces one.
    pub early_committer: Option<PartyId>,
}

/// Scripted Byzantine behaviours of the first view's leader at `(n, f)`. The
/// other corrupt parties follow the protocol, so that out-of-region sizes
/// still gather enough timeouts.
pub fn psync_view_change_cases(n: usize, f: usize) -> Result<Vec<ViewChangeCase>, ConfigError> {
    let mut cfg = RunConfig::new(ProtocolId::PsyncVbb, n, f);
    if !cfg.resilience().setting.admits(n, f) {
        cfg = cfg.overridden();
    }
    let params = cfg.params()?;
    let leader = params.broadcaster;
    let big = cfg.big_delta;
    let byz = corrupt_set(AdversaryId::Equivocate, n, f, leader);
    let others: Vec<PartyId> = byz.iter().copied().filter(|&p| p != leader).collect();
    let honest: Vec<PartyId> = (0..n).filter(|p| !byz.contains(p)).collect();
    let (ha, hb) = halves(n, &byz);
    let v = params.input.clone();
    let w = other_value(&v, 1);

    type Make<'a> = Box<dyn Fn() -> (Box<dyn Party>, Vec<(PartyId, Box<dyn Party>)>) + 'a>;
    let puppets = || -> Vec<(PartyId, Box<dyn Party>)> { others.iter().map(|&p| (p, params.honest_party(p))).collect() };
    let mut scripts: Vec<(String, Make<'_>)> = Vec::new();
    scripts.push(("silent-leader".into(), Box::new(|| (Box::new(Silent) as Box<dyn Party>, puppets()))));
    scripts.push((
        "equivocating-halves".into(),
        Box::new(|| (Box::new(equivocator(&params, &byz, vec![(v.clone(), ha.clone()), (w.clone(), hb.clone())])) as _, puppets())),
    ));
    scripts.push((
        "equivocation-double-votes".into(),
        Box::new(|| {
            let e = equivocator(&params, &byz, vec![(v.clone(), ha.clone()), (w.clone(), hb.clone())]);
            let dv = others
                .iter()
                .map(|&p| (p, Box::new(double_voter(&params, p, &byz, &ha, &hb)) as Box<dyn Party>))
                .collect();
            (Box::new(e) as _, dv)
        }),
    ));
    let ks: BTreeSet<usize> = [1, f, 2 * f - 1, 2 * f, n - f].into_iter().collect();
    for k in ks {
        let (params, puppets) = (&params, &puppets);
        let to: Vec<PartyId> = honest.iter().copied().take(k).chain(others.iter().copied()).collect();
        scripts.push((
            format!("withhold-to-{k}"),
            Box::new(move || {
                let p = Persona::new(params.honest_party(leader)).talks(to.clone());
                (Box::new(Personas::single(leader, p)) as _, puppets())
            }),
        ));
    }
    scripts.push((
        "late-proposal".into(),
        Box::new(|| (Box::new(Late::new(params.honest_party(leader), big * 3)) as _, puppets())),
    ));
    scripts.push((
        "late-equivocation".into(),
        Box::new(|| {
            let e = equivocator(&params, &byz, vec![(v.clone(), ha.clone()), (w.clone(), hb.clone())]);
            (Box::new(Late::new(Box::new(e), big)) as _, puppets())
        }),
    ));
    scripts.push((
        "crash-after-proposal".into(),
        Box::new(|| {
            let p = Persona::new(params.honest_party(leader)).start_only();
            (Box::new(Personas::single(leader, p)) as _, puppets())
        }),
    ));
    scripts.push((
        "n-way-equivocation".into(),
        Box::new(|| {
            let sides = honest.iter().enumerate().map(|(k, &h)| (other_value(&v, k as u64), vec![h])).collect();
            (Box::new(equivocator(&params, &byz, sides)) as _, puppets())
        }),
    ));

    let offsets = vec![Time::ZERO; n];
    let horizon = cfg.horizon();
    let mut out = Vec::new();
    for (name, make) in &scripts {
        let (lead, rest) = make();
        out.push(ViewChangeCase {
            name: name.clone(),
            world: world(&cfg, &params, lead, rest, Box::new(move |_: &SendCtx<'_>| Delay::After(big)), Time::ZERO, &offsets),
            horizon,
            early_committer: None,
        });
    }

    // The leader follows the protocol, but every view-1 vote bound for anyone
    // except `x` is held until after GST, so `x` alone commits in view 1 and
    // the rest decide in view 2.
    let x = *honest.last().expect("an honest party");
    let gst = big * 12;
    let hold = move |ctx: &SendCtx<'_>| {
        let carries_vote = ctx.msg.items().iter().any(|it| match &it.body {
            Body::ViewVote(inner) => matches!(inner.body, Body::Slot(_, 1)),
            _ => false,
        });
        if ctx.to != x && carries_vote && ctx.send_time < gst {
            Delay::After(gst + big - ctx.send_time)
        } else {
            Delay::After(big)
        }
    };
    out.push(ViewChangeCase {
        name: "lone-view1-commit".into(),
        world: world(&cfg, &params, params.honest_party(leader), puppets(), Box::new(hold), gst, &offsets),
        horizon: horizon + gst,
        early_committer: Some(x),
    });
    Ok(out)
}

fn world(
    cfg: &RunConfig,
    params: &ProtoParams,
    leader: Box<dyn Party>,
    rest: Vec<(PartyId, Box<dyn Party>)>,
    delay: Box<dyn DelayPolicy>,
    gst: Time,
    offsets: &[Time],
) -> World {
    let mut roles = params.honest_roles();
    roles[params.broadcaster] = Role::Byzantine(leader);
    for (p, b) in rest {
        roles[p] = Role::Byzantine(b);
    }
    World {
        resilience: cfg.resilience(),
        model: TimingModel::PartialSynchrony {
            big_delta: cfg.big_delta,
            gst,
        },
        roles,
        start_offsets: offsets.to_vec(),
        delay,
        broadcaster: params.broadcaster,
        external_validity: params.valid.clone(),
        separate_keys: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn names_round_trip() {
        for a in AdversaryId::ALL {
            assert_eq!(a.name().parse::<AdversaryId>().unwrap(), a);
            let j = serde_json::to_string(&a).unwrap();
            assert_eq!(j, format!("\"{}\"", a.name()));
        }
    }

    #[test]
    fn other_value_differs() {
        for v in [Value::num(0), Value::num(u64::MAX), Value::Bot] {
            assert_ne!(other_value(&v, 1), v);
        }
    }

    proptest! {
        #[test]
        fn corrupt_set_fits_budget(n in 2usize..12, f in 0usize..6, b in 0usize..12, k in 0usize..10) {
            prop_assume!(f < n && b < n);
            let adv = AdversaryId::ALL[k];
            let s = corrupt_set(adv, n, f, b);
            prop_assert_eq!(s.len(), f);
            prop_assert!(s.iter().all(|&p| p < n));
            if f > 0 {
                prop_assert_eq!(s.contains(&b), adv.corrupts_broadcaster());
            }
        }
    }

    #[test]
    fn view_change_cases_exist() {
        let cases = psync_view_change_cases(4, 1).unwrap();
        assert!(cases.len() >= 10);
        assert!(cases.iter().any(|c| c.early_committer.is_some()));
    }
}
