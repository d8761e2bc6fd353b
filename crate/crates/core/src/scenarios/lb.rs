//! The five lower-bound constructions.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    Cutoff, DelayRule, DelayTable, ExecutionSpec, Expectation, ScenarioError, ScenarioName, ScenarioParams, ScenarioSpec,
    ScriptNote, Sel, When,
};
use crate::adversary::{replay_script, Persona, Personas, Replay, ReplayItem};
use crate::protocol::{ProtoParams, ProtocolId};
use crate::simnet::{accept_all, run, Role, TimingModel, Trace, World};
use crate::time::Time;
use crate::types::{thresholds, PartyId, Resilience, Value};

pub(super) struct Built {
    pub spec: ScenarioSpec,
    pub worlds: Vec<(String, World)>,
    pub traces: BTreeMap<String, Trace>,
}

type Traces = BTreeMap<String, Trace>;
type Set = BTreeSet<PartyId>;

struct Ctx {
    name: ScenarioName,
    protocol: ProtocolId,
    n: usize,
    f: usize,
    resilience: Resilience,
    big_delta: Time,
    delta: Time,
    m: u32,
    broadcaster: PartyId,
    groups: BTreeMap<String, Set>,
    horizon: Time,
}

/// One execution before it becomes a [`World`].
struct Exec {
    id: String,
    model: TimingModel,
    offsets: Vec<Time>,
    input: Value,
    roles: Vec<Role>,
    notes: Vec<ScriptNote>,
    table: DelayTable,
    separate_keys: bool,
}

impl Ctx {
    #[allow(clippy::too_many_arguments)]
    fn new(
        name: ScenarioName,
        protocol: ProtocolId,
        n: usize,
        f: usize,
        force_override: bool,
        p: &ScenarioParams,
        broadcaster: PartyId,
        groups: Vec<(&str, Set)>,
    ) -> Result<Ctx, ScenarioError> {
        let mut resilience = Resilience::new(n, f, protocol.setting(n, f));
        if force_override || p.override_resilience {
            resilience = resilience.overridden();
        }
        resilience.check().map_err(|e| ScenarioError::Config(e.to_string()))?;
        let big_delta = p.big_delta.unwrap_or(Time::int(10));
        let groups: BTreeMap<String, Set> = groups.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let covered: usize = groups.values().map(|g| g.len()).sum();
        let union: Set = groups.values().flatten().copied().collect();
        if covered != n || union.len() != n {
            return Err(ScenarioError::Config(format!("{name}: groups do not partition {n} parties")));
        }
        Ok(Ctx {
            name,
            protocol,
            n,
            f,
            resilience,
            big_delta,
            delta: p.delta.unwrap_or(Time::int(2)),
            m: p.m.unwrap_or(5),
            broadcaster,
            groups,
            horizon: big_delta * (40 * (f as i64 + 2)),
        })
    }

    fn g(&self, name: &str) -> Set {
        self.groups[name].clone()
    }

    fn params(&self, input: &Value) -> ProtoParams {
        ProtoParams {
            protocol: self.protocol,
            t: thresholds(&self.resilience).expect("checked resilience"),
            broadcaster: self.broadcaster,
            big_delta: self.big_delta,
            m: self.m,
            input: input.clone(),
            valid: accept_all(),
        }
    }

    fn sync(&self, delta: Time, sigma: Time) -> TimingModel {
        TimingModel::Synchrony {
            delta,
            big_delta: self.big_delta,
            sigma,
        }
    }

    fn table(&self, default: Time) -> DelayTable {
        DelayTable::new(&self.groups, DelayRule::After(default))
    }

    /// An execution where everyone runs the protocol honestly.
    fn exec(&self, id: &str, model: TimingModel, input: Value, table: DelayTable) -> Exec {
        Exec {
            id: id.to_string(),
            model,
            offsets: vec![Time::ZERO; self.n],
            roles: self.params(&input).honest_roles(),
            input,
            notes: Vec::new(),
            table,
            separate_keys: false,
        }
    }

    fn finish(&self, e: Exec) -> (ExecutionSpec, World) {
        let spec = ExecutionSpec {
            id: e.id.clone(),
            model: e.model,
            start_offsets: e.offsets.clone(),
            broadcaster_input: e.input.clone(),
            byzantine: e.notes,
            delay_table: e.table.clone(),
        };
        let world = World {
            resilience: self.resilience,
            model: e.model,
            roles: e.roles,
            start_offsets: e.offsets,
            delay: Box::new(e.table),
            broadcaster: self.broadcaster,
            external_validity: accept_all(),
            separate_keys: e.separate_keys,
        };
        (spec, world)
    }
}

impl Exec {
    fn byz(&mut self, p: PartyId, party: Box<dyn crate::simnet::Party>, note: impl Into<String>) {
        self.roles[p] = Role::Byzantine(party);
        self.notes.push(ScriptNote {
            party: p,
            behaviour: note.into(),
        });
        self.notes.sort_by_key(|n| n.party);
    }

    /// Members of `group` run the protocol but are Byzantine: their links are
    /// whatever the delay table says.
    fn puppets(&mut self, ctx: &Ctx, group: &Set, note: &str) {
        let params = ctx.params(&self.input);
        for &p in group {
            self.byz(p, params.honest_party(p), note);
        }
    }

    /// Like [`Exec::puppets`], but nothing is sent to `muted`.
    fn puppets_muting(&mut self, ctx: &Ctx, group: &Set, muted: &Set, note: &str) {
        let params = ctx.params(&self.input);
        let talks: Vec<PartyId> = (0..ctx.n).filter(|p| !muted.contains(p)).collect();
        for &p in group {
            let persona = Persona::new(params.honest_party(p)).talks(talks.clone());
            self.byz(p, Box::new(Personas::single(p, persona)), note);
        }
    }

    /// Members of `group` run the protocol, send only start-step messages
    /// and only to parties outside `excluded`.
    fn start_only(&mut self, ctx: &Ctx, group: &Set, excluded: &Set, note: &str) {
        let params = ctx.params(&self.input);
        let talks: Vec<PartyId> = (0..ctx.n).filter(|p| !excluded.contains(p)).collect();
        for &p in group {
            let persona = Persona::new(params.honest_party(p)).talks(talks.clone()).start_only();
            self.byz(p, Box::new(Personas::single(p, persona)), note);
        }
    }
}

fn set(r: impl IntoIterator<Item = PartyId>) -> Set {
    r.into_iter().collect()
}

fn shifted(items: Vec<ReplayItem>, by: Time) -> Vec<ReplayItem> {
    items
        .into_iter()
        .map(|mut it| {
            it.deliver += by;
            it
        })
        .collect()
}

fn replay(traces: &Traces, exec: &str, sender: PartyId, to: &Set, start_only: bool) -> Vec<ReplayItem> {
    replay_script(&traces[exec], sender, to, start_only)
}

type Step = Box<dyn Fn(&Ctx, &Traces) -> Result<Exec, ScenarioError>>;

fn run_exec(id: &str, world: World, horizon: Time) -> Result<Trace, ScenarioError> {
    run(world, horizon).map_err(|e| ScenarioError::Run(id.to_string(), e.to_string()))
}

pub(super) fn build(name: ScenarioName, p: &ScenarioParams, keep_traces: bool) -> Result<Built, ScenarioError> {
    let (ctx, steps, expectations) = match name {
        ScenarioName::LbAsync => lb_async(p)?,
        ScenarioName::LbPsync => lb_psync(p)?,
        ScenarioName::LbSyncDPlusD => lb_sync_dplusd(p)?,
        ScenarioName::LbSync1p5 => lb_sync_1p5(p)?,
        ScenarioName::LbDishonest => lb_dishonest(p)?,
    };
    let mut traces = Traces::new();
    let mut executions = Vec::new();
    let mut worlds = Vec::new();
    for step in &steps {
        let (spec, world) = ctx.finish(step(&ctx, &traces)?);
        let id = spec.id.clone();
        let trace = run_exec(&id, world, ctx.horizon)?;
        traces.insert(id.clone(), trace);
        if !keep_traces {
            worlds.push((id, ctx.finish(step(&ctx, &traces)?).1));
        }
        executions.push(spec);
    }
    executions.sort_by(|a, b| a.id.cmp(&b.id));
    worlds.sort_by(|a, b| a.0.cmp(&b.0));
    let spec = ScenarioSpec {
        name: ctx.name.name().to_string(),
        protocol: ctx.protocol,
        n: ctx.n,
        f: ctx.f,
        partition: ctx.groups.clone(),
        executions,
        expectations,
        horizon: ctx.horizon,
    };
    if !keep_traces {
        traces.clear();
    }
    Ok(Built { spec, worlds, traces })
}

fn v0() -> Value {
    Value::num(0)
}

fn v1() -> Value {
    Value::num(1)
}

fn check_protocol(p: &ScenarioParams, allowed: &[ProtocolId], default: ProtocolId) -> Result<ProtocolId, ScenarioError> {
    let proto = p.protocol.unwrap_or(default);
    if allowed.contains(&proto) {
        Ok(proto)
    } else {
        Err(ScenarioError::Config(format!("this construction does not apply to {proto}")))
    }
}

type Plan = (Ctx, Vec<Step>, Vec<(String, Expectation)>);

/// Broadcaster equivocation split: execution 3 sends 0 to A and 1 to B.
fn lb_async(p: &ScenarioParams) -> Result<Plan, ScenarioError> {
    let f = p.f.unwrap_or(1);
    let n = p.n.unwrap_or(3 * f + 1);
    if n < 3 || f == 0 {
        return Err(ScenarioError::Config("LB-ASYNC needs n ≥ 3 and f ≥ 1".into()));
    }
    let proto = check_protocol(p, &[ProtocolId::Brb], ProtocolId::Brb)?;
    let half = (n - 1) / 2;
    let a = set(1..=half);
    let b = set(half + 1..n);
    let ctx = Ctx::new(
        ScenarioName::LbAsync,
        proto,
        n,
        f,
        false,
        p,
        0,
        vec![("s", set([0])), ("A", a.clone()), ("B", b.clone())],
    )?;
    let in_region = ctx.protocol.setting(n, f).admits(n, f);
    let unit = Time::int(1);
    let steps: Vec<Step> = vec![
        Box::new(move |c, _| Ok(c.exec("E1", TimingModel::Asynchrony, v0(), c.table(unit)))),
        Box::new(move |c, _| Ok(c.exec("E2", TimingModel::Asynchrony, v1(), c.table(unit)))),
        Box::new(move |c, _| {
            let mut e = c.exec("E3", TimingModel::Asynchrony, v0(), c.table(unit));
            let s = c.broadcaster;
            let persona = |input: Value, group: &Set| {
                let params = c.params(&input);
                let mut hears = group.clone();
                hears.insert(s);
                Persona::new(params.honest_party(s)).hears(hears).talks(group.clone())
            };
            let split = Personas::new(s, vec![persona(v0(), &c.g("A")), persona(v1(), &c.g("B"))]).with_loopback(unit);
            e.byz(s, Box::new(split), "honest broadcaster with input 0 toward A and input 1 toward B");
            Ok(e)
        }),
    ];
    let all = set(0..n);
    let mut ex = vec![
        (
            "E1".to_string(),
            Expectation::CommitsValue {
                parties: all.clone(),
                value: v0(),
            },
        ),
        (
            "E2".to_string(),
            Expectation::CommitsValue {
                parties: all,
                value: v1(),
            },
        ),
    ];
    for &x in &a {
        ex.push(("E3".into(), history("E1", x, Cutoff::BeforeRound(1))));
    }
    for &x in &b {
        ex.push(("E3".into(), history("E2", x, Cutoff::BeforeRound(1))));
    }
    ex.push((
        "E3".into(),
        if in_region {
            Expectation::AgreementHolds
        } else {
            Expectation::AgreementViolated
        },
    ));
    Ok((ctx, steps, ex))
}

fn history(other: &str, party: PartyId, cutoff: Cutoff) -> Expectation {
    Expectation::LocalHistoryEqual {
        other: other.to_string(),
        party,
        cutoff,
    }
}

/// Five executions over groups s, A, B, C, D, E with n = 5f − 2.
fn lb_psync(p: &ScenarioParams) -> Result<Plan, ScenarioError> {
    let f = p.f.unwrap_or(2);
    if f < 2 {
        return Err(ScenarioError::Config("LB-PSYNC needs f ≥ 2".into()));
    }
    let n = 5 * f - 2;
    if p.n.is_some_and(|x| x != n) {
        return Err(ScenarioError::Config(format!("LB-PSYNC needs n = 5f−2 = {n}")));
    }
    let proto = check_protocol(p, &[ProtocolId::PsyncVbb], ProtocolId::PsyncVbb)?;
    let mut next = 1;
    let mut take = |k: usize| {
        let g = set(next..next + k);
        next += k;
        g
    };
    let groups = vec![
        ("s", set([0])),
        ("A", take(f - 1)),
        ("B", take(f)),
        ("C", take(f - 1)),
        ("D", take(f - 1)),
        ("E", take(f)),
    ];
    let ctx = Ctx::new(ScenarioName::LbPsync, proto, n, f, true, p, 0, groups)?;
    let bd = ctx.big_delta;
    let psync = move |gst: Time| TimingModel::PartialSynchrony { big_delta: bd, gst };

    // A's non-start messages and `late`'s messages to A wait for GST.
    let pre_gst = move |c: &Ctx, gst: Time, late: &str| {
        c.table(bd)
            .rule(
                Sel::In("A".into()),
                Sel::NotIn("A".into()),
                When::AfterStart,
                DelayRule::NotBefore { base: bd, at: gst },
            )
            .one(late, "A", DelayRule::NotBefore { base: bd, at: gst })
    };

    // Execution 2 (or 4 when `mirror`), run once to find GST.
    let side = move |c: &Ctx, t: &Traces, mirror: bool, gst: Time| -> Exec {
        let (id, input, near, far, byz, late, near_src, far_src) = if mirror {
            ("E4", v1(), c.g("A").into_iter().chain(c.g("D")).chain(c.g("E")).collect::<Set>(), c.g("B"), "C", "B", "E5", "E1")
        } else {
            ("E2", v0(), c.g("A").into_iter().chain(c.g("B")).chain(c.g("C")).collect::<Set>(), c.g("E"), "D", "E", "E1", "E5")
        };
        let mut e = c.exec(id, psync(gst), input, pre_gst(c, gst, late));
        let s = c.broadcaster;
        let items = [replay(t, near_src, s, &near, false), replay(t, far_src, s, &far, false)].concat();
        e.byz(
            s,
            Box::new(Replay::new(Time::ZERO, items)),
            format!("replays {near_src} toward {near:?} and {far_src} toward {far:?}"),
        );
        let a = c.g("A");
        let byz_group = c.g(byz);
        let others: Set = (0..c.n).filter(|q| !a.contains(q) && !byz_group.contains(q)).collect();
        for &d in &byz_group {
            let items = [replay(t, near_src, d, &a, false), replay(t, "E3", d, &others, false)].concat();
            e.byz(
                d,
                Box::new(Replay::new(Time::ZERO, items)),
                format!("replays {near_src} toward A and E3 toward everyone else"),
            );
        }
        e
    };
    let two_pass = move |c: &Ctx, t: &Traces, mirror: bool| -> Result<Exec, ScenarioError> {
        let (spec, world) = c.finish(side(c, t, mirror, c.horizon));
        let probe = run_exec(&spec.id, world, c.horizon)?;
        let commits = probe.commits();
        let watch: Set = c.g("B").into_iter().chain(c.g("E")).collect();
        let done: Option<Vec<Time>> = watch.iter().map(|&q| commits[q].as_ref().map(|(g, _)| *g)).collect();
        let gst = match done {
            Some(ts) => ts.into_iter().max().unwrap_or(Time::ZERO) + c.big_delta,
            None => probe.last_event_time() + c.big_delta,
        };
        Ok(side(c, t, mirror, gst))
    };

    let steps: Vec<Step> = vec![
        Box::new(move |c, _| {
            let mut e = c.exec("E1", psync(Time::ZERO), v0(), c.table(bd));
            e.start_only(c, &c.g("E"), &c.g("A"), "start-step messages only, none to A");
            Ok(e)
        }),
        Box::new(move |c, _| {
            let mut e = c.exec("E5", psync(Time::ZERO), v1(), c.table(bd));
            e.start_only(c, &c.g("B"), &c.g("A"), "start-step messages only, none to A");
            Ok(e)
        }),
        Box::new(move |c, t| {
            let mut e = c.exec("E3", psync(Time::ZERO), v0(), c.table(bd));
            let s = c.broadcaster;
            let bc: Set = c.g("B").into_iter().chain(c.g("C")).collect();
            let de: Set = c.g("D").into_iter().chain(c.g("E")).collect();
            let items = [replay(t, "E1", s, &bc, false), replay(t, "E5", s, &de, false)].concat();
            e.byz(s, Box::new(Replay::new(Time::ZERO, items)), "replays E1 toward B, C and E5 toward D, E");
            e.start_only(c, &c.g("A"), &c.g("A"), "start-step messages only");
            Ok(e)
        }),
        Box::new(move |c, t| two_pass(c, t, false)),
        Box::new(move |c, t| two_pass(c, t, true)),
    ];

    let mut ex = Vec::new();
    let round2 = bd * 3;
    let honest1: Set = (0..n).filter(|q| !ctx.g("E").contains(q)).collect();
    let honest5: Set = (0..n).filter(|q| !ctx.g("B").contains(q)).collect();
    ex.push((
        "E1".to_string(),
        Expectation::NoCommitBefore {
            parties: honest1,
            before: round2,
        },
    ));
    ex.push((
        "E5".to_string(),
        Expectation::NoCommitBefore {
            parties: honest5,
            before: round2,
        },
    ));
    for &a in &ctx.g("A") {
        ex.push(("E2".into(), history("E1", a, Cutoff::BeforeRound(2))));
        ex.push(("E4".into(), history("E5", a, Cutoff::BeforeRound(2))));
    }
    for id in ["E1", "E2", "E3", "E4", "E5"] {
        ex.push((id.into(), Expectation::AgreementHolds));
    }
    Ok((ctx, steps, ex))
}

/// Three executions over groups A, B, C (broadcaster in C) of size ≤ f.
fn lb_sync_dplusd(p: &ScenarioParams) -> Result<Plan, ScenarioError> {
    let f = p.f.unwrap_or(1);
    let n = p.n.unwrap_or(3 * f);
    if n > 3 * f || n < 3 {
        return Err(ScenarioError::Config(format!("LB-SYNC-DPLUSD needs 3 ≤ n ≤ 3f, got n={n} f={f}")));
    }
    let proto = check_protocol(p, &[ProtocolId::BbN3, ProtocolId::BbSyncStart], ProtocolId::BbN3)?;
    let rest = n - 1;
    let ka = rest.div_ceil(2).min(f);
    let kb = (rest - ka).min(f);
    let a = set(1..=ka);
    let b = set(ka + 1..=ka + kb);
    let c = set([0].into_iter().chain(ka + kb + 1..n));
    let ctx = Ctx::new(
        ScenarioName::LbSyncDPlusD,
        proto,
        n,
        f,
        false,
        p,
        0,
        vec![("A", a.clone()), ("B", b.clone()), ("C", c.clone())],
    )?;
    let (d, bd) = (ctx.delta, ctx.big_delta);
    let steps: Vec<Step> = vec![
        Box::new(move |c, _| {
            let t = c.table(d).both("B", "A", DelayRule::After(bd)).both("B", "C", DelayRule::After(bd));
            let mut e = c.exec("E1", c.sync(d, Time::ZERO), v0(), t);
            e.puppets(c, &c.g("B"), "honest, with Δ delays to and from A and C");
            Ok(e)
        }),
        Box::new(move |c, _| {
            let t = c.table(d).both("A", "B", DelayRule::After(bd)).both("A", "C", DelayRule::After(bd));
            let mut e = c.exec("E2", c.sync(d, Time::ZERO), v1(), t);
            e.puppets(c, &c.g("A"), "honest, with Δ delays to and from B and C");
            Ok(e)
        }),
        Box::new(move |c, t| {
            let table = c.table(d).both("A", "B", DelayRule::After(bd));
            let mut e = c.exec("E3", c.sync(bd, Time::ZERO), v0(), table);
            for &q in &c.g("C") {
                let items = [replay(t, "E1", q, &c.g("A"), false), replay(t, "E2", q, &c.g("B"), false)].concat();
                e.byz(q, Box::new(Replay::new(Time::ZERO, items)), "replays E1 toward A and E2 toward B");
            }
            Ok(e)
        }),
    ];
    let cut = Cutoff::At(bd + d);
    let ac: Set = a.iter().chain(&c).copied().collect();
    let bc: Set = b.iter().chain(&c).copied().collect();
    let mut ex = vec![
        (
            "E1".to_string(),
            Expectation::CommitsValue {
                parties: ac.clone(),
                value: v0(),
            },
        ),
        ("E1".to_string(), Expectation::CommitsByTime { parties: ac, by: bd + d }),
        (
            "E2".to_string(),
            Expectation::CommitsValue {
                parties: bc.clone(),
                value: v1(),
            },
        ),
        ("E2".to_string(), Expectation::CommitsByTime { parties: bc, by: bd + d }),
    ];
    for &x in &a {
        ex.push(("E3".into(), history("E1", x, cut)));
    }
    for &x in &b {
        ex.push(("E3".into(), history("E2", x, cut)));
    }
    if !ctx.resilience.override_region {
        ex.push(("E3".into(), Expectation::AgreementHolds));
    }
    Ok((ctx, steps, ex))
}

/// Four executions over g, A, B, C, h with σ = δ/2; the broadcaster is in B.
fn lb_sync_1p5(p: &ScenarioParams) -> Result<Plan, ScenarioError> {
    let f = p.f.unwrap_or(2);
    let n = p.n.unwrap_or(5);
    if n < 5 || n - 2 > 3 * (f - 1) {
        return Err(ScenarioError::Config(format!(
            "LB-SYNC-1P5 needs n ≥ 5 and groups A, B, C of size ≤ f−1, got n={n} f={f}"
        )));
    }
    let proto = check_protocol(p, &[ProtocolId::Bb15], ProtocolId::Bb15)?;
    let rest = n - 2;
    let ka = rest.div_ceil(3);
    let kb = (rest - ka).div_ceil(2);
    let a = set(1..=ka);
    let b = set(ka + 1..=ka + kb);
    let c = set(ka + kb + 1..n - 1);
    let (g, h) = (0, n - 1);
    let broadcaster = ka + 1;
    let ctx = Ctx::new(
        ScenarioName::LbSync1p5,
        proto,
        n,
        f,
        false,
        p,
        broadcaster,
        vec![
            ("g", set([g])),
            ("A", a.clone()),
            ("B", b.clone()),
            ("C", c.clone()),
            ("h", set([h])),
        ],
    )?;
    let (d, bd) = (ctx.delta, ctx.big_delta);
    let half = d / 2;
    let sigma = half;
    let after = DelayRule::After;
    let steps: Vec<Step> = vec![
        Box::new(move |c, _| {
            let t = c
                .table(d)
                .one("C", "g", after(bd + half))
                .one("C", "A", after(bd - half))
                .one("g", "C", after(bd - half))
                .one("A", "C", after(bd - half))
                .one("h", "A", after(bd - half))
                .one("A", "h", after(bd + half))
                .both("h", "g", DelayRule::Drop);
            let mut e = c.exec("E1", c.sync(d, sigma), v0(), t);
            let ch: Set = c.g("C").into_iter().chain(c.g("h")).collect();
            e.puppets_muting(c, &ch, &c.g("B"), "honest toward everyone but B, with the delays of the table");
            Ok(e)
        }),
        Box::new(move |c, _| {
            let t = c
                .table(d)
                .one("A", "h", after(bd + half))
                .one("A", "C", after(bd - half))
                .one("h", "A", after(bd - half))
                .one("C", "A", after(bd - half))
                .one("g", "C", after(bd - half))
                .one("C", "g", after(bd + half))
                .both("g", "h", DelayRule::Drop);
            let mut e = c.exec("E4", c.sync(d, sigma), v1(), t);
            let ga: Set = c.g("g").into_iter().chain(c.g("A")).collect();
            e.puppets_muting(c, &ga, &c.g("B"), "honest toward everyone but B, with the delays of the table");
            Ok(e)
        }),
        Box::new(move |c, t| {
            let table = c
                .table(d)
                .both("g", "C", after(bd))
                .one("C", "A", after(bd - d))
                .one("A", "C", after(bd))
                .both("g", "h", DelayRule::Drop)
                .one("C", "h", after(half))
                .one("h", "C", after(d + half))
                .one("A", "h", after(bd + half))
                .one("h", "A", after(bd - half));
            let mut e = c.exec("E2", c.sync(bd, sigma), v0(), table);
            e.separate_keys = true;
            for &q in &c.g("C") {
                e.offsets[q] = half;
            }
            let ga: Set = c.g("g").into_iter().chain(c.g("A")).collect();
            for &q in &c.g("B") {
                let items = [
                    replay(t, "E1", q, &ga, false),
                    shifted(replay(t, "E4", q, &c.g("C"), false), half),
                    replay(t, "E4", q, &c.g("h"), false),
                ]
                .concat();
                e.byz(
                    q,
                    Box::new(Replay::new(Time::ZERO, items)),
                    "replays E1 toward g, A and E4 toward C (δ/2 later) and h",
                );
            }
            e.puppets(c, &c.g("h"), "honest, with the delays of the table");
            Ok(e)
        }),
        Box::new(move |c, t| {
            let table = c
                .table(d)
                .both("h", "A", after(bd))
                .one("A", "C", after(bd - d))
                .one("C", "A", after(bd))
                .both("g", "h", DelayRule::Drop)
                .one("A", "g", after(half))
                .one("g", "A", after(d + half))
                .one("C", "g", after(bd + half))
                .one("g", "C", after(bd - half));
            let mut e = c.exec("E3", c.sync(bd, sigma), v1(), table);
            e.separate_keys = true;
            for &q in &c.g("A") {
                e.offsets[q] = half;
            }
            let ch: Set = c.g("C").into_iter().chain(c.g("h")).collect();
            for &q in &c.g("B") {
                let items = [
                    replay(t, "E1", q, &c.g("g"), false),
                    shifted(replay(t, "E1", q, &c.g("A"), false), half),
                    replay(t, "E4", q, &ch, false),
                ]
                .concat();
                e.byz(
                    q,
                    Box::new(Replay::new(Time::ZERO, items)),
                    "replays E1 toward g and A (δ/2 later) and E4 toward C, h",
                );
            }
            e.puppets(c, &c.g("g"), "honest, with the delays of the table");
            Ok(e)
        }),
    ];
    let cutoff = bd + d * 3 / 2;
    let gab: Set = [g].into_iter().chain(a.iter().copied()).chain(b.iter().copied()).collect();
    let hcb: Set = [h].into_iter().chain(c.iter().copied()).chain(b.iter().copied()).collect();
    let mut ex = vec![
        (
            "E1".to_string(),
            Expectation::CommitsValue {
                parties: gab.clone(),
                value: v0(),
            },
        ),
        (
            "E4".to_string(),
            Expectation::CommitsValue {
                parties: hcb.clone(),
                value: v1(),
            },
        ),
    ];
    let grid = crate::proto_sync::DGrid::new(ctx.m, bd);
    if grid.index_of(d).is_some() {
        ex.push(("E1".into(), Expectation::CommitsByTime { parties: gab, by: cutoff }));
        ex.push(("E4".into(), Expectation::CommitsByTime { parties: hcb, by: cutoff }));
    }
    ex.push(("E2".into(), history("E1", g, Cutoff::At(cutoff))));
    ex.push(("E3".into(), history("E4", h, Cutoff::At(cutoff))));
    for &x in a.iter().chain(&c) {
        ex.push(("E3".into(), history("E2", x, Cutoff::Unbounded)));
    }
    ex.push(("E2".into(), Expectation::AgreementHolds));
    ex.push(("E3".into(), Expectation::AgreementHolds));
    Ok((ctx, steps, ex))
}

/// A ring of groups G_0..G_d, each Byzantine group talking only to its neighbours.
fn lb_dishonest(p: &ScenarioParams) -> Result<Plan, ScenarioError> {
    let n = p.n.unwrap_or(6);
    let f = p.f.unwrap_or(4);
    if 2 * f < n || f >= n {
        return Err(ScenarioError::Config(format!("LB-DISHONEST needs n/2 ≤ f < n, got n={n} f={f}")));
    }
    let proto = check_protocol(
        p,
        &[ProtocolId::BbSyncStart, ProtocolId::Bb15, ProtocolId::Bb2Delta, ProtocolId::BbN3],
        ProtocolId::BbSyncStart,
    )?;
    let h = n - f;
    let d = 2 * (n / h) - 1;
    let mut groups = Vec::new();
    let mut next = 0;
    for i in 0..=d {
        let size = if i == d {
            n - next
        } else if i % 2 == 0 {
            1
        } else {
            h - 1
        };
        if size == 0 {
            return Err(ScenarioError::Config(format!("LB-DISHONEST: group G{i} would be empty")));
        }
        groups.push((i, set(next..next + size)));
        next += size;
    }
    let names: Vec<String> = (0..=d).map(|i| format!("G{i}")).collect();
    let ctx = Ctx::new(
        ScenarioName::LbDishonest,
        proto,
        n,
        f,
        true,
        p,
        0,
        groups.iter().map(|(i, s)| (names[*i].as_str(), s.clone())).collect(),
    )?;
    let bd = ctx.big_delta;
    let adjacent = move |i: usize, j: usize| i == j || (i + 1) % (d + 1) == j || (j + 1) % (d + 1) == i;
    let ring_table = move |c: &Ctx| {
        let mut t = c.table(bd);
        for i in 0..=d {
            for j in 0..=d {
                if !adjacent(i, j) {
                    let when = if i == 0 { When::AfterStart } else { When::Always };
                    t = t.rule(Sel::In(format!("G{i}")), Sel::In(format!("G{j}")), when, DelayRule::Drop);
                }
            }
        }
        t
    };
    let id = |i: usize| format!("E{i}");
    let honest_pair = move |i: usize| -> (usize, usize) {
        match i {
            0 => (0, 1),
            x if x == d => (0, d),
            x => (x, x + 1),
        }
    };
    let make = move |i: usize| -> Step {
        Box::new(move |c: &Ctx, t: &Traces| {
            let input = if i == d { v1() } else { v0() };
            let mut e = c.exec(&format!("E{i}"), c.sync(bd, Time::ZERO), input, ring_table(c));
            let (x, y) = honest_pair(i);
            for j in 0..=d {
                if j == x || j == y || (j == 0 && (i == 0 || i == d)) {
                    continue;
                }
                let grp = c.g(&format!("G{j}"));
                if j == 0 {
                    let mid = d.div_ceil(2);
                    let low: Set = (2..=mid).flat_map(|k| c.g(&format!("G{k}"))).collect();
                    let high: Set = (mid..d).flat_map(|k| c.g(&format!("G{k}"))).collect();
                    let items = [
                        replay(t, "E0", 0, &c.g("G1"), false),
                        replay(t, "E0", 0, &low, true),
                        replay(t, &format!("E{d}"), 0, &c.g(&format!("G{d}")), false),
                        replay(t, &format!("E{d}"), 0, &high, true),
                    ]
                    .concat();
                    e.byz(
                        0,
                        Box::new(Replay::new(Time::ZERO, items)),
                        format!("proposes 0 to G1..G{mid} and 1 to G{mid}..G{d}; replays E0 toward G1 and E{d} toward G{d}"),
                    );
                } else {
                    e.puppets(c, &grp, "honest, but only talks to neighbouring groups");
                }
            }
            Ok(e)
        })
    };
    let mut steps: Vec<Step> = vec![make(0), make(d)];
    for i in 1..d {
        steps.push(make(i));
    }
    let bound = bd * (d as i64 - 1) / 2;
    let g = |i: usize| ctx.g(&format!("G{i}"));
    let mut ex = vec![
        (
            id(0),
            Expectation::NoCommitBefore {
                parties: g(0).into_iter().chain(g(1)).collect(),
                before: bound,
            },
        ),
        (
            id(d),
            Expectation::NoCommitBefore {
                parties: g(0).into_iter().chain(g(d)).collect(),
                before: bound,
            },
        ),
    ];
    for &q in &g(1) {
        ex.push((id(1), history("E0", q, Cutoff::At(bound))));
    }
    for &q in &g(d) {
        ex.push((id(d - 1), history(&id(d), q, Cutoff::At(bound))));
    }
    for i in 2..d {
        for &q in &g(i) {
            ex.push((id(i), history(&id(i - 1), q, Cutoff::Unbounded)));
        }
    }
    Ok((ctx, steps, ex))
}
