//! One line per acceptance criterion. Runs without the libtest harness so the
//! lines always show; exits non-zero when any criterion fails.

use std::process::ExitCode;

use gclat::harness::suites::{generic_safety, scan_lemmas, scenario_safety, view_change_suite};
use gclat::harness::{measure_good_case, table, Measured, RunConfig, Schedule};
use gclat::scenarios::lemmas::ba_enumeration;
use gclat::scenarios::{run_scenario, ScenarioName, ScenarioParams};
use gclat::simnet::{assign_async_rounds, EventKind, Trace};
use gclat::{ProtocolId, Time};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn t(v: i64) -> Time {
    Time::int(v)
}

fn check(ok: bool, pass: String, fail: String) -> Outcome {
    if ok {
        Ok(pass)
    } else {
        Err(fail)
    }
}

fn last_commit(trace: &Trace) -> Option<Time> {
    let c = trace.commits();
    trace.honest_parties().map(|p| c[p].as_ref().map(|(t, _)| *t)).try_fold(Time::ZERO, |m, x| x.map(|x| m.max(x)))
}

/// Async round of every honest Commit event.
fn commit_rounds(trace: &Trace) -> Vec<u32> {
    let r = assign_async_rounds(trace);
    trace
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| trace.is_honest(e.party) && matches!(e.kind, EventKind::Commit(_)))
        .map(|(i, _)| r.event_round[i])
        .collect()
}

fn c1() -> Outcome {
    let mut good = 0;
    let mut total = 0;
    for (n, f) in [(4, 1), (7, 2)] {
        for seed in 0..20 {
            let trace = RunConfig::new(ProtocolId::Brb, n, f)
                .with_schedule(Schedule::Layered { seed })
                .run()
                .map_err(|e| e.to_string())?;
            let rounds = commit_rounds(&trace);
            total += 1;
            if rounds.len() >= n - f && rounds.iter().all(|&r| r == 2) {
                good += 1;
            }
        }
    }
    check(good == total, format!("{good}/{total} schedules commit in round 2"), format!("{good}/{total} schedules"))
}

fn c2() -> Outcome {
    let mut seen = Vec::new();
    for (n, f) in [(4, 1), (9, 2)] {
        let c = RunConfig::new(ProtocolId::PsyncVbb, n, f);
        let r = measure_good_case(&c.run().map_err(|e| e.to_string())?, true, c.bound()).map_err(|e| e.to_string())?;
        seen.push(r.measured);
    }
    let ok = seen.iter().all(|m| *m == Measured::Rounds(t(2)));
    check(ok, "(4,1) and (9,2) measure 2 rounds".into(), format!("measured {seen:?}"))
}

fn c3() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, f) in [(4, 1), (8, 2)] {
        let rows = view_change_suite(n, f).map_err(|e| e.to_string())?;
        let pass = rows.iter().filter(|r| r.pass()).count();
        ok &= rows.len() >= 10 && pass == rows.len();
        parts.push(format!("({n},{f}) {pass}/{}", rows.len()));
    }
    check(ok, parts.join(", "), parts.join(", "))
}

fn c4() -> Outcome {
    let (big, m) = (t(10), 5);
    let rows = [
        ("2δ (4,1) δ=2", RunConfig::new(ProtocolId::Bb2Delta, 4, 1).with_delta(t(2)), t(2) * 2),
        ("n/3 (3,1) δ=2", RunConfig::new(ProtocolId::BbN3, 3, 1).with_delta(t(2)), big + t(2)),
        ("syncstart (5,2) δ=3", RunConfig::new(ProtocolId::BbSyncStart, 5, 2).with_delta(t(3)), big + t(3)),
        (
            "1.5δ (5,2) δ=2",
            RunConfig::new(ProtocolId::Bb15, 5, 2).with_delta(t(2)).with_m(m).with_skew(t(1)),
            big + t(2) + t(1),
        ),
    ];
    let mut notes = Vec::new();
    for (label, c, want) in rows {
        let got = last_commit(&c.run().map_err(|e| e.to_string())?).ok_or(format!("{label}: incomplete"))?;
        if got != want {
            return Err(format!("{label}: {got} ≠ {want}"));
        }
        notes.push(format!("{label}={got}"));
    }
    // Off-grid δ: the grid bound is (1 + 1/(2m))Δ + 1.5δ.
    let off = RunConfig::new(ProtocolId::Bb15, 5, 2).with_delta(t(3)).with_m(m).with_skew(t(1));
    let bound = big + Time::new(10, 2 * m as i64) + Time::new(9, 2);
    let got = last_commit(&off.run().map_err(|e| e.to_string())?).ok_or("off-grid: incomplete")?;
    if got != t(15) || got > bound || bound != Time::new(31, 2) {
        return Err(format!("off-grid δ=3: {got} vs bound {bound}"));
    }
    notes.push(format!("1.5δ δ=3={got}≤{bound}"));
    // Seeded delays within δ never exceed Δ+δ for the n/3 protocol.
    for seed in 0..10 {
        let c = RunConfig::new(ProtocolId::BbN3, 3, 1)
            .with_delta(t(2))
            .with_schedule(Schedule::Seeded { seed });
        let got = last_commit(&c.run().map_err(|e| e.to_string())?).ok_or("seeded: incomplete")?;
        if got > big + t(2) {
            return Err(format!("n/3 seed {seed}: {got} > 12"));
        }
    }
    notes.push("n/3 seeded ≤12".into());
    Ok(notes.join(", "))
}

fn c5() -> Outcome {
    let g = generic_safety().map_err(|e| e.to_string())?;
    let s = scenario_safety().map_err(|e| e.to_string())?;
    let bad: Vec<String> = g
        .iter()
        .chain(&s)
        .filter(|r| !r.report.pass)
        .map(|r| format!("{:?} ({},{}) {}", r.protocol, r.n, r.f, r.source))
        .collect();
    check(
        bad.is_empty() && g.len() == 60,
        format!("{} generic + {} scenario runs safe", g.len(), s.len()),
        format!("{} rows, failing {bad:?}", g.len()),
    )
}

fn c6() -> Outcome {
    let p = ScenarioParams::default().with_n(3).with_f(1).overridden();
    let rep = run_scenario(ScenarioName::LbAsync, &p).map_err(|e| e.to_string())?.verdicts().map_err(|e| e.to_string())?;
    let v = rep.verdicts.iter().find(|v| v.expectation == "AgreementViolated").ok_or("no AgreementViolated verdict")?;
    check(v.pass, format!("{} AgreementViolated: {}", v.execution, v.detail), v.detail.clone())
}

fn c7() -> Outcome {
    let mut notes = Vec::new();
    for (name, want) in [(ScenarioName::LbSync1p5, 4), (ScenarioName::LbPsync, 2)] {
        let rep = run_scenario(name, &ScenarioParams::default())
            .map_err(|e| e.to_string())?
            .verdicts()
            .map_err(|e| e.to_string())?;
        let h: Vec<_> = rep.verdicts.iter().filter(|v| v.expectation.starts_with("LocalHistoryEqual")).collect();
        let pass = h.iter().filter(|v| v.pass).count();
        if h.len() != want || pass != want {
            return Err(format!("{name}: {pass}/{} history checks", h.len()));
        }
        notes.push(format!("{name} {pass}/{want}"));
    }
    Ok(notes.join(", "))
}

fn c8() -> Outcome {
    let mut scanned = 0;
    let mut violations = Vec::new();
    let configs = [
        RunConfig::new(ProtocolId::PsyncVbb, 4, 1),
        RunConfig::new(ProtocolId::PsyncVbb, 9, 2),
        RunConfig::new(ProtocolId::Bb2Delta, 4, 1).with_delta(t(2)),
        RunConfig::new(ProtocolId::BbN3, 3, 1).with_delta(t(2)),
        RunConfig::new(ProtocolId::BbSyncStart, 5, 2).with_delta(t(3)),
        RunConfig::new(ProtocolId::Bb15, 5, 2).with_delta(t(2)).with_skew(t(1)),
        RunConfig::new(ProtocolId::Bb15, 5, 2).with_delta(t(3)).with_skew(t(1)),
    ];
    for c in &configs {
        let trace = c.run().map_err(|e| e.to_string())?;
        scanned += 1;
        violations.extend(scan_lemmas(&trace, c));
    }
    for (n, f) in [(4, 1), (8, 2)] {
        for r in view_change_suite(n, f).map_err(|e| e.to_string())? {
            scanned += 1;
            violations.extend(r.lemma_violations);
        }
    }
    for r in generic_safety().map_err(|e| e.to_string())? {
        if r.protocol != ProtocolId::Brb {
            scanned += 1;
            violations.extend(r.lemma_violations);
        }
    }
    let mut ba = Vec::new();
    for (n, f) in [(3, 1), (5, 2)] {
        let r = ba_enumeration(n, f);
        if r.agreement_violations + r.validity_violations + r.undecided > 0 {
            return Err(format!("BA ({n},{f}): {r:?}"));
        }
        ba.push(format!("BA ({n},{f}) {} runs", r.runs));
    }
    check(
        violations.is_empty(),
        format!("{scanned} traces clean, {}", ba.join(", ")),
        format!("violations {violations:?}"),
    )
}

fn artifacts() -> Result<String, String> {
    let mut out = table::to_csv(&table::table1().map_err(|e| e.to_string())?);
    for name in ScenarioName::ALL {
        let run = run_scenario(name, &ScenarioParams::default()).map_err(|e| e.to_string())?;
        out += &run.verdicts().map_err(|e| e.to_string())?.to_json();
    }
    let p = ScenarioParams::default().with_n(3).with_f(1).overridden();
    out += &run_scenario(ScenarioName::LbAsync, &p).map_err(|e| e.to_string())?.verdicts().map_err(|e| e.to_string())?.to_json();
    out += &serde_json::to_string(&generic_safety().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    out += &serde_json::to_string(&view_change_suite(8, 2).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    out += &serde_json::to_string(&ba_enumeration(3, 1)).map_err(|e| e.to_string())?;
    Ok(out)
}

fn c9() -> Outcome {
    let a = artifacts()?;
    let b = artifacts()?;
    check(a == b, format!("{} bytes identical across runs", a.len()), "artifacts differ between runs".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("async good case", c1),
        ("psync good case", c2),
        ("psync view change", c3),
        ("sync latencies", c4),
        ("safety under adversaries", c5),
        ("async split out of region", c6),
        ("indistinguishability", c7),
        ("lemma scans and BA enumeration", c8),
        ("determinism", c9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(s) => println!("criterion {} {name}: PASS ({s})", i + 1),
            Err(s) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({s})", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
