use criterion::{criterion_group, criterion_main, Criterion};
use gclat::harness::{RunConfig, Schedule};
use gclat::scenarios::{run_scenario, ScenarioName, ScenarioParams};
use gclat::{ProtocolId, Time};

fn good_case(c: &mut Criterion) {
    let runs = [
        ("brb_7_2", RunConfig::new(ProtocolId::Brb, 7, 2).with_schedule(Schedule::Layered { seed: 3 })),
        ("psync_9_2", RunConfig::new(ProtocolId::PsyncVbb, 9, 2)),
        ("sync_2delta_4_1", RunConfig::new(ProtocolId::Bb2Delta, 4, 1).with_delta(Time::int(2))),
        (
            "sync_1p5_5_2",
            RunConfig::new(ProtocolId::Bb15, 5, 2).with_delta(Time::int(2)).with_skew(Time::int(1)),
        ),
    ];
    let mut g = c.benchmark_group("good_case");
    for (name, cfg) in runs {
        g.bench_function(name, |b| b.iter(|| cfg.run().unwrap()));
    }
    g.finish();
}

fn scenarios(c: &mut Criterion) {
    let mut g = c.benchmark_group("scenario");
    for name in [ScenarioName::LbSync1p5, ScenarioName::LbPsync] {
        g.bench_function(name.name(), |b| {
            b.iter(|| run_scenario(name, &ScenarioParams::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, good_case, scenarios);
criterion_main!(benches);
