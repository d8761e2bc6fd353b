use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gclat::harness::{check_safety, measure_good_case, table, HarnessError, RunConfig};
use gclat::scenarios::{run_scenario, ScenarioName, ScenarioParams};
use gclat::{ProtocolId, Time};
use serde::Deserialize;

/// Good-case latency simulator for Byzantine broadcast.
#[derive(Parser)]
#[command(name = "gclat", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configured world and report its latency or safety.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        override_resilience: bool,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        horizon: Option<Time>,
        /// Report destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the JSONL trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Build and run a lower-bound scenario and print its verdicts.
    Scenario {
        #[arg(long)]
        name: ScenarioName,
        #[arg(long)]
        f: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        protocol: Option<ProtocolId>,
        #[arg(long)]
        override_resilience: bool,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a suite and write its CSV.
    Table {
        #[arg(long, default_value = "table1")]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print one party's local history from a JSONL trace.
    Trace {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        party: usize,
        /// Only events strictly before this local time.
        #[arg(long)]
        until: Option<Time>,
    },
}

enum Failure {
    /// Something ran and an expectation or bound failed.
    Check(String),
    /// The request itself was unusable.
    Config(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Incomplete(_) => Failure::Check(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(x: &T) -> String {
    serde_json::to_string_pretty(x).expect("report serializes") + "\n"
}

fn cmd_run(
    config: &Path,
    override_resilience: bool,
    m: Option<u32>,
    horizon: Option<Time>,
    out: Option<PathBuf>,
    trace_out: Option<PathBuf>,
) -> Result<bool, Failure> {
    let text = fs::read_to_string(config).map_err(|e| Failure::Config(format!("cannot read {}: {e}", config.display())))?;
    let mut cfg = RunConfig::from_json(&text).map_err(|e| Failure::Config(e.to_string()))?;
    cfg.override_resilience |= override_resilience;
    if let Some(m) = m {
        cfg.m = m;
    }
    if horizon.is_some() {
        cfg.horizon = horizon;
    }
    let out = out.or_else(|| cfg.report_out.clone());
    if let Some(name) = &cfg.scenario {
        let name: ScenarioName = name.parse().map_err(|e: gclat::scenarios::ScenarioError| Failure::Config(e.to_string()))?;
        let p = ScenarioParams {
            n: Some(cfg.n),
            f: Some(cfg.f),
            protocol: Some(cfg.protocol),
            override_resilience: cfg.override_resilience,
            delta: cfg.delta,
            big_delta: Some(cfg.big_delta),
            m: Some(cfg.m),
        };
        return cmd_scenario(name, &p, out.as_deref());
    }
    let trace = cfg.run()?;
    if let Some(p) = trace_out.or_else(|| cfg.trace_out.clone()) {
        emit(Some(&p), &trace.to_jsonl())?;
    }
    let honest_broadcaster = trace.is_honest(trace.broadcaster);
    let unit = cfg.schedule == gclat::harness::Schedule::Uniform;
    if honest_broadcaster && cfg.adversary.is_none() {
        let r = measure_good_case(&trace, unit, cfg.bound())?;
        emit(out.as_deref(), &json(&r))?;
        Ok(r.pass)
    } else {
        let totality = cfg.protocol == ProtocolId::Brb && !honest_broadcaster;
        let r = check_safety(&trace, &cfg.input, totality);
        emit(out.as_deref(), &json(&r))?;
        Ok(r.pass)
    }
}

fn cmd_scenario(name: ScenarioName, p: &ScenarioParams, out: Option<&Path>) -> Result<bool, Failure> {
    let run = run_scenario(name, p).map_err(|e| Failure::Config(e.to_string()))?;
    let rep = run.verdicts().map_err(|e| Failure::Config(e.to_string()))?;
    emit(out, &(rep.to_json() + "\n"))?;
    for v in &rep.verdicts {
        eprintln!(
            "{} {} {}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.execution,
            v.expectation,
            v.detail
        );
    }
    Ok(rep.all_pass())
}

fn cmd_table(suite: &str, out: Option<&Path>) -> Result<bool, Failure> {
    if suite != "table1" {
        return Err(Failure::Config(format!("unknown suite {suite:?}; available: table1")));
    }
    let rows = table::table1()?;
    emit(out, &table::to_csv(&rows))?;
    Ok(rows.iter().all(|r| r.pass))
}

#[derive(Deserialize)]
struct Line {
    party: usize,
    l_time: Time,
    g_time: Time,
    kind: String,
    #[serde(default)]
    digest: Option<String>,
    #[serde(default)]
    peer: Option<Vec<usize>>,
    #[serde(default)]
    value: Option<serde_json::Value>,
    #[serde(default)]
    tag: Option<u64>,
}

fn cmd_trace(input: &Path, party: usize, until: Option<Time>) -> Result<bool, Failure> {
    let text = fs::read_to_string(input).map_err(|e| Failure::Config(format!("cannot read {}: {e}", input.display())))?;
    for (k, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let e: Line = serde_json::from_str(raw).map_err(|e| Failure::Config(format!("line {}: {e}", k + 1)))?;
        if e.party != party || until.is_some_and(|u| e.l_time >= u) {
            continue;
        }
        let mut s = format!("l={} g={} {}", e.l_time, e.g_time, e.kind);
        if let Some(p) = e.peer {
            s += &format!(" peer={p:?}");
        }
        if let Some(d) = e.digest {
            s += &format!(" digest={}", &d[..d.len().min(16)]);
        }
        if let Some(v) = e.value {
            s += &format!(" value={v}");
        }
        if let Some(t) = e.tag {
            s += &format!(" tag={t}");
        }
        println!("{s}");
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run {
            config,
            override_resilience,
            m,
            horizon,
            out,
            trace,
        } => cmd_run(&config, override_resilience, m, horizon, out, trace),
        Cmd::Scenario {
            name,
            f,
            n,
            protocol,
            override_resilience,
            m,
            out,
        } => {
            let p = ScenarioParams {
                n,
                f,
                protocol,
                override_resilience,
                m,
                ..Default::default()
            };
            cmd_scenario(name, &p, out.as_deref())
        }
        Cmd::Table { suite, out } => cmd_table(&suite, out.as_deref()),
        Cmd::Trace { input, party, until } => cmd_trace(&input, party, until),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
