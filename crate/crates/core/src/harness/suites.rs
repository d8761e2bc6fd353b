//! Safety, view-change and lemma suites over the in-region configurations.

use serde::Serialize;

use super::{check_safety, table::good_case_configs, HarnessError, RunConfig, SafetyReport};
use crate::protocol::ProtocolId;
use crate::proto_sync::DGrid;
use crate::scenarios::generic::{psync_view_change_cases, AdversaryId};
use crate::scenarios::lemmas::{psync_commit_views, scan_graded, scan_psync, scan_sync_locks, LemmaViolation};
use crate::scenarios::{run_scenario, ScenarioName, ScenarioParams};
use crate::simnet::{accept_all, run, Trace};
use crate::types::{thresholds, PartyId, Value};

/// One in-region configuration per protocol, as used by the good-case table.
pub fn in_region_configs() -> Vec<RunConfig> {
    let mut out: Vec<RunConfig> = Vec::new();
    for (_, c) in good_case_configs() {
        if !out.iter().any(|o| o.protocol == c.protocol) {
            out.push(c);
        }
    }
    out
}

/// Lower-bound scenarios whose default partition is in-region for the protocol.
pub fn in_region_scenarios() -> Vec<(ScenarioName, ScenarioParams)> {
    vec![
        (ScenarioName::LbAsync, ScenarioParams::default()),
        (ScenarioName::LbSyncDPlusD, ScenarioParams::default()),
        (
            ScenarioName::LbSyncDPlusD,
            ScenarioParams::default()
                .with_n(5)
                .with_f(2)
                .with_protocol(ProtocolId::BbSyncStart),
        ),
        (ScenarioName::LbSync1p5, ScenarioParams::default()),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct SafetyRow {
    pub protocol: ProtocolId,
    pub n: usize,
    pub f: usize,
    /// Adversary name, or `scenario/execution`.
    pub source: String,
    pub report: SafetyReport,
    pub lemma_violations: Vec<LemmaViolation>,
}

impl SafetyRow {
    pub fn pass(&self) -> bool {
        self.report.pass && self.lemma_violations.is_empty()
    }
}

/// Lemma scanners that apply to a trace of `protocol`.
pub fn scan_lemmas(trace: &Trace, cfg: &RunConfig) -> Vec<LemmaViolation> {
    match cfg.protocol {
        ProtocolId::Brb => Vec::new(),
        ProtocolId::PsyncVbb => {
            let t = thresholds(&cfg.resilience()).expect("checked resilience");
            scan_psync(trace, &t, &*accept_all())
        }
        ProtocolId::Bb15 => scan_graded(trace, &DGrid::new(cfg.m, cfg.big_delta), cfg.big_delta),
        _ => scan_sync_locks(trace),
    }
}

fn totality_only(protocol: ProtocolId, trace: &Trace) -> bool {
    protocol == ProtocolId::Brb && !trace.is_honest(trace.broadcaster)
}

/// Every protocol at its in-region size under every generic adversary.
pub fn generic_safety() -> Result<Vec<SafetyRow>, HarnessError> {
    let mut rows = Vec::new();
    for base in in_region_configs() {
        for adv in AdversaryId::ALL {
            let cfg = base.clone().with_adversary(adv);
            let trace = cfg.run()?;
            rows.push(SafetyRow {
                protocol: cfg.protocol,
                n: cfg.n,
                f: cfg.f,
                source: adv.name().to_string(),
                report: check_safety(&trace, &cfg.input, totality_only(cfg.protocol, &trace)),
                lemma_violations: scan_lemmas(&trace, &cfg),
            });
        }
    }
    Ok(rows)
}

/// Every execution of every in-region lower-bound scenario.
pub fn scenario_safety() -> Result<Vec<SafetyRow>, HarnessError> {
    let mut rows = Vec::new();
    for (name, p) in in_region_scenarios() {
        let run = run_scenario(name, &p).map_err(|e| HarnessError::Scenario(e.to_string()))?;
        let spec = &run.spec;
        let mut cfg = RunConfig::new(spec.protocol, spec.n, spec.f);
        cfg.m = p.m.unwrap_or(cfg.m);
        for e in &spec.executions {
            let trace = &run.traces[&e.id];
            rows.push(SafetyRow {
                protocol: spec.protocol,
                n: spec.n,
                f: spec.f,
                source: format!("{name}/{}", e.id),
                report: check_safety(trace, &e.broadcaster_input, totality_only(spec.protocol, trace)),
                lemma_violations: scan_lemmas(trace, &cfg),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ViewChangeRow {
    pub n: usize,
    pub f: usize,
    pub case: String,
    /// Every honest party committed.
    pub all_committed: bool,
    pub agreement: bool,
    /// Views in which honest parties committed.
    pub views: Vec<u64>,
    /// The scripted early committer did commit in view 1, with the common value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub early_commit_kept: Option<bool>,
    pub lemma_violations: Vec<LemmaViolation>,
}

impl ViewChangeRow {
    pub fn pass(&self) -> bool {
        self.all_committed && self.agreement && self.early_commit_kept.unwrap_or(true) && self.lemma_violations.is_empty()
    }
}

/// The scripted Byzantine-leader cases at `(n, f)`.
pub fn view_change_suite(n: usize, f: usize) -> Result<Vec<ViewChangeRow>, HarnessError> {
    let mut cfg = RunConfig::new(ProtocolId::PsyncVbb, n, f);
    if !cfg.resilience().setting.admits(n, f) {
        cfg = cfg.overridden();
    }
    let cases = psync_view_change_cases(n, f)?;
    let mut rows = Vec::new();
    for case in cases {
        let trace = run(case.world, case.horizon)?;
        let commits = trace.commits();
        let honest: Vec<PartyId> = trace.honest_parties().collect();
        let values: Vec<&Value> = honest.iter().filter_map(|&p| commits[p].as_ref().map(|(_, v)| v)).collect();
        let views = psync_commit_views(&trace);
        let early = case.early_committer.map(|x| {
            views.iter().any(|(p, _, w, _)| *p == x && *w == 1) && values.iter().all(|v| Some(*v) == commits[x].as_ref().map(|(_, v)| v))
        });
        rows.push(ViewChangeRow {
            n,
            f,
            case: case.name,
            all_committed: values.len() == honest.len(),
            agreement: values.windows(2).all(|w| w[0] == w[1]),
            views: views.iter().map(|(_, _, w, _)| *w).collect(),
            early_commit_kept: early,
            lemma_violations: scan_lemmas(&trace, &cfg),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_config_per_protocol() {
        let cs = in_region_configs();
        assert_eq!(cs.len(), 6);
        assert!(cs.iter().all(|c| c.resilience().setting.admits(c.n, c.f)));
    }

    #[test]
    fn scenario_rows_are_safe() {
        let rows = scenario_safety().unwrap();
        assert!(rows.iter().all(SafetyRow::pass), "{rows:#?}");
    }

    #[test]
    fn small_view_change_suite_passes() {
        let rows = view_change_suite(4, 1).unwrap();
        assert!(rows.len() >= 10);
        assert!(rows.iter().all(ViewChangeRow::pass));
        assert!(rows.iter().any(|r| r.views.iter().any(|&w| w > 1)));
    }
}
