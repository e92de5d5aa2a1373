//! Runs one scenario of any kind and collects its report and artifacts.

use crate::report::RunReport;
use crate::script::{Kind, Scenario};
use demuth_base::{audit_final, Base, BaseFault};
use demuth_core::transforms::{
    bound_report, change_bound_breaches, covering_check, support_breaches, to_clopen, to_quick, u_measure_breaches,
};
use demuth_core::{validate_family, Profile, StagedClopenFamily};
use demuth_sjt::{end_to_end, PathError, Sjt, SjtFault};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    BinOverBudget,
    GammaInconsistent,
    CarveOverMeasure,
    BOverK,
    UNestingBreak,
    DoubleEnumeration,
    SkippedInitialisation,
}

impl Fault {
    pub fn kind(self) -> Kind {
        match self {
            Fault::DoubleEnumeration | Fault::SkippedInitialisation => Kind::Base,
            _ => Kind::Sjt,
        }
    }

    fn sjt(self) -> Option<SjtFault> {
        Some(match self {
            Fault::BinOverBudget => SjtFault::BinOverBudget,
            Fault::GammaInconsistent => SjtFault::GammaInconsistent,
            Fault::CarveOverMeasure => SjtFault::CarveOverMeasure,
            Fault::BOverK => SjtFault::BOverK,
            Fault::UNestingBreak => SjtFault::UNestingBreak,
            _ => return None,
        })
    }

    fn base(self) -> Option<BaseFault> {
        match self {
            Fault::DoubleEnumeration => Some(BaseFault::DoubleEnumeration),
            Fault::SkippedInitialisation => Some(BaseFault::SkippedInitialisation),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    #[serde(default)]
    pub fault: Option<Fault>,
    #[serde(default)]
    pub fault_stage: u64,
    #[serde(default)]
    pub weakened_k: bool,
    #[serde(default)]
    pub verbatim_n_rule: bool,
    /// Snapshot after every stage divisible by this. The final state is always kept.
    #[serde(default)]
    pub snapshot_every: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Options(String),
    #[error("{0}")]
    Engine(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub kind: Kind,
    pub report: RunReport,
    /// Stage snapshots, then the final one under key `None`.
    pub snapshots: Vec<(Option<u64>, String)>,
    /// Extra files by name.
    pub artifacts: BTreeMap<String, String>,
}

impl RunOutput {
    pub fn clean(&self) -> bool {
        self.report.clean()
    }

    pub fn report_text(&self) -> String {
        self.report.to_jsonl(self.kind)
    }
}

fn pretty(v: &impl Serialize) -> String {
    // Through Value so that map keys come out sorted.
    let v = serde_json::to_value(v).expect("serializable");
    serde_json::to_string_pretty(&v).expect("serializable") + "\n"
}

fn due(opts: &RunOptions, s: u64) -> bool {
    opts.snapshot_every.is_some_and(|k| k > 0 && s.is_multiple_of(k))
}

pub fn run(sc: &Scenario, opts: &RunOptions) -> Result<RunOutput, RunError> {
    if let Some(f) = opts.fault {
        if f.kind() != sc.kind() {
            return Err(RunError::Options(format!("fault {f:?} needs a {} scenario", f.kind().name())));
        }
    }
    if opts.weakened_k && sc.kind() != Kind::Transform {
        return Err(RunError::Options("--weakened-k applies to transform scenarios".into()));
    }
    if opts.verbatim_n_rule && sc.kind() != Kind::Base {
        return Err(RunError::Options("--verbatim-n-rule applies to base scenarios".into()));
    }
    match sc {
        Scenario::Transform(f) => run_transform(f, opts),
        Scenario::Sjt(s) => run_sjt(s.clone(), opts),
        Scenario::Base(b) => run_base(b.clone(), opts),
    }
}

fn run_transform(f: &StagedClopenFamily, opts: &RunOptions) -> Result<RunOutput, RunError> {
    let h = f.horizon;
    let conv = to_clopen(f, h).map_err(|e| RunError::Engine(e.to_string()))?;
    let mut rep = RunReport::default();
    let corrected = u_measure_breaches(&conv, false);
    let support = support_breaches(&conv);
    for st in &conv.trace {
        let s = st.stage;
        let bad: Vec<String> =
            corrected.iter().filter(|(_, t)| *t == s).map(|(n, _)| format!("U_{n} has measure {}", st.u[*n].measure())).collect();
        rep.push(s as u64, "u_measure", bad);
        let top = if support.contains(&s) { vec!["mass reached the top level".to_string()] } else { vec![] };
        rep.push(s as u64, "support", top);
    }
    let hs = h as u64;
    let rows = bound_report(f, &conv, h);
    let over = change_bound_breaches(&rows, opts.weakened_k);
    let which = if opts.weakened_k { "verbatim" } else { "safe" };
    rep.push(hs, "change_bound", over.iter().map(|n| format!("U_{n}: {} changes over the {which} bound", rows[*n].observed)).collect());
    match covering_check(f, &conv.output, h) {
        Ok(fails) => rep.push(hs, "covering", fails.iter().map(|c| format!("V_{} leaves {} uncovered", c.n, c.uncovered)).collect()),
        Err(e) => rep.skip(hs, "covering", e.to_string()),
    }
    let quick = (f.profile == Profile::Standard).then(|| to_quick(f));
    if let Some(q) = &quick {
        rep.push(hs, "quick_measure", validate_family(q).iter().map(|v| format!("{v:?}")).collect());
    }
    let claimed = u_measure_breaches(&conv, true);
    rep.notes.insert("claimed_u_measure_breaches".into(), json!(claimed.len()));
    rep.audit = json!({ "final": demuth_core::transforms::final_components(&conv.output, h) });
    let mut artifacts = BTreeMap::new();
    artifacts.insert("output.json".into(), pretty(&conv.output));
    artifacts.insert("bounds.json".into(), pretty(&rows));
    if let Some(q) = quick {
        artifacts.insert("quick.json".into(), pretty(&q));
    }
    let mut snapshots = Vec::new();
    for st in conv.trace.iter().filter(|st| due(opts, st.stage as u64)) {
        snapshots.push((Some(st.stage as u64), pretty(st)));
    }
    snapshots.push((None, pretty(conv.trace.last().expect("stage 0 is always run"))));
    Ok(RunOutput { kind: Kind::Transform, report: rep, snapshots, artifacts })
}

fn run_sjt(sc: demuth_sjt::SjtScenario, opts: &RunOptions) -> Result<RunOutput, RunError> {
    let mut e = Sjt::new(sc).map_err(|x| RunError::Engine(x.to_string()))?;
    if let Some(f) = opts.fault.and_then(Fault::sjt) {
        e = e.with_fault(f, opts.fault_stage);
    }
    let mut snapshots = Vec::new();
    let mut rep = RunReport::default();
    while e.state.stage <= e.scenario.horizon {
        let s = e.state.stage;
        e.step();
        let r = e.reports.last().expect("a report per stage");
        rep.stage(s, &demuth_sjt::CHECKS, &r.failures);
        if due(opts, s) {
            snapshots.push((Some(s), pretty(&e.snapshot())));
        }
    }
    snapshots.push((None, pretty(&e.snapshot())));
    let h = e.scenario.horizon;
    let mut artifacts = BTreeMap::new();
    match end_to_end(&e) {
        Ok(r) => {
            let mut bad = Vec::new();
            if !r.gamma_missing.is_empty() {
                bad.push(format!("no correct axiom covers X at levels {:?}", r.gamma_missing));
            }
            if r.in_error {
                bad.push("X lies in the error set".into());
            }
            if !r.test_hits.is_empty() {
                bad.push(format!("X fails tests at {:?}", r.test_hits));
            }
            rep.push(h, "end_to_end", bad);
            rep.audit = serde_json::to_value(&r).expect("serializable");
            artifacts.insert("path.json".into(), pretty(&r));
        }
        Err(PathError::NotSettled { last }) => {
            rep.skip(h, "end_to_end", format!("last change at stage {last}"));
            rep.audit = json!({ "unsettled": last });
        }
        Err(err) => {
            rep.push(h, "end_to_end", vec![err.to_string()]);
            rep.audit = json!({ "error": err.to_string() });
        }
    }
    Ok(RunOutput { kind: Kind::Sjt, report: rep, snapshots, artifacts })
}

fn run_base(sc: demuth_base::BaseScenario, opts: &RunOptions) -> Result<RunOutput, RunError> {
    let mut b = Base::new(sc).map_err(|x| RunError::Engine(x.to_string()))?;
    if let Some(f) = opts.fault.and_then(Fault::base) {
        b = b.with_fault(f, opts.fault_stage);
    }
    if opts.verbatim_n_rule {
        b = b.with_verbatim_n_rule();
    }
    let mut snapshots = Vec::new();
    let mut rep = RunReport::default();
    while b.state.stage < b.scenario.horizon {
        let r = b.step().clone();
        rep.stage(r.stage, &demuth_base::CHECKS, &r.failures);
        if due(opts, r.stage) {
            snapshots.push((Some(r.stage), pretty(&b.snapshot())));
        }
    }
    snapshots.push((None, pretty(&b.snapshot())));
    let h = b.scenario.horizon;
    match audit_final(&b) {
        Ok(a) => {
            rep.push(h, "audit_untraced", a.untraced.iter().map(|(e, x)| format!("J({x}) missing from T^{e}_{x}")).collect());
            rep.push(h, "audit_oversize", a.oversize.iter().map(|(e, x)| format!("T^{e}_{x} too large")).collect());
            rep.push(h, "audit_uncovered", a.uncovered.iter().map(|n| format!("{n}: V not inside U_n")).collect());
            rep.audit = serde_json::to_value(&a).expect("serializable");
        }
        Err(err) => {
            for c in ["audit_untraced", "audit_oversize", "audit_uncovered"] {
                rep.skip(h, c, err.to_string());
            }
            rep.audit = json!({ "unsettled": err.to_string() });
        }
    }
    Ok(RunOutput { kind: Kind::Base, report: rep, snapshots, artifacts: BTreeMap::new() })
}
