#![allow(dead_code)]

use demuth_base::{BaseScenario, FunctionalScript, JumpEntry, OrderScript, Rule, RuleKind, Shape};
use demuth_core::{ClopenSet, Profile, StagedClopenFamily};
use demuth_lab::{Scenario, ScenarioScript};
use demuth_sjt::{Domain, FamilyScript, GTable, Index, Node, Responder, SjtScenario, Target, TracePolicy, VEvent};
use num_bigint::BigUint;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

pub fn set(s: &str) -> ClopenSet {
    s.parse().unwrap()
}

pub fn node(s: &str) -> Node {
    s.parse().unwrap()
}

pub fn sjt_plain(depth: usize, horizon: u64) -> SjtScenario {
    let g = GTable { default: 3, values: BTreeMap::new(), domain: Domain::total(40000, 1) };
    SjtScenario {
        depth,
        branching: 2,
        horizon,
        a_script: vec![],
        families: vec![FamilyScript { g, events: vec![] }; depth],
        trace: TracePolicy { designated: 0, overrides: BTreeMap::new(), delay: 2, others: Responder::Never },
    }
}

/// Enough activity by stage 35 for every engine fault to fire.
pub fn sjt_active() -> SjtScenario {
    let mut sc = sjt_plain(3, 120);
    sc.a_script = vec![(30, 1)];
    let ev = VEvent { stage: 40, n: Index::Rel { node: node("<0>"), offset: 0 }, target: Target::Hit { node: node("<0,0>"), shift: 1 } };
    sc.families[0].events.push(ev);
    sc
}

/// Two orders and two functionals; the root alternates between outcomes.
pub fn base_busy(horizon: u64) -> BaseScenario {
    let exp = OrderScript { shape: Shape::Exp { scale: 1, offset: 2 }, start: 0, every: 1, cap: None };
    let table = OrderScript { shape: Shape::Table { values: vec![1, 2, 2] }, start: 3, every: 2, cap: None };
    let rule = |stage, kind| Rule { stage, kind };
    BaseScenario {
        depth: 5,
        horizon,
        orders: vec![exp, table],
        functionals: vec![
            FunctionalScript { rules: vec![rule(1, RuleKind::Sparse { oracle: "e".parse().unwrap() })] },
            FunctionalScript {
                rules: vec![rule(1, RuleKind::Zeros { oracle: "1".parse().unwrap() }), rule(20, RuleKind::Sparse { oracle: "0".parse().unwrap() })],
            },
        ],
        jump: vec![JumpEntry { use_: 3, start: 2 }, JumpEntry { use_: 5, start: 4 }, JumpEntry { use_: 40, start: 10 }],
    }
}

/// V_0 = {1} from stage 1 and V_1 = {0} from stage 2: U_1 changes once.
pub fn two_masses() -> StagedClopenFamily {
    let mut f = StagedClopenFamily::new(Profile::Standard, 2, 12);
    f.components[0].record(1, set("{1}"));
    f.components[1].record(2, set("{0}"));
    f.declared_bound = (0..2).map(|n| (n, BigUint::from(1u8))).collect();
    f
}

pub fn write_script(dir: &Path, name: &str, sc: &Scenario) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, ScenarioScript::wrap(sc, None).to_pretty()).unwrap();
    p
}

pub struct Exit {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Exit {
    /// The last stdout line as JSON.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::from_str(self.stdout.lines().last().unwrap_or("null")).unwrap()
    }

    pub fn breaches(&self) -> Vec<String> {
        self.summary()["breaches"].as_array().map(|a| a.iter().map(|x| x.as_str().unwrap().to_string()).collect()).unwrap_or_default()
    }
}

pub fn lab(args: &[&str]) -> Exit {
    let out = Command::new(env!("CARGO_BIN_EXE_demuth-lab")).args(args).output().unwrap();
    Exit {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}
