//! Seeded random scenarios for fuzzing.

use crate::engine::Sjt;
use crate::env::{Domain, FamilyScript, GTable, Index, Responder, SjtScenario, Target, TracePolicy, VEvent};
use crate::params::ParamTable;
use crate::tree::Node;
use rand::Rng;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug)]
pub struct SjtLimits {
    pub horizon: u64,
    pub depth: usize,
    /// Components per split, that is the branching factor.
    pub branching: u32,
    pub a_changes: usize,
    pub events: usize,
    /// Scripted test events per family, hence test components per family.
    pub per_family: usize,
}

impl Default for SjtLimits {
    fn default() -> Self {
        SjtLimits { horizon: 2000, depth: 4, branching: 3, a_changes: 30, events: 8, per_family: 3 }
    }
}

pub fn random_sjt<R: Rng>(rng: &mut R, lim: &SjtLimits) -> SjtScenario {
    let depth = rng.gen_range(2.min(lim.depth)..=lim.depth);
    let branching = rng.gen_range(2.min(lim.branching)..=lim.branching);
    let horizon = rng.gen_range(lim.horizon / 2..=lim.horizon).max(8);
    let a_script: Vec<(u64, u64)> =
        (0..rng.gen_range(0..=lim.a_changes)).map(|_| (rng.gen_range(1..=horizon / 2), rng.gen_range(0..depth as u64 + 4))).collect();
    let mut families: Vec<FamilyScript> = (0..depth)
        .map(|e| {
            // The root family stays total.
            let cap = (e > 0 && rng.gen_bool(0.2)).then(|| 40000 + rng.gen_range(0..20));
            let g = GTable { default: rng.gen_range(2..5), values: BTreeMap::new(), domain: Domain { base: 40000, rate: 1, cap } };
            FamilyScript { g, events: vec![] }
        })
        .collect();
    let mut overrides = BTreeMap::new();
    let all = Node::all_upto(branching, depth);
    for x in all.iter().filter(|x| x.len() < depth) {
        if rng.gen_bool(0.15) {
            overrides.insert(x.clone(), rng.gen_range(0..branching));
        }
    }
    let others = if rng.gen_bool(0.3) { Responder::Truthful { delay: rng.gen_range(1..5) } } else { Responder::Never };
    let trace = TracePolicy { designated: rng.gen_range(0..branching), overrides, delay: rng.gen_range(1..4), others };
    let mut sc = SjtScenario { depth, branching, horizon, a_script, families: families.clone(), trace };
    let params = ParamTable::derive(&sc);
    for _ in 0..rng.gen_range(0..=lim.events) {
        let e = rng.gen_range(0..depth);
        if families[e].events.len() >= lim.per_family {
            continue;
        }
        let owners: Vec<&Node> = all.iter().filter(|x| x.len() == e + 1 && x.in_f()).collect();
        if owners.is_empty() {
            continue;
        }
        let node = owners[rng.gen_range(0..owners.len())].clone();
        let offset = rng.gen_range(0..2);
        let stage = params.n_of(&node) + offset + 1 + rng.gen_range(0..20);
        if stage > horizon / 2 {
            continue;
        }
        let hit = all[rng.gen_range(0..all.len())].clone();
        let ev = VEvent { stage, n: Index::Rel { node, offset }, target: Target::Hit { node: hit, shift: rng.gen_range(0..3) } };
        families[e].events.push(ev);
        sc.families = families.clone();
        if Sjt::new(sc.clone()).is_err() {
            families[e].events.pop();
        }
    }
    sc.families = families;
    sc
}
