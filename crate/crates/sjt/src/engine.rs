//! The stage-by-stage construction.

use crate::bins::{apply_plan, plan_insert, Bin, BinKey, BinPlan};
use crate::env::{Index, Responder, ScenarioError, SjtScenario, Target};
use crate::hyper::{settle_cube, Hypercube, TestRecord, TestStatus};
use crate::params::{HKey, ParamTable};
use crate::tree::{Node, Outcome};
use demuth_core::{carve, BitString, ClopenSet, Dyadic, Profile, StagedClopenFamily};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Names of every check, in report order.
pub const CHECKS: [&str; 19] = [
    "error_measure",
    "bin_bound",
    "bin_partition",
    "bin_certainty",
    "bin_disjoint",
    "u_changes",
    "u_dormant",
    "b_bound",
    "c_bound",
    "children_measure",
    "test_tail",
    "u_cover",
    "u_measure",
    "u_nesting",
    "gamma_consistency",
    "gamma_commit",
    "trace_cap",
    "carve_insufficient",
    "intent_unreturned",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axiom {
    pub set: ClopenSet,
    pub alpha: BitString,
    pub stage: u64,
    pub node: Node,
}

/// What σ asked for at its last visit, pending its tests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub child: Node,
    pub stage: u64,
    pub alpha: BitString,
    pub new_u: ClopenSet,
    pub bins: Vec<BinPlan>,
    pub tests: Vec<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SjtState {
    pub stage: u64,
    pub a: BTreeSet<u64>,
    /// Nonempty U^σ; the root is always the whole space and is not stored.
    pub u: BTreeMap<Node, ClopenSet>,
    pub u_changes: BTreeMap<Node, u64>,
    #[serde(with = "pairs")]
    pub bins: BTreeMap<BinKey, Bin>,
    pub axioms: Vec<Axiom>,
    pub error_set: ClopenSet,
    #[serde(with = "pairs")]
    pub cubes: BTreeMap<HKey, Hypercube>,
    pub tests: BTreeMap<u64, TestRecord>,
    pub next_test: u64,
    pub intents: BTreeMap<Node, Intent>,
    pub last_visit: BTreeMap<Node, u64>,
    pub last_access: BTreeMap<Node, u64>,
    pub h_upto: BTreeMap<Node, u64>,
    /// Current nonempty components V^e_n.
    pub v: Vec<BTreeMap<u64, ClopenSet>>,
    pub path: Vec<Node>,
}

/// Maps with structured keys are written as lists of pairs.
mod pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<K: Serialize, V: Serialize, S: Serializer>(m: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, K: Deserialize<'de> + Ord, V: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<K, V>, D::Error> {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SjtFault {
    BinOverBudget,
    GammaInconsistent,
    CarveOverMeasure,
    BOverK,
    UNestingBreak,
}

impl SjtFault {
    /// The check the fault is meant to trip.
    pub fn check(self) -> &'static str {
        match self {
            SjtFault::BinOverBudget => "bin_bound",
            SjtFault::GammaInconsistent => "gamma_consistency",
            SjtFault::CarveOverMeasure => "carve_insufficient",
            SjtFault::BOverK => "b_bound",
            SjtFault::UNestingBreak => "u_nesting",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breach {
    pub stage: u64,
    pub check: String,
    pub detail: String,
}

/// Outcome of every check at one stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: u64,
    pub path: Vec<Node>,
    pub failures: BTreeMap<String, Vec<String>>,
}

impl StageReport {
    pub fn clean(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Sjt {
    pub scenario: SjtScenario,
    pub params: ParamTable,
    pub state: SjtState,
    pub fault: Option<(SjtFault, u64)>,
    fault_done: bool,
    /// stage ↦ (family, n, target)
    v_events: BTreeMap<u64, Vec<(usize, u64, Target)>>,
    a_events: BTreeMap<u64, Vec<u64>>,
    pub realized: Vec<StagedClopenFamily>,
    pub reports: Vec<StageReport>,
    /// Bin certainties k ≤ 12 met on the way.
    pub low_k: Vec<(u64, BinKey, u64)>,
    failures: BTreeMap<String, Vec<String>>,
}

fn four_delta(exp: u64) -> Dyadic {
    Dyadic::pow2_neg(exp - 2)
}

impl Sjt {
    pub fn new(sc: SjtScenario) -> Result<Sjt, ScenarioError> {
        if !(1..=6).contains(&sc.depth) {
            return Err(ScenarioError::Depth(sc.depth));
        }
        if !(1..=16).contains(&sc.branching) {
            return Err(ScenarioError::Branching(sc.branching));
        }
        if sc.families.len() < sc.depth {
            return Err(ScenarioError::Families { need: sc.depth, got: sc.families.len() });
        }
        if !sc.families[0].g.domain.is_total() {
            return Err(ScenarioError::RootPartial);
        }
        for x in sc.trace.overrides.keys() {
            if !sc.in_tree(x) {
                return Err(ScenarioError::Node(x.clone()));
            }
        }
        let params = ParamTable::derive(&sc);
        let mut v_events: BTreeMap<u64, Vec<(usize, u64, Target)>> = BTreeMap::new();
        let mut counts: BTreeMap<(usize, u64), u64> = BTreeMap::new();
        let mut top: Vec<u64> = vec![0; sc.depth];
        for (e, fam) in sc.families.iter().enumerate().take(sc.depth) {
            for ev in &fam.events {
                let n = match &ev.n {
                    Index::Abs(n) => *n,
                    Index::Rel { node, offset } => {
                        if !sc.in_tree(node) || !node.in_f() || node.len() != e + 1 {
                            return Err(ScenarioError::RelNode { e, node: node.clone(), lvl: e + 1 });
                        }
                        params.n_of(node) + offset
                    }
                };
                if ev.stage <= n && ev.target != Target::Clear {
                    return Err(ScenarioError::Early { e, stage: ev.stage, n });
                }
                match &ev.target {
                    Target::Literal(c) if c.measure() > Dyadic::pow2_neg(2 * n) => return Err(ScenarioError::Quick { e, n }),
                    Target::Hit { node, .. } if !sc.in_tree(node) => return Err(ScenarioError::Node(node.clone())),
                    _ => {}
                }
                let cnt = counts.entry((e, n)).or_default();
                *cnt += 1;
                if *cnt > fam.g.value(n) {
                    return Err(ScenarioError::Changes { e, n, count: *cnt, bound: fam.g.value(n) });
                }
                top[e] = top[e].max(n + 1);
                v_events.entry(ev.stage).or_default().push((e, n, ev.target.clone()));
            }
        }
        let mut a_events: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &(s, x) in &sc.a_script {
            a_events.entry(s).or_default().push(x);
        }
        let h = sc.horizon as usize;
        let realized = (0..sc.depth)
            .map(|e| {
                let mut f = StagedClopenFamily::new(Profile::Quick, top[e] as usize, h);
                for n in 0..top[e] {
                    f.declared_bound.insert(n as usize, BigUint::from(sc.families[e].g.value(n)));
                }
                f
            })
            .collect();
        let state = SjtState { v: vec![BTreeMap::new(); sc.depth], ..Default::default() };
        Ok(Sjt {
            scenario: sc,
            params,
            state,
            fault: None,
            fault_done: false,
            v_events,
            a_events,
            realized,
            reports: Vec::new(),
            low_k: Vec::new(),
            failures: BTreeMap::new(),
        })
    }

    pub fn with_fault(mut self, f: SjtFault, stage: u64) -> Sjt {
        self.fault = Some((f, stage));
        self
    }

    // ---- small queries ----

    pub fn u_of(&self, x: &Node) -> ClopenSet {
        if x.is_root() {
            ClopenSet::full()
        } else {
            self.state.u.get(x).cloned().unwrap_or_default()
        }
    }

    fn set_u(&mut self, x: &Node, c: ClopenSet) {
        let old = self.u_of(x);
        if old != c {
            *self.state.u_changes.entry(x.clone()).or_default() += 1;
        }
        if c.is_empty() {
            self.state.u.remove(x);
        } else {
            self.state.u.insert(x.clone(), c);
        }
    }

    pub fn a_prefix(&self, r: usize) -> BitString {
        BitString::from_bits((0..r as u64).map(|i| self.state.a.contains(&i)).collect())
    }

    pub fn is_current(&self, alpha: &BitString) -> bool {
        *alpha == self.a_prefix(alpha.len())
    }

    fn recompute_error_set(&mut self) {
        let mut e = ClopenSet::empty();
        for ax in &self.state.axioms {
            if !self.is_current(&ax.alpha) {
                e = e.union(&ax.set);
            }
        }
        self.state.error_set = e;
    }

    fn fail(&mut self, check: &str, detail: String) {
        self.failures.entry(check.to_string()).or_default().push(detail);
    }

    /// V^ρ_n for n_ρ ≤ n ≤ s, as (n, set).
    fn v_attacked(&self, rho: &Node) -> Vec<(u64, ClopenSet)> {
        let e = rho.len() - 1;
        let lo = self.params.n_of(rho);
        if lo > self.state.stage {
            return Vec::new();
        }
        self.state.v[e].range(lo..=self.state.stage).map(|(n, c)| (*n, c.clone())).collect()
    }

    /// The pieces X^ρ_n of W^τ, in (|ρ|, ρ, n) order.
    pub fn w_parts(&self, tau: &Node) -> Vec<(Node, u64, ClopenSet)> {
        let u = self.u_of(tau);
        let mut out = Vec::new();
        let mut seen = ClopenSet::empty();
        if u.is_empty() {
            return out;
        }
        for rho in tau.f_set() {
            for (n, v) in self.v_attacked(&rho) {
                let x = u.intersection(&v).difference(&seen);
                if !x.is_empty() {
                    seen = seen.union(&x);
                    out.push((rho.clone(), n, x));
                }
            }
        }
        out
    }

    pub fn w_of(&self, tau: &Node) -> ClopenSet {
        self.w_parts(tau).iter().fold(ClopenSet::empty(), |a, (_, _, x)| a.union(x))
    }

    /// ∪_{n ≥ n_σ} V^σ_n.
    fn tail(&self, sigma: &Node) -> ClopenSet {
        if !sigma.in_f() {
            return ClopenSet::empty();
        }
        self.v_attacked(sigma).iter().fold(ClopenSet::empty(), |a, (_, v)| a.union(v))
    }

    fn children_u(&self, sigma: &Node) -> ClopenSet {
        self.state
            .u
            .iter()
            .filter(|(x, _)| x.parent().as_ref() == Some(sigma))
            .fold(ClopenSet::empty(), |a, (_, c)| a.union(c))
    }

    fn bins_of(&self, sigma: &Node) -> ClopenSet {
        self.state.bins.iter().filter(|(k, _)| &k.holder == sigma).fold(ClopenSet::empty(), |a, (_, b)| a.union(&b.contents))
    }

    fn blocked(&self, c: &Node) -> bool {
        self.state.tests.values().any(|t| {
            t.status.unresolved()
                && ((self.params.answerer(&t.key).as_ref() == Some(c) && c.is_prefix_of(&t.by))
                    || (t.status == TestStatus::Waiting && self.params.owner(&t.key).as_ref() == Some(c)))
        })
    }

    fn busy(&self, key: &HKey) -> bool {
        self.state.tests.values().any(|t| &t.key == key && t.status == TestStatus::Pending)
    }

    fn interval_ready(&self, key: &HKey) -> bool {
        let Some(owner) = self.params.owner(key) else { return false };
        self.state.cubes.contains_key(key) && self.state.h_upto.get(&owner).is_some_and(|&k| k >= self.params.key_k(key))
    }

    // ---- the stage ----

    pub fn run(&mut self) {
        while self.state.stage <= self.scenario.horizon {
            self.step();
        }
    }

    /// Runs stage `self.state.stage` and advances.
    pub fn step(&mut self) {
        let s = self.state.stage;
        self.failures.clear();
        if let Some(xs) = self.a_events.get(&s).cloned() {
            self.state.a.extend(xs);
            self.recompute_error_set();
        }
        if s > 0 {
            self.settle(s - 1);
        }
        self.respond(s);
        self.begin_waiting(s);
        self.apply_v(s);
        self.state.path.clear();
        self.walk(s);
        let e = self.state.error_set.clone();
        for b in self.state.bins.values_mut() {
            b.remove(&e);
        }
        self.state.bins.retain(|_, b| !b.contents.is_empty());
        self.prune(s);
        self.inject(s);
        self.check_invariants();
        self.reports.push(StageReport { stage: s, path: self.state.path.clone(), failures: std::mem::take(&mut self.failures) });
        self.state.stage = s + 1;
    }

    fn settle(&mut self, prev: u64) {
        let keys: Vec<HKey> = self.state.cubes.keys().cloned().collect();
        for key in keys {
            let tests: Vec<TestRecord> = self.state.tests.values().filter(|t| t.key == key && t.begun.is_some()).cloned().collect();
            let refs: Vec<&TestRecord> = tests.iter().collect();
            let a = self.state.a.clone();
            let left = |al: &BitString| (0..al.len()).any(|i| al.bit(i) != a.contains(&(i as u64)));
            let h = self.state.cubes.get_mut(&key).unwrap();
            settle_cube(h, &refs, prev, left);
        }
    }

    fn respond(&mut self, s: u64) {
        let ids: Vec<u64> = self.state.tests.iter().filter(|(_, t)| t.status == TestStatus::Pending).map(|(i, _)| *i).collect();
        for id in ids {
            let t = self.state.tests[&id].clone();
            if !self.is_current(&t.alpha) {
                self.state.tests.get_mut(&id).unwrap().status = TestStatus::Failed(s);
                continue;
            }
            let rho = self.params.answerer(&t.key).unwrap();
            let Responder::Truthful { delay } = self.scenario.trace.responder(&rho) else { continue };
            if s < t.begun.unwrap() + delay.max(1) {
                continue;
            }
            let cube = &self.state.cubes[&t.key];
            let load = cube.load_with(&t.plane, &t.alpha);
            if load as u64 > cube.k {
                self.fail("trace_cap", format!("{} plane {:?} would hold {load} > {}", t.key, t.plane, cube.k));
                continue;
            }
            self.state.cubes.get_mut(&t.key).unwrap().answered.push((t.plane.clone(), t.alpha.clone()));
            self.state.tests.get_mut(&id).unwrap().status = TestStatus::Succeeded(s);
        }
    }

    fn begin_waiting(&mut self, s: u64) {
        let ids: Vec<u64> = self.state.tests.iter().filter(|(_, t)| t.status == TestStatus::Waiting).map(|(i, _)| *i).collect();
        for id in ids {
            let key = self.state.tests[&id].key.clone();
            if self.interval_ready(&key) && !self.busy(&key) {
                let plane = self.state.cubes[&key].plane();
                let b = self.state.cubes[&key].b;
                let t = self.state.tests.get_mut(&id).unwrap();
                t.begun = Some(s);
                t.b = b;
                t.plane = plane;
                t.status = TestStatus::Pending;
            }
        }
    }

    fn apply_v(&mut self, s: u64) {
        let Some(evs) = self.v_events.get(&s).cloned() else { return };
        for (e, n, target) in evs {
            let set = match target {
                Target::Literal(c) => c,
                Target::Clear => ClopenSet::empty(),
                Target::Hit { node, shift } => {
                    let u = self.u_of(&node);
                    let want = std::cmp::min(u.measure().shr(shift as u64), Dyadic::pow2_neg(2 * n));
                    carve(&u, &want, &ClopenSet::empty()).expect("part of its own measure")
                }
            };
            if set.is_empty() {
                self.state.v[e].remove(&n);
            } else {
                self.state.v[e].insert(n, set.clone());
            }
            self.realized[e].components[n as usize].record(s as usize, set);
        }
    }

    fn access(&mut self, x: &Node) {
        let s = self.state.stage;
        self.state.path.push(x.clone());
        self.state.last_access.insert(x.clone(), s);
        if x.is_root() {
            return;
        }
        let d = self.params.delta_exp(x);
        let u = self.u_of(x);
        let bad = u.intersection(&self.w_of(x).union(&self.state.error_set));
        if bad.measure() > Dyadic::pow2_neg(d) {
            self.fail("u_cover", format!("{x}: λ(U∩(W∪E)) = {} > δ", bad.measure()));
        }
        if u.measure() != four_delta(d) {
            self.fail("u_measure", format!("{x}: λ(U) = {} ≠ 4δ", u.measure()));
        }
    }

    fn walk(&mut self, s: u64) {
        let mut sigma = Node::root();
        let fin_root = Node::root().child(Outcome::Fin);
        loop {
            self.access(&sigma);
            if sigma.len() as u64 == s || sigma == fin_root || sigma.len() >= self.scenario.depth {
                return;
            }
            if self.params.p_at(&sigma, s).is_none() {
                return;
            }
            // Substage 1.
            if let Some(k) = self.params.h_defined_upto(&sigma, s) {
                let e = self.state.h_upto.entry(sigma.clone()).or_insert(k);
                *e = (*e).max(k);
            }
            // Substage 2.
            if let Some(intent) = self.state.intents.remove(&sigma) {
                let st: Vec<TestStatus> = intent.tests.iter().map(|i| self.state.tests[i].status).collect();
                // A success only counts while α is still an initial segment of A.
                if st.iter().all(|x| matches!(x, TestStatus::Succeeded(_))) && self.is_current(&intent.alpha) {
                    self.commit(&sigma, intent);
                    return;
                }
                if st.iter().any(|x| x.unresolved()) {
                    self.fail("intent_unreturned", format!("{sigma} revisited with a test outstanding"));
                }
            }
            // Substage 3.
            let prev = self.state.last_visit.insert(sigma.clone(), s).unwrap_or(0);
            let dom = &self.params.g_family(sigma.len()).domain;
            let tau = if dom.size_at(prev) == dom.size_at(s) {
                sigma.child(Outcome::Fin)
            } else {
                match (0..self.scenario.branching).map(|d| sigma.child(Outcome::D(d))).find(|c| !self.blocked(c)) {
                    Some(c) => c,
                    None => return,
                }
            };
            let parts = self.w_parts(&tau);
            let w = parts.iter().fold(ClopenSet::empty(), |a, (_, _, x)| a.union(x));
            let dt = self.params.delta_exp(&tau);
            let free = self.u_of(&tau).difference(&w.union(&self.state.error_set)).measure();
            let three_delta = Dyadic::pow2_neg(dt).mul_int(&BigUint::from(3u8));
            if free <= three_delta {
                self.case_one(&sigma, &tau, parts, w);
                return;
            }
            sigma = tau;
        }
    }

    fn longest_axiom_in(&self, u: &ClopenSet) -> usize {
        self.state.axioms.iter().filter(|a| self.is_current(&a.alpha) && a.set.is_subset(u)).map(|a| a.alpha.len()).max().unwrap_or(0)
    }

    fn case_one(&mut self, sigma: &Node, tau: &Node, parts: Vec<(Node, u64, ClopenSet)>, w: ClopenSet) {
        let s = self.state.stage;
        let e = self.state.error_set.clone();
        let u_sigma = self.u_of(sigma);
        let mut plans = Vec::new();
        for (rho, n, x) in parts {
            let key = BinKey { holder: sigma.clone(), rho: rho.clone(), n };
            let bin = self.state.bins.get(&key).cloned().unwrap_or_default();
            let v_n = self.state.v[rho.len() - 1].get(&n).cloned().unwrap_or_default();
            plans.push(plan_insert(key, &bin, &v_n, &x));
        }
        let ys = plans.iter().fold(ClopenSet::empty(), |a, p| a.union(&p.y));
        let base = self.u_of(tau).difference(&w).difference(&e).union(&ys.difference(&e));
        let target = four_delta(self.params.delta_exp(tau));
        let Some(mut need) = target.checked_sub(&base.measure()) else {
            self.fail("carve_insufficient", format!("{tau}: kept measure exceeds 4δ"));
            return;
        };
        let pool = u_sigma
            .difference(&self.w_of(sigma))
            .difference(&self.tail(sigma))
            .difference(&self.children_u(sigma))
            .difference(&e)
            .difference(&self.bins_of(sigma));
        if self.fault_due(SjtFault::CarveOverMeasure) {
            need = &pool.measure() + &Dyadic::pow2_neg(self.params.delta_exp(tau));
            self.fault_done = true;
        }
        let y_tau = match carve(&pool, &need, &ClopenSet::empty()) {
            Ok(y) => y,
            Err(err) => {
                self.fail("carve_insufficient", format!("{tau}: {err}"));
                return;
            }
        };
        let new_u = base.union(&y_tau);
        // Case 1 uses r ≥ |τ|; bins use r ≥ |σ|+1. Here both floors are |τ|.
        let r_case = self.longest_axiom_in(&u_sigma).max(tau.len());
        let r_bins = self.longest_axiom_in(&u_sigma).max(sigma.len() + 1);
        let alpha = self.a_prefix(r_case.max(r_bins));
        let mut tests = Vec::new();
        if tau.len() > 1 {
            tests.push(self.open_test(HKey::I(tau.clone()), &alpha, sigma, s));
        }
        if sigma.len() > 1 {
            for p in &plans {
                let km = p.certainty();
                if km <= 12 {
                    self.low_k.push((s, p.key.clone(), km));
                }
                let k = km.max(self.params.delta_exp(sigma)).max(2 * p.key.n);
                let key = HKey::J { sigma: sigma.clone(), rho: p.key.rho.clone(), n: p.key.n, k };
                tests.push(self.open_test(key, &alpha, sigma, s));
            }
        }
        self.state.intents.insert(sigma.clone(), Intent { child: tau.clone(), stage: s, alpha, new_u, bins: plans, tests });
    }

    fn open_test(&mut self, key: HKey, alpha: &BitString, by: &Node, s: u64) -> u64 {
        if !self.state.cubes.contains_key(&key) {
            if let Some(side) = self.params.side(&key) {
                let k = self.params.key_k(&key);
                self.state.cubes.insert(key.clone(), Hypercube::new(key.clone(), k, side));
            }
        }
        let id = self.state.next_test;
        self.state.next_test += 1;
        let mut t = TestRecord { key: key.clone(), alpha: alpha.clone(), by: by.clone(), created: s, begun: None, b: 0, plane: vec![], status: TestStatus::Waiting };
        if self.interval_ready(&key) && !self.busy(&key) {
            let h = &self.state.cubes[&key];
            t.begun = Some(s);
            t.b = h.b;
            t.plane = h.plane();
            t.status = TestStatus::Pending;
        }
        self.state.tests.insert(id, t);
        id
    }

    fn commit(&mut self, sigma: &Node, intent: Intent) {
        let s = self.state.stage;
        let tau = intent.child.clone();
        self.set_u(&tau, intent.new_u.clone());
        for p in &intent.bins {
            let bin = self.state.bins.entry(p.key.clone()).or_default();
            apply_plan(bin, p);
        }
        self.state.bins.retain(|k, _| !tau.is_prefix_of(&k.holder));
        for t in self.state.tests.values_mut() {
            if tau.is_prefix_of(&t.by) {
                match t.status {
                    TestStatus::Pending => t.status = TestStatus::Cancelled(s),
                    TestStatus::Waiting => t.status = TestStatus::Cancelled(s),
                    _ => {}
                }
            }
        }
        self.state.intents.retain(|x, _| !tau.is_prefix_of(x));
        let below: Vec<Node> = self.state.u.keys().filter(|x| tau.is_proper_prefix_of(x)).cloned().collect();
        for x in below {
            self.set_u(&x, ClopenSet::empty());
        }
        if tau.len() > 1 {
            let alpha = self.a_prefix(tau.len());
            if intent.alpha.truncate(tau.len()) != alpha {
                self.fail("gamma_commit", format!("{tau}: tested {} but A now gives {alpha}", intent.alpha));
            }
            self.enumerate_axiom(Axiom { set: intent.new_u, alpha, stage: s, node: tau });
        }
        let _ = sigma;
    }

    fn enumerate_axiom(&mut self, ax: Axiom) {
        for old in &self.state.axioms {
            if self.is_current(&old.alpha) && !old.alpha.comparable(&ax.alpha) && !old.set.is_disjoint(&ax.set) {
                let msg = format!("{} at stage {} clashes with {} from stage {}", ax.alpha, ax.stage, old.alpha, old.stage);
                self.failures.entry("gamma_consistency".into()).or_default().push(msg);
            }
        }
        let wrong = !self.is_current(&ax.alpha);
        if wrong {
            self.state.error_set = self.state.error_set.union(&ax.set);
        }
        self.state.axioms.push(ax);
    }

    fn prune(&mut self, s: u64) {
        let live: BTreeSet<u64> = self.state.intents.values().flat_map(|i| i.tests.iter().copied()).collect();
        let cubes = &self.state.cubes;
        self.state.tests.retain(|id, t| {
            if live.contains(id) {
                return true;
            }
            match t.status {
                TestStatus::Failed(x) | TestStatus::Cancelled(x) => x >= s,
                TestStatus::Succeeded(x) => x >= s || cubes.get(&t.key).is_some_and(|h| h.b == t.b),
                _ => true,
            }
        });
    }

    // ---- faults ----

    fn fault_due(&self, f: SjtFault) -> bool {
        matches!(self.fault, Some((g, at)) if g == f && self.state.stage >= at) && !self.fault_done
    }

    fn inject(&mut self, s: u64) {
        let Some((f, _)) = self.fault else { return };
        if !self.fault_due(f) {
            return;
        }
        match f {
            SjtFault::CarveOverMeasure => {}
            SjtFault::BOverK => {
                if let Some(h) = self.state.cubes.values_mut().next() {
                    h.b = h.k + 1;
                    self.fault_done = true;
                }
            }
            SjtFault::BinOverBudget => {
                let holder = self.state.u.keys().find(|x| x.len() > 1 && x.len() < self.scenario.depth && x.in_f()).cloned();
                if let Some(h) = holder {
                    let n = self.params.n_of(&h);
                    let bound = std::cmp::min(Dyadic::pow2_neg(self.params.delta_exp(&h)), Dyadic::pow2_neg(2 * n));
                    let pool = self.u_of(&h).difference(&self.children_u(&h)).difference(&self.bins_of(&h));
                    let want = bound.shl(1);
                    if let Ok(c) = carve(&pool, &want, &ClopenSet::empty()) {
                        let k = want.least_k_below().unwrap();
                        let mut bin = Bin { contents: c.clone(), claims: BTreeMap::new() };
                        bin.claims.insert(k, c);
                        self.state.bins.insert(BinKey { holder: h.clone(), rho: h, n }, bin);
                        self.fault_done = true;
                    }
                }
            }
            SjtFault::GammaInconsistent => {
                let victim = self.state.axioms.iter().find(|a| self.is_current(&a.alpha)).cloned();
                if let Some(a) = victim {
                    let mut bits = a.alpha.bits().to_vec();
                    let last = bits.len() - 1;
                    bits[last] = !bits[last];
                    self.enumerate_axiom(Axiom { set: a.set, alpha: BitString::from_bits(bits), stage: s, node: a.node });
                    self.fault_done = true;
                }
            }
            SjtFault::UNestingBreak => {
                let victim = self.state.u.keys().find(|x| x.len() >= 2).cloned();
                if let Some(x) = victim {
                    let u = self.u_of(&x);
                    let outside = self.u_of(&x.parent().unwrap()).complement();
                    let cell = Dyadic::pow2_neg(self.params.delta_exp(&x) + 3);
                    let drop = carve(&u, &cell, &ClopenSet::empty()).unwrap();
                    let add = carve(&outside, &cell, &ClopenSet::empty()).unwrap();
                    self.state.u.insert(x, u.difference(&drop).union(&add));
                    self.fault_done = true;
                }
            }
        }
    }

    // ---- invariants ----

    pub fn check_invariants(&mut self) {
        let s = self.state.stage;
        let mut out: Vec<(&str, String)> = Vec::new();
        let quarter = Dyadic::pow2_neg(2);
        if self.state.error_set.measure() > quarter {
            out.push(("error_measure", format!("λ(E) = {}", self.state.error_set.measure())));
        }
        for (key, bin) in &self.state.bins {
            let bound = std::cmp::min(Dyadic::pow2_neg(self.params.delta_exp(&key.holder)), Dyadic::pow2_neg(2 * key.n));
            if bin.contents.measure() > bound {
                out.push(("bin_bound", format!("B{}({},{}) = {} > {}", key.holder, key.n, key.rho, bin.contents.measure(), bound)));
            }
            let total: Dyadic = bin.claims.values().map(|c| c.measure()).sum();
            if bin.claimed() != bin.contents || total != bin.contents.measure() {
                out.push(("bin_partition", format!("B{}({},{}) claims do not partition", key.holder, key.n, key.rho)));
            }
            for (k, c) in &bin.claims {
                if c.measure() > Dyadic::pow2_neg(*k).shl(1) {
                    out.push(("bin_certainty", format!("B{}({},{}) certainty {k} holds {}", key.holder, key.n, key.rho, c.measure())));
                }
            }
            let u = self.u_of(&key.holder);
            if !bin.contents.is_subset(&u) || !bin.contents.is_disjoint(&self.children_u(&key.holder)) {
                out.push(("bin_disjoint", format!("B{}({},{}) leaves U or meets a child", key.holder, key.n, key.rho)));
            }
        }
        for (x, c) in &self.state.u {
            match self.params.p_at(x, s) {
                None => out.push(("u_dormant", format!("{x} holds {} with p undefined", c.measure()))),
                Some(p) => {
                    let ch = *self.state.u_changes.get(x).unwrap_or(&0);
                    if BigUint::from(ch) > *p {
                        out.push(("u_changes", format!("{x} changed {ch} times")));
                    }
                }
            }
            let par = x.parent().unwrap();
            if !c.is_subset(&self.u_of(&par)) {
                out.push(("u_nesting", format!("{x} not inside {par}")));
            }
        }
        let keys: Vec<&Node> = self.state.u.keys().collect();
        for (i, a) in keys.iter().enumerate() {
            for b in &keys[i + 1..] {
                if a.parent() == b.parent() && !self.state.u[*a].is_disjoint(&self.state.u[*b]) {
                    out.push(("u_nesting", format!("siblings {a} and {b} overlap")));
                }
            }
        }
        let parents: BTreeSet<Node> = self.state.u.keys().filter_map(|x| x.parent()).collect();
        for p in parents {
            let m = self.children_u(&p).measure();
            if m > Dyadic::pow2_neg(self.params.delta_exp(&p)) {
                out.push(("children_measure", format!("children of {p} hold {m}")));
            }
        }
        for h in self.state.cubes.values() {
            if h.b > h.k {
                out.push(("b_bound", format!("{}: b = {} > k = {}", h.key, h.b, h.k)));
            }
            if let Some((i, c)) = h.c.iter().find(|(_, &c)| BigUint::from(c) > h.side) {
                out.push(("c_bound", format!("{}: c({i}) = {c} exceeds side", h.key)));
            }
        }
        for x in self.params.nodes.keys().filter(|x| x.in_f()) {
            let t = self.tail(x);
            if !t.is_empty() && t.measure() > Dyadic::pow2_neg(self.params.delta_exp(x)) {
                out.push(("test_tail", format!("{x}: tail {}", t.measure())));
            }
        }
        for (c, d) in out {
            self.fail(c, d);
        }
    }

    // ---- results ----

    pub fn breaches(&self) -> Vec<Breach> {
        self.reports
            .iter()
            .flat_map(|r| r.failures.iter().flat_map(move |(c, ds)| ds.iter().map(move |d| Breach { stage: r.stage, check: c.clone(), detail: d.clone() })))
            .collect()
    }

    pub fn breach_names(&self) -> BTreeSet<String> {
        self.reports.iter().flat_map(|r| r.failures.keys().cloned()).collect()
    }

    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(&self.state).expect("state serializes")
    }
}
