//! The stage-by-stage construction with its per-stage checks.

use crate::env::{BaseScenario, BaseScenarioError};
use crate::tree::{Node, Out, Req};
use demuth_core::{BitString, ClopenSet, Dyadic};
use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const CHECKS: [&str; 8] = [
    "witness_bound",
    "restraint_bound",
    "trace_bound",
    "u_monotone",
    "empty_bound",
    "fresh",
    "initialisation",
    "restraint_defined",
];

mod big_str {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn pow2(k: u64) -> BigUint {
    BigUint::one() << k
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NState {
    /// T^σ_x since the last initialisation.
    pub traces: BTreeMap<u64, BTreeSet<BitString>>,
    #[serde(with = "big_str")]
    pub ell: BigUint,
    /// (x, j_s(x)) for jump arguments with h_e(x) < ℓ_s(e), as of the last visit.
    pub restraints: Vec<(u64, u64)>,
    pub last_inf_visit: u64,
    /// Largest n_t(τ) below σ⌢inf at the end of the last inf stage.
    pub inf_bar: Option<u64>,
    pub last_init: u64,
    /// x ↦ last stage σ attended to x.
    pub attended: BTreeMap<u64, u64>,
    pub trace_seq: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PState {
    pub n: Option<u64>,
    pub x: Option<u64>,
    pub y: Option<u64>,
    pub last_init: u64,
    pub nx_seq: u64,
    pub y_seq: u64,
    pub change_seq: u64,
    /// Witnesses enumerated under the current n.
    pub witnesses: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UComp {
    pub set: ClopenSet,
    pub emptied: u64,
    pub owner: Node,
    /// Declared empty since the last assignment.
    pub reset: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GEntry {
    #[serde(with = "big_str")]
    pub value: BigUint,
    /// Stage at which the marker entered A and fixed the value.
    pub stage: u64,
    pub marker: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Marker,
    Witness,
    Injected,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enumeration {
    pub stage: u64,
    pub by: Node,
    pub role: Role,
}

/// One stage at which an extension of β⌢inf enumerated below R(β, m) for m ∈ [m_lo, ell).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowEvent {
    pub stage: u64,
    #[serde(with = "big_str")]
    pub m_lo: BigUint,
    #[serde(with = "big_str")]
    pub ell: BigUint,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseState {
    pub stage: u64,
    pub mentioned: u64,
    pub seq: u64,
    pub a: BTreeMap<u64, Enumeration>,
    pub n_nodes: BTreeMap<Node, NState>,
    pub p_nodes: BTreeMap<Node, PState>,
    pub u: BTreeMap<u64, UComp>,
    pub g: BTreeMap<u64, GEntry>,
    /// n ↦ (selecting node, stage, marker).
    pub selected: BTreeMap<u64, (Node, u64, u64)>,
    pub last_access: BTreeMap<Node, u64>,
    pub access_seq: BTreeMap<Node, u64>,
    pub low_events: BTreeMap<Node, Vec<LowEvent>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFault {
    DoubleEnumeration,
    SkippedInitialisation,
}

impl BaseFault {
    pub fn check(self) -> &'static str {
        match self {
            BaseFault::DoubleEnumeration => "fresh",
            BaseFault::SkippedInitialisation => "initialisation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: u64,
    pub path: Node,
    pub failures: BTreeMap<String, Vec<String>>,
}

impl StageReport {
    pub fn clean(&self) -> bool {
        self.failures.is_empty()
    }
}

pub struct Base {
    pub scenario: BaseScenario,
    pub state: BaseState,
    pub reports: Vec<StageReport>,
    fault: Option<(BaseFault, u64)>,
    fault_done: bool,
    skip_stage: Option<u64>,
    /// σ⌢inf needs ℓ_s(e) > 2^(n + pad) for the n below it.
    pad: u64,
    /// h_e(x) for every x that converges by the horizon.
    hvals: Vec<Vec<BigUint>>,
    failures: BTreeMap<String, Vec<String>>,
    enumerated_now: Vec<(u64, Node)>,
}

impl Base {
    pub fn new(sc: BaseScenario) -> Result<Base, BaseScenarioError> {
        sc.validate()?;
        let hvals = sc.orders.iter().map(|o| (0..o.domain_at(sc.horizon)).map(|x| o.value(x)).collect()).collect();
        Ok(Base {
            scenario: sc,
            state: BaseState::default(),
            reports: Vec::new(),
            fault: None,
            fault_done: false,
            skip_stage: None,
            pad: 2,
            hvals,
            failures: BTreeMap::new(),
            enumerated_now: Vec::new(),
        })
    }

    pub fn with_fault(mut self, f: BaseFault, stage: u64) -> Base {
        self.fault = Some((f, stage));
        self
    }

    /// Uses ℓ_s(e) > 2^n for the n below σ⌢inf, exactly as the outcome rule
    /// is stated. The default asks for 2^(n+2), which is what Cases 2 and 3
    /// rely on when they read R(β, 2^(n+2)).
    pub fn with_verbatim_n_rule(mut self) -> Base {
        self.pad = 0;
        self
    }

    fn fault_due(&self, f: BaseFault) -> bool {
        !self.fault_done && matches!(self.fault, Some((g, at)) if g == f && self.state.stage >= at)
    }

    fn fail(&mut self, check: &str, detail: String) {
        self.failures.entry(check.to_string()).or_default().push(detail);
    }

    pub fn run(&mut self) {
        while self.state.stage < self.scenario.horizon {
            self.step();
        }
    }

    // ---- environment ----

    pub fn domain(&self, e: usize, s: u64) -> u64 {
        self.scenario.orders.get(e).map_or(0, |o| o.domain_at(s))
    }

    pub fn h(&self, e: usize, x: u64) -> &BigUint {
        &self.hvals[e][x as usize]
    }

    /// ℓ_s(e): the greatest h_e(x) converged by s with x ≤ s, or 0.
    pub fn ell(&self, e: usize, s: u64) -> BigUint {
        let d = self.domain(e, s);
        if d == 0 {
            return BigUint::zero();
        }
        self.h(e, (d - 1).min(s)).clone()
    }

    /// #{x : h_d(x) ≤ k} among the arguments converged by s.
    pub fn count_below(&self, d: usize, k: &BigUint, s: u64) -> u64 {
        let dom = self.domain(d, s) as usize;
        if dom == 0 {
            return 0;
        }
        self.hvals[d][..dom].partition_point(|v| v <= k) as u64
    }

    pub fn a_prefix(&self, l: u64) -> BitString {
        BitString::from_bits((0..l).map(|i| self.state.a.contains_key(&i)).collect())
    }

    fn j(&self, x: u64) -> u64 {
        self.scenario.jump.get(x as usize).filter(|j| j.start <= self.state.stage).map_or(0, |j| j.use_)
    }

    fn jump_value(&self, x: u64) -> Option<BitString> {
        let j = self.scenario.jump.get(x as usize).filter(|j| j.start <= self.state.stage)?;
        Some(self.a_prefix(j.use_))
    }

    /// R_s(β, k) as aggregated by β at its last visit.
    pub fn restraint(&self, beta: &Node, d: usize, k: &BigUint) -> u64 {
        let Some(st) = self.state.n_nodes.get(beta) else { return 0 };
        st.restraints.iter().filter(|(x, _)| self.h(d, *x) <= k).map(|(_, j)| *j).max().unwrap_or(0)
    }

    fn large(&mut self) -> u64 {
        self.state.mentioned += 1;
        self.state.mentioned
    }

    fn next_seq(&mut self) -> u64 {
        self.state.seq += 1;
        self.state.seq
    }

    // ---- initialisation ----

    fn initialise(&mut self, pick: impl Fn(&Node) -> bool) {
        let s = self.state.stage;
        for (_, st) in self.state.p_nodes.iter_mut().filter(|(t, _)| pick(t)) {
            st.n = None;
            st.x = None;
            st.y = None;
            st.witnesses = 0;
            st.last_init = s;
        }
        for (_, st) in self.state.n_nodes.iter_mut().filter(|(t, _)| pick(t)) {
            st.traces.clear();
            st.attended.clear();
            st.last_init = s;
        }
    }

    /// Initialises every τ ⊋ σ.
    fn init_below(&mut self, sigma: &Node) {
        // The fault drops every such cascade for the rest of the stage.
        if self.skip_stage == Some(self.state.stage) {
            return;
        }
        if self.fault_due(BaseFault::SkippedInitialisation) && self.state.p_nodes.iter().any(|(t, st)| sigma.is_proper_prefix_of(t) && st.n.is_some()) {
            self.fault_done = true;
            self.skip_stage = Some(self.state.stage);
            return;
        }
        let sigma = sigma.clone();
        self.initialise(move |t| sigma.is_proper_prefix_of(t));
    }

    fn enumerate(&mut self, z: u64, by: &Node, role: Role) {
        if let Some(prev) = self.state.a.get(&z) {
            let detail = format!("{z} by {by}, already enumerated at stage {} by {}", prev.stage, prev.by);
            self.fail("fresh", detail);
            return;
        }
        self.state.a.insert(z, Enumeration { stage: self.state.stage, by: by.clone(), role });
        self.state.mentioned = self.state.mentioned.max(z);
        self.enumerated_now.push((z, by.clone()));
    }

    // ---- the stage ----

    pub fn step(&mut self) -> &StageReport {
        self.state.stage += 1;
        let s = self.state.stage;
        self.failures.clear();
        self.enumerated_now.clear();
        self.state.mentioned = self.state.mentioned.max(s);
        for j in &self.scenario.jump {
            if j.start <= s {
                self.state.mentioned = self.state.mentioned.max(j.use_);
            }
        }
        let mut sigma = Node::root();
        loop {
            let seq = self.next_seq();
            self.state.last_access.insert(sigma.clone(), s);
            self.state.access_seq.insert(sigma.clone(), seq);
            if sigma.len() as u64 >= s || sigma.len() >= self.scenario.depth {
                break;
            }
            let o = match sigma.req() {
                Req::N(e) => self.n_action(&sigma, e),
                Req::P(e, m) => {
                    self.p_action(&sigma, e, m);
                    Out::Go
                }
            };
            sigma = sigma.child(o);
        }
        let end = sigma.clone();
        self.initialise(|t| end.left_of(t));
        self.end_of_stage(&sigma);
        if self.fault_due(BaseFault::DoubleEnumeration) {
            if let Some(&z) = self.state.a.keys().next() {
                self.fault_done = true;
                self.enumerate(z, &sigma, Role::Injected);
            }
        }
        self.record_low_events();
        self.check_invariants();
        let failures = std::mem::take(&mut self.failures);
        self.reports.push(StageReport { stage: s, path: sigma, failures });
        self.reports.last().unwrap()
    }

    fn end_of_stage(&mut self, end: &Node) {
        let s = self.state.stage;
        for l in 0..end.len() {
            if end.outcomes()[l] != Out::Inf {
                continue;
            }
            let beta = end.prefix(l);
            let inf = beta.child(Out::Inf);
            let bar = self.state.p_nodes.iter().filter(|(t, st)| inf.is_prefix_of(t) && st.n.is_some()).filter_map(|(_, st)| st.n).max();
            let st = self.state.n_nodes.entry(beta).or_default();
            st.last_inf_visit = s;
            st.inf_bar = bar;
        }
    }

    fn n_action(&mut self, sigma: &Node, e: usize) -> Out {
        let s = self.state.stage;
        let ell = self.ell(e, s);
        let dom = self.domain(e, s);
        let attended: Vec<u64> = (0..(self.scenario.jump.len() as u64).min(dom)).filter(|&x| *self.h(e, x) < ell).collect();
        for &x in &attended {
            let v = self.jump_value(x);
            let st = self.state.n_nodes.entry(sigma.clone()).or_default();
            st.attended.insert(x, s);
            if let Some(v) = v {
                if st.traces.entry(x).or_default().insert(v) {
                    let fin = sigma.child(Out::Fin);
                    self.initialise(move |t| fin.is_prefix_of(t));
                    let seq = self.next_seq();
                    self.state.n_nodes.get_mut(sigma).unwrap().trace_seq = seq;
                }
            }
        }
        let restraints = attended.iter().map(|&x| (x, self.j(x))).collect();
        let st = self.state.n_nodes.entry(sigma.clone()).or_default();
        st.restraints = restraints;
        st.ell = ell.clone();
        let t = st.last_inf_visit;
        let go = ell > pow2(t + 2) && st.inf_bar.is_none_or(|n| ell > pow2(n + self.pad));
        if go {
            Out::Inf
        } else {
            Out::Fin
        }
    }

    /// Cases 2 and 3 need ℓ_s(d) > bound for every β⌢inf ⊆ σ.
    fn check_defined(&mut self, sigma: &Node, bound: &BigUint, what: &str) {
        let s = self.state.stage;
        for (beta, d) in sigma.inf_ancestors() {
            if self.ell(d, s) <= *bound {
                self.fail("restraint_defined", format!("{sigma}: ell({d}) at {beta} not above {what}"));
            }
        }
    }

    fn blocked(&self, sigma: &Node, k: &BigUint, z: u64) -> bool {
        sigma.inf_ancestors().iter().any(|(beta, d)| self.restraint(beta, *d, k) >= z)
    }

    fn p_action(&mut self, sigma: &Node, e: usize, m: usize) {
        let s = self.state.stage;
        let st = self.state.p_nodes.entry(sigma.clone()).or_default().clone();
        match (st.n, st.x) {
            (Some(n), Some(x)) if !self.state.a.contains_key(&x) => {
                let b = pow2(st.last_init + 2);
                self.check_defined(sigma, &b, "b");
                if self.blocked(sigma, &b, x) {
                    let seq = self.next_seq();
                    let p = self.state.p_nodes.get_mut(sigma).unwrap();
                    p.n = None;
                    p.x = None;
                    p.change_seq = seq;
                    self.init_below(sigma);
                } else {
                    self.enumerate(x, sigma, Role::Marker);
                    let g = self.g_formula(sigma, n);
                    self.state.g.insert(n, GEntry { value: g, stage: s, marker: x });
                }
            }
            (Some(n), Some(_)) => {
                let k = pow2(n + 2);
                self.check_defined(sigma, &k, "k");
                let stale = st.y.is_none_or(|y| self.blocked(sigma, &k, y));
                if stale {
                    let y = self.large();
                    let seq = self.next_seq();
                    let p = self.state.p_nodes.get_mut(sigma).unwrap();
                    p.y = Some(y);
                    p.y_seq = seq;
                    p.change_seq = seq;
                    self.init_below(sigma);
                    self.empty(n, sigma);
                }
                let y = self.state.p_nodes[sigma].y.unwrap();
                let v = self.scenario.functionals.get(e).map(|f| f.v_set(s, &self.a_prefix(y + 1))).unwrap_or_default();
                if v.measure() >= Dyadic::pow2_neg(n) {
                    self.enumerate(y, sigma, Role::Witness);
                    let seq = self.next_seq();
                    let p = self.state.p_nodes.get_mut(sigma).unwrap();
                    p.witnesses += 1;
                    p.y = None;
                    p.change_seq = seq;
                    self.init_below(sigma);
                    self.empty(n, sigma);
                } else {
                    self.assign(n, v);
                }
            }
            _ => {
                let n = self.large().max(m as u64 + 1);
                self.state.mentioned = self.state.mentioned.max(n);
                let x = self.large();
                let seq = self.next_seq();
                let p = self.state.p_nodes.get_mut(sigma).unwrap();
                p.n = Some(n);
                p.x = Some(x);
                p.y = None;
                p.witnesses = 0;
                p.nx_seq = seq;
                p.change_seq = seq;
                self.state.selected.insert(n, (sigma.clone(), s, x));
                self.init_below(sigma);
            }
        }
    }

    /// 2^n + Σ_{β⌢inf ⊆ σ} 2^{n+2}·#{x : h_d(x) ≤ 2^{n+2}}, now.
    fn g_formula(&self, sigma: &Node, n: u64) -> BigUint {
        let k = pow2(n + 2);
        let mut g = pow2(n);
        for (_, d) in sigma.inf_ancestors() {
            g += &k * BigUint::from(self.count_below(d, &k, self.state.stage));
        }
        g
    }

    /// g(n) with the stage at which it was fixed; 0 before that.
    pub fn compute_g(&self, n: u64) -> (BigUint, Option<u64>) {
        self.state.g.get(&n).map_or((BigUint::zero(), None), |g| (g.value.clone(), Some(g.stage)))
    }

    fn empty(&mut self, n: u64, owner: &Node) {
        let c = self.state.u.entry(n).or_insert_with(|| UComp { set: ClopenSet::empty(), emptied: 0, owner: owner.clone(), reset: true });
        c.set = ClopenSet::empty();
        c.emptied += 1;
        c.reset = true;
    }

    fn assign(&mut self, n: u64, v: ClopenSet) {
        let c = self.state.u.get_mut(&n).expect("a component is emptied before its first assignment");
        let shrinks = !c.reset && !c.set.is_subset(&v);
        c.set = v;
        c.reset = false;
        if shrinks {
            self.fail("u_monotone", format!("U_{n} shrank without being emptied"));
        }
    }

    fn record_low_events(&mut self) {
        let s = self.state.stage;
        let now = std::mem::take(&mut self.enumerated_now);
        for (z, by) in &now {
            for (beta, d) in by.inf_ancestors() {
                let Some(st) = self.state.n_nodes.get(&beta) else { continue };
                let m_lo = st.restraints.iter().filter(|(_, j)| *j > *z).map(|(x, _)| self.h(d, *x)).min().cloned();
                let Some(m_lo) = m_lo else { continue };
                let ell = st.ell.clone();
                let ev = self.state.low_events.entry(beta).or_default();
                match ev.last_mut() {
                    Some(last) if last.stage == s => last.m_lo = last.m_lo.clone().min(m_lo),
                    _ => ev.push(LowEvent { stage: s, m_lo, ell }),
                }
            }
        }
        self.enumerated_now = now;
    }

    // ---- checks ----

    fn check_invariants(&mut self) {
        let mut out: Vec<(&str, String)> = Vec::new();
        for (sigma, st) in &self.state.p_nodes {
            if let Some(n) = st.n {
                if n < 64 && st.witnesses > 1u64 << n {
                    out.push(("witness_bound", format!("{sigma}: {} witnesses for n = {n}", st.witnesses)));
                }
                self.check_init_discipline(sigma, st, &mut out);
            }
        }
        for (beta, evs) in &self.state.low_events {
            for e in evs {
                let count = evs.iter().filter(|f| f.m_lo <= e.m_lo && e.m_lo < f.ell).count();
                if BigUint::from(count) >= e.m_lo {
                    out.push(("restraint_bound", format!("{beta}: {count} low stages for m = {}", e.m_lo)));
                }
            }
        }
        for (sigma, st) in &self.state.n_nodes {
            let Req::N(e) = sigma.req() else { continue };
            for (x, t) in &st.traces {
                if *x < self.hvals.get(e).map_or(0, |v| v.len() as u64) && BigUint::from(t.len()) > *self.h(e, *x) {
                    out.push(("trace_bound", format!("{sigma}: |T_{x}| = {}", t.len())));
                }
            }
        }
        for (n, c) in &self.state.u {
            let (g, _) = self.compute_g(*n);
            if BigUint::from(c.emptied) > g {
                out.push(("empty_bound", format!("U_{n} emptied {} times, g = {g}", c.emptied)));
            }
        }
        for (k, d) in out {
            self.fail(k, d);
        }
    }

    fn check_init_discipline(&self, tau: &Node, st: &PState, out: &mut Vec<(&'static str, String)>) {
        let since = if st.y.is_some() { st.nx_seq.min(st.y_seq) } else { st.nx_seq };
        for l in 0..tau.len() {
            let sigma = tau.prefix(l);
            match sigma.req() {
                Req::P(..) => {
                    if let Some(p) = self.state.p_nodes.get(&sigma) {
                        if p.change_seq > since {
                            out.push(("initialisation", format!("{tau} kept parameters after {sigma} changed")));
                        }
                    }
                }
                Req::N(_) => {
                    if tau.outcomes()[l] == Out::Fin {
                        if let Some(nst) = self.state.n_nodes.get(&sigma) {
                            if nst.trace_seq > since {
                                out.push(("initialisation", format!("{tau} kept parameters after {sigma} traced")));
                            }
                        }
                    }
                }
            }
        }
        for (rho, seq) in &self.state.access_seq {
            if rho.left_of(tau) && *seq > since {
                out.push(("initialisation", format!("{tau} kept parameters after {rho} was visited")));
            }
        }
    }

    pub fn breaches(&self) -> BTreeMap<u64, BTreeMap<String, Vec<String>>> {
        self.reports.iter().filter(|r| !r.clean()).map(|r| (r.stage, r.failures.clone())).collect()
    }

    pub fn breach_names(&self) -> BTreeSet<String> {
        self.reports.iter().flat_map(|r| r.failures.keys().cloned()).collect()
    }

    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(&self.state).expect("state serializes")
    }
}
