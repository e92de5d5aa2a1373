//! δ, ε, n_σ, δ^σ_τ, p and the box demands.
//!
//! Every δ is a power of two and is stored as its exponent: δ_σ = 2^-delta_exp.

use crate::env::{GTable, SjtScenario};
use crate::tree::{Node, Outcome};
use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeParams {
    pub rank: u64,
    /// ε_σ = 2^-eps_exp.
    pub eps_exp: u64,
    /// δ_σ = 2^-delta_exp.
    pub delta_exp: u64,
    /// n_σ, for σ ∈ F.
    pub n: Option<u64>,
    /// The m used for the p bound.
    pub m_witness: u64,
    /// p(σ), when it is ever defined.
    #[serde(with = "opt_big")]
    pub p: Option<BigUint>,
    /// First stage at which p(σ) is defined.
    pub p_stage: Option<u64>,
}

mod opt_big {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BigUint>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.collect_str(x),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigUint>, D::Error> {
        let v: Option<String> = Option::deserialize(d)?;
        v.map(|x| x.parse().map_err(serde::de::Error::custom)).transpose()
    }
}

/// Key of a hypercube.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HKey {
    /// I_τ.
    I(Node),
    /// J_σ(ρ, n, k).
    J { sigma: Node, rho: Node, n: u64, k: u64 },
}

impl std::fmt::Display for HKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HKey::I(t) => write!(f, "I{t}"),
            HKey::J { sigma, rho, n, k } => write!(f, "J{sigma}({rho},{n},{k})"),
        }
    }
}

/// One hypercube's share of a block of h_π^{-1}(k): (1+side)^dim boxes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxDemand {
    pub key: HKey,
    pub side: BigUint,
    pub dim: u64,
}

impl BoxDemand {
    /// Exact number of boxes. Only sensible for small demands.
    pub fn count(&self) -> BigUint {
        num_traits::pow::Pow::pow(&(BigUint::one() + &self.side), self.dim as u32)
    }
}

#[derive(Clone, Debug)]
pub struct ParamTable {
    pub depth: usize,
    pub branching: u32,
    pub nodes: BTreeMap<Node, NodeParams>,
    g: Vec<GTable>,
    h_limits: BTreeMap<Node, Vec<(u64, u64)>>,
}

/// Least m > 5 with 2^-m ≤ 2^-eps_exp.
fn m_for(eps_exp: u64) -> u64 {
    (6..).find(|&m| m >= eps_exp).unwrap()
}

/// Least even n > max(d,10) with 6·2^-n ≤ ε and 2·2^-n ≤ δ.
pub fn n_for(d: u64, eps_exp: u64, delta_exp: u64) -> u64 {
    let fits = |n: u64| {
        // 6·2^-n ≤ 2^-e  ⇔  6 ≤ 2^(n-e)
        let a = n >= eps_exp && (n - eps_exp >= 3);
        let b = n > delta_exp;
        a && b
    };
    let mut n = d.max(10) + 1;
    if n % 2 == 1 {
        n += 1;
    }
    while !fits(n) {
        n += 2;
    }
    n
}

/// δ_{τ⌢o} from δ_τ, ε of the child and the δ^σ constraints.
pub fn child_delta_exp(parent_exp: u64, child_eps_exp: u64, o: Outcome, sub: impl IntoIterator<Item = u64>) -> u64 {
    let m = m_for(child_eps_exp);
    let own = match o {
        Outcome::Fin => parent_exp + 2 * m,
        Outcome::D(d) => parent_exp + 2 * m + d as u64,
    };
    sub.into_iter().fold(own, u64::max)
}

impl ParamTable {
    pub fn derive(sc: &SjtScenario) -> ParamTable {
        let mut t = ParamTable { depth: sc.depth, branching: sc.branching, nodes: BTreeMap::new(), g: sc.families.iter().map(|f| f.g.clone()).collect(), h_limits: BTreeMap::new() };
        for x in Node::all_upto(sc.branching, sc.depth) {
            let rank = x.rank(sc.branching) as u64;
            let eps_exp = rank + 5;
            let delta_exp = match x.parent() {
                None => 2,
                Some(par) => {
                    let pe = t.nodes[&par].delta_exp;
                    let subs: Vec<u64> = x.f_set().iter().map(|s| t.delta_sub_exp(s, &x)).collect();
                    child_delta_exp(pe, eps_exp, x.last().unwrap(), subs)
                }
            };
            let n = match x.last() {
                Some(Outcome::D(d)) => Some(n_for(d as u64, eps_exp, delta_exp)),
                _ => None,
            };
            let fs = x.f_set().len() as u64;
            let m_witness = 8 * fs * delta_exp + 1;
            let np = NodeParams { rank, eps_exp, delta_exp, n, m_witness, p: None, p_stage: None };
            t.nodes.insert(x.clone(), np);
            let (p, ps) = t.compute_p(&x);
            let e = t.nodes.get_mut(&x).unwrap();
            e.p = p;
            e.p_stage = ps;
        }
        let inner: Vec<Node> = t.nodes.keys().filter(|x| x.len() < t.depth).cloned().collect();
        for x in inner {
            let th = t.h_thresholds(&x);
            t.h_limits.insert(x, th);
        }
        t
    }

    pub fn get(&self, x: &Node) -> &NodeParams {
        &self.nodes[x]
    }

    pub fn contains(&self, x: &Node) -> bool {
        self.nodes.contains_key(x)
    }

    pub fn delta_exp(&self, x: &Node) -> u64 {
        self.nodes[x].delta_exp
    }

    pub fn n_of(&self, x: &Node) -> u64 {
        self.nodes[x].n.expect("n is defined on F")
    }

    /// The change-bound table of the test attacked by ρ ∈ F.
    pub fn g_of(&self, rho: &Node) -> &GTable {
        &self.g[rho.len() - 1]
    }

    pub fn g_family(&self, e: usize) -> &GTable {
        &self.g[e]
    }

    /// δ^σ_τ = 2^-2(n_σ+k), where τ is the k-th proper extension of σ.
    pub fn delta_sub_exp(&self, sigma: &Node, tau: &Node) -> u64 {
        let k = tau.suffix_after(sigma).expect("extension").rank(self.branching) as u64;
        2 * (self.n_of(sigma) + k)
    }

    fn compute_p(&self, x: &Node) -> (Option<BigUint>, Option<u64>) {
        let Some(par) = x.parent() else {
            return (Some(BigUint::one()), Some(0));
        };
        let pp = &self.nodes[&par];
        let (Some(p_par), Some(mut stage)) = (pp.p.clone(), pp.p_stage) else {
            return (None, None);
        };
        let np = &self.nodes[x];
        let fs = x.f_set();
        let m = np.m_witness;
        let mut gsum = BigUint::zero();
        for rho in &fs {
            let g = self.g_of(rho);
            match g.domain.stage_for(m) {
                Some(st) => stage = stage.max(st),
                None => return (None, None),
            }
            gsum += BigUint::from(g.sum(self.n_of(rho), m));
        }
        let inv = BigUint::one() << np.delta_exp;
        let mut p = (&p_par << 1u32) + (&inv << 1u32);
        if !fs.is_empty() {
            p += BigUint::from(fs.len() as u64) * BigUint::from(m) * (&inv << 2u32) * (&p_par + gsum);
        }
        (Some(p), Some(stage))
    }

    pub fn p(&self, x: &Node) -> Option<&BigUint> {
        self.nodes[x].p.as_ref()
    }

    pub fn p_at(&self, x: &Node, s: u64) -> Option<&BigUint> {
        let np = &self.nodes[x];
        match np.p_stage {
            Some(st) if st <= s => np.p.as_ref(),
            _ => None,
        }
    }

    /// Box size k of I_τ: 2^-k = 4δ_τ.
    pub fn i_k(&self, tau: &Node) -> u64 {
        self.delta_exp(tau) - 2
    }

    /// Node whose h holds the hypercube.
    pub fn owner(&self, key: &HKey) -> Option<Node> {
        match key {
            HKey::I(t) => t.largest_f().and_then(|r| r.parent()),
            HKey::J { rho, .. } => rho.parent(),
        }
    }

    /// The F-node whose trace answers tests on the hypercube.
    pub fn answerer(&self, key: &HKey) -> Option<Node> {
        match key {
            HKey::I(t) => t.largest_f(),
            HKey::J { rho, .. } => Some(rho.clone()),
        }
    }

    pub fn key_k(&self, key: &HKey) -> u64 {
        match key {
            HKey::I(t) => self.i_k(t),
            HKey::J { k, .. } => *k,
        }
    }

    /// Side length of the hypercube, once the p values involved are defined.
    pub fn side(&self, key: &HKey) -> Option<BigUint> {
        match key {
            HKey::I(t) => Some(self.p(&t.parent()?)? + self.p(t)?),
            HKey::J { sigma, rho, n, k } => {
                let g = self.g_of(rho).value(*n);
                Some((self.p(sigma)? << (*k + 1) as usize) * BigUint::from(g))
            }
        }
    }

    /// Nodes that can hold bins: they choose children, so are shorter than the depth cap.
    fn holders_under<'a>(&'a self, rho: &'a Node) -> impl Iterator<Item = &'a Node> + 'a {
        self.nodes.keys().filter(move |x| rho.is_prefix_of(x) && x.len() > 1 && x.len() < self.depth)
    }

    /// I-demands routed to π⌢d: τ with largest F^τ element π⌢d.
    fn i_routed<'a>(&'a self, rho: &'a Node) -> impl Iterator<Item = &'a Node> + 'a {
        self.nodes.keys().filter(move |t| t.len() > 1 && t.largest_f().as_ref() == Some(rho))
    }

    /// (first k, stage) pairs: from stage on, the demand no longer holds up blocks ≥ k.
    fn h_thresholds(&self, pi: &Node) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        for d in 0..self.branching {
            let rho = pi.child(Outcome::D(d));
            if !self.contains(&rho) {
                continue;
            }
            let n0 = self.n_of(&rho);
            for h in self.holders_under(&rho) {
                let np = &self.nodes[h];
                if let Some(st) = np.p_stage {
                    out.push((np.delta_exp.max(2 * n0), st));
                }
            }
            for t in self.i_routed(&rho) {
                let par = t.parent().unwrap();
                if let (Some(a), Some(b)) = (self.nodes[t].p_stage, self.nodes[&par].p_stage) {
                    out.push((self.i_k(t), a.max(b)));
                }
            }
        }
        out
    }

    /// Largest k such that h_π is defined on every block up to k at stage s.
    /// Demands whose p is never defined are left out: those strategies stay dormant.
    pub fn h_defined_upto(&self, pi: &Node, s: u64) -> Option<u64> {
        let dom = self.g_family(pi.len()).domain.size_at(s);
        if dom == 0 {
            return None;
        }
        let lim = self.h_limits.get(pi).into_iter().flatten().filter(|(_, st)| *st > s).map(|(k, _)| k.saturating_sub(1)).min();
        Some(lim.map_or(2 * dom - 1, |l| l.min(2 * dom - 1)))
    }

    /// The box demands making up block k of h_π, in allocation order.
    pub fn block(&self, pi: &Node, k: u64) -> Vec<BoxDemand> {
        let mut out = Vec::new();
        for d in 0..self.branching {
            let rho = pi.child(Outcome::D(d));
            if !self.contains(&rho) {
                continue;
            }
            let n0 = self.n_of(&rho);
            for h in self.holders_under(&rho) {
                if self.nodes[h].p.is_none() || self.delta_exp(h) > k {
                    continue;
                }
                for n in n0..=k / 2 {
                    let key = HKey::J { sigma: h.clone(), rho: rho.clone(), n, k };
                    let side = self.side(&key).unwrap();
                    out.push(BoxDemand { key, side, dim: k + 1 });
                }
            }
            for t in self.i_routed(&rho) {
                if self.i_k(t) == k {
                    if let Some(side) = self.side(&HKey::I(t.clone())) {
                        out.push(BoxDemand { key: HKey::I(t.clone()), side, dim: k + 1 });
                    }
                }
            }
        }
        out
    }

    /// m_{π⌢d}(k): the demands of block k coming from child d.
    pub fn m_req(&self, rho: &Node, k: u64) -> Vec<BoxDemand> {
        let pi = rho.parent().expect("child");
        self.block(&pi, k)
            .into_iter()
            .filter(|b| self.answerer(&b.key).as_ref() == Some(rho))
            .collect()
    }

    /// Whether the hypercube is a legal key for this table.
    pub fn valid_key(&self, key: &HKey) -> bool {
        match key {
            HKey::I(t) => self.contains(t) && t.len() > 1 && t.largest_f().is_some(),
            HKey::J { sigma, rho, n, k } => {
                self.contains(sigma)
                    && rho.in_f()
                    && rho.is_prefix_of(sigma)
                    && sigma.len() > 1
                    && *n >= self.n_of(rho)
                    && *k >= self.delta_exp(sigma).max(2 * n)
            }
        }
    }
}
