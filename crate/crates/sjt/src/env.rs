//! Scenario scripts: the enumeration of A, the test families with their
//! change bounds, and the trace responders.

use crate::tree::Node;
use demuth_core::ClopenSet;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Size of dom g at stage s is `min(base + rate*s, cap)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub base: u64,
    pub rate: u64,
    /// `None` for a total function.
    pub cap: Option<u64>,
}

impl Domain {
    pub fn total(base: u64, rate: u64) -> Domain {
        Domain { base, rate, cap: None }
    }

    pub fn size_at(&self, s: u64) -> u64 {
        let raw = self.base.saturating_add(self.rate.saturating_mul(s));
        self.cap.map_or(raw, |c| raw.min(c))
    }

    pub fn is_total(&self) -> bool {
        self.cap.is_none() && self.rate > 0
    }

    /// First stage at which `n` is in the domain.
    pub fn stage_for(&self, n: u64) -> Option<u64> {
        if n < self.size_at(0) {
            return Some(0);
        }
        if let Some(c) = self.cap {
            if n >= c {
                return None;
            }
        }
        if self.rate == 0 {
            return None;
        }
        Some((n + 1 - self.base).div_ceil(self.rate))
    }
}

/// A change-bound function g^e, given by a default value with exceptions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GTable {
    pub default: u64,
    #[serde(default)]
    pub values: BTreeMap<u64, u64>,
    pub domain: Domain,
}

impl GTable {
    pub fn value(&self, n: u64) -> u64 {
        *self.values.get(&n).unwrap_or(&self.default)
    }

    /// Σ_{n=lo}^{hi} g(n).
    pub fn sum(&self, lo: u64, hi: u64) -> u128 {
        if lo > hi {
            return 0;
        }
        let mut total = self.default as u128 * (hi - lo + 1) as u128;
        for v in self.values.range(lo..=hi).map(|(_, &v)| v) {
            total = total - self.default as u128 + v as u128;
        }
        total
    }
}

/// Component index: absolute, or an offset from n_ρ of an F-node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Index {
    Abs(u64),
    Rel { node: Node, offset: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// A fixed clopen set.
    Literal(ClopenSet),
    /// The leftmost part of the current U of `node`, of measure λ(U)/2^shift,
    /// clipped to the quick bound.
    Hit { node: Node, shift: u32 },
    Clear,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VEvent {
    pub stage: u64,
    pub n: Index,
    pub target: Target,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyScript {
    pub g: GTable,
    #[serde(default)]
    pub events: Vec<VEvent>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Responder {
    Never,
    Truthful { delay: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracePolicy {
    /// Designated truthful child d*(σ) when no override applies.
    pub designated: u32,
    #[serde(default)]
    pub overrides: BTreeMap<Node, u32>,
    pub delay: u64,
    pub others: Responder,
}

impl TracePolicy {
    /// How T^ρ answers, for ρ = π⌢d ∈ F.
    pub fn responder(&self, rho: &Node) -> Responder {
        let parent = rho.parent().expect("F-node has a parent");
        let want = *self.overrides.get(&parent).unwrap_or(&self.designated);
        match rho.last() {
            Some(crate::tree::Outcome::D(d)) if d == want => Responder::Truthful { delay: self.delay },
            _ => self.others,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SjtScenario {
    pub depth: usize,
    pub branching: u32,
    pub horizon: u64,
    /// (stage, element) enumerations into A.
    #[serde(default)]
    pub a_script: Vec<(u64, u64)>,
    /// Family e is the test attacked by the children of nodes of length e.
    pub families: Vec<FamilyScript>,
    pub trace: TracePolicy,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("depth {0} out of range 1..=6")]
    Depth(usize),
    #[error("branching {0} out of range 1..=16")]
    Branching(u32),
    #[error("need {need} families, got {got}")]
    Families { need: usize, got: usize },
    #[error("family 0 must be total")]
    RootPartial,
    #[error("node {0} is outside the tree")]
    Node(Node),
    #[error("family {e}: event at stage {stage} on component {n} breaks V_n,s = 0 for s <= n")]
    Early { e: usize, stage: u64, n: u64 },
    #[error("family {e}: component {n} changes {count} times, g(n) = {bound}")]
    Changes { e: usize, n: u64, count: u64, bound: u64 },
    #[error("family {e}: literal for component {n} exceeds 2^-2n")]
    Quick { e: usize, n: u64 },
    #[error("family {e}: node {node} is not an F-node of level {lvl}")]
    RelNode { e: usize, node: Node, lvl: usize },
}

impl SjtScenario {
    pub fn in_tree(&self, x: &Node) -> bool {
        x.len() <= self.depth && x.max_int().is_none_or(|d| d < self.branching)
    }
}
