//! Scripted environment: partial orders h_e, functionals Φ_e and a jump
//! table standing in for J^A.

use demuth_core::{BitString, ClopenSet};
use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// h(x) = 2^(scale·x + offset).
    Exp { scale: u64, offset: u64 },
    /// Explicit nondecreasing values; the domain never exceeds the table.
    Table { values: Vec<u64> },
}

/// A staged partial function with an initial-segment domain: x converges at
/// stage start + x·every, up to `cap` arguments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderScript {
    pub shape: Shape,
    pub start: u64,
    pub every: u64,
    #[serde(default)]
    pub cap: Option<u64>,
}

impl OrderScript {
    pub fn value(&self, x: u64) -> BigUint {
        match &self.shape {
            Shape::Exp { scale, offset } => BigUint::one() << (scale * x + offset),
            Shape::Table { values } => BigUint::from(values[x as usize]),
        }
    }

    fn limit(&self) -> Option<u64> {
        let t = match &self.shape {
            Shape::Table { values } => Some(values.len() as u64),
            Shape::Exp { .. } => None,
        };
        match (t, self.cap) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Number of arguments converged by stage s.
    pub fn domain_at(&self, s: u64) -> u64 {
        let d = if s < self.start { 0 } else { (s - self.start) / self.every + 1 };
        self.limit().map_or(d, |l| d.min(l))
    }

    /// Total and unbounded in the script.
    pub fn is_order(&self) -> bool {
        matches!(self.shape, Shape::Exp { scale, .. } if scale > 0) && self.cap.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    /// A single axiom: oracles extending `oracle` give `output`.
    Axiom { oracle: BitString, output: BitString },
    /// Oracles extending `oracle` give 0^ω.
    Zeros { oracle: BitString },
    /// Oracles extending `oracle` give the rest of the oracle.
    Copy { oracle: BitString },
    /// Oracles extending `oracle` list the members of a finite set: each
    /// entry is a 1 followed by the Elias gamma code of the gap to the
    /// previous member, and a 0 ends the list. The output is its
    /// characteristic sequence.
    Sparse { oracle: BitString },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub stage: u64,
    #[serde(flatten)]
    pub kind: RuleKind,
}

impl RuleKind {
    pub fn oracle(&self) -> &BitString {
        match self {
            RuleKind::Axiom { oracle, .. } | RuleKind::Zeros { oracle } | RuleKind::Copy { oracle } | RuleKind::Sparse { oracle } => oracle,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalScript {
    pub rules: Vec<Rule>,
}

impl FunctionalScript {
    /// {X : Φ^X at stage s extends a}.
    pub fn v_set(&self, s: u64, a: &BitString) -> ClopenSet {
        let l = a.len();
        let mut v = ClopenSet::empty();
        for r in self.rules.iter().filter(|r| r.stage <= s) {
            let piece = match &r.kind {
                RuleKind::Axiom { oracle, output } => {
                    if output.len() >= l && output.truncate(l) == *a {
                        ClopenSet::cylinder(oracle.clone())
                    } else {
                        continue;
                    }
                }
                RuleKind::Zeros { oracle } => {
                    if a.bits().iter().any(|&b| b) {
                        continue;
                    }
                    ClopenSet::cylinder(oracle.clone())
                }
                RuleKind::Copy { oracle } => ClopenSet::cylinder(oracle.concat(a)),
                RuleKind::Sparse { oracle } => sparse_v(oracle, a),
            };
            v = v.union(&piece);
        }
        v
    }

    pub fn last_stage(&self) -> u64 {
        self.rules.iter().map(|r| r.stage).max().unwrap_or(0)
    }
}

/// Elias gamma code of g ≥ 1.
pub fn gamma(g: u64) -> Vec<bool> {
    let l = 63 - g.leading_zeros() as usize;
    let mut v = vec![false; l];
    v.extend((0..=l).rev().map(|i| g >> i & 1 == 1));
    v
}

/// Oracles whose listed set agrees with `a` on its length.
fn sparse_v(oracle: &BitString, a: &BitString) -> ClopenSet {
    let mut code = oracle.bits().to_vec();
    let mut prev: i64 = -1;
    for (i, _) in a.bits().iter().enumerate().filter(|(_, &b)| b) {
        code.push(true);
        code.extend(gamma((i as i64 - prev) as u64));
        prev = i as i64;
    }
    let stem = BitString::from_bits(code);
    // Exclude a next member that would still fall inside a.
    let room = a.len() as i64 - 1 - prev;
    let mut bad = ClopenSet::empty();
    for g in 1..=room.max(0) as u64 {
        let mut w = stem.bits().to_vec();
        w.push(true);
        w.extend(gamma(g));
        bad = bad.union(&ClopenSet::cylinder(BitString::from_bits(w)));
    }
    ClopenSet::cylinder(stem).difference(&bad)
}

/// Comparable oracles must give comparable outputs.
fn consistent(a: &RuleKind, b: &RuleKind) -> bool {
    use RuleKind::*;
    let (oa, ob) = (a.oracle(), b.oracle());
    if !oa.comparable(ob) {
        return true;
    }
    let joint = if oa.len() >= ob.len() { oa } else { ob };
    match (a, b) {
        (Axiom { output: p, .. }, Axiom { output: q, .. }) => p.comparable(q),
        (Axiom { output, .. }, Zeros { .. }) | (Zeros { .. }, Axiom { output, .. }) => output.bits().iter().all(|&b| !b),
        (Axiom { output, .. }, Copy { oracle }) | (Copy { oracle }, Axiom { output, .. }) => {
            let start = oracle.len();
            joint.len() >= start + output.len() && joint.bits()[start..start + output.len()] == *output.bits()
        }
        (Zeros { .. }, Zeros { .. }) => true,
        (Copy { oracle: p }, Copy { oracle: q }) => p == q,
        (Sparse { oracle: p }, Sparse { oracle: q }) => p == q,
        (Sparse { .. }, _) | (_, Sparse { .. }) => false,
        (Zeros { .. }, Copy { .. }) | (Copy { .. }, Zeros { .. }) => false,
    }
}

/// J^A(x) with a fixed use: converges from `start` on with value A↾use.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpEntry {
    #[serde(rename = "use")]
    pub use_: u64,
    pub start: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseScenario {
    /// Number of tree levels that act.
    pub depth: usize,
    pub horizon: u64,
    pub orders: Vec<OrderScript>,
    pub functionals: Vec<FunctionalScript>,
    pub jump: Vec<JumpEntry>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BaseScenarioError {
    #[error("depth {0} outside 1..=12")]
    Depth(usize),
    #[error("order {0}: `every` must be positive")]
    Every(usize),
    #[error("order {0}: table values decrease")]
    Decreasing(usize),
    #[error("functional {e}: rules {i} and {j} disagree on comparable oracles")]
    Inconsistent { e: usize, i: usize, j: usize },
}

impl BaseScenario {
    pub fn validate(&self) -> Result<(), BaseScenarioError> {
        if !(1..=12).contains(&self.depth) {
            return Err(BaseScenarioError::Depth(self.depth));
        }
        for (e, o) in self.orders.iter().enumerate() {
            if o.every == 0 {
                return Err(BaseScenarioError::Every(e));
            }
            if let Shape::Table { values } = &o.shape {
                if values.windows(2).any(|w| w[0] > w[1]) {
                    return Err(BaseScenarioError::Decreasing(e));
                }
            }
        }
        for (e, f) in self.functionals.iter().enumerate() {
            for i in 0..f.rules.len() {
                for j in i + 1..f.rules.len() {
                    if !consistent(&f.rules[i].kind, &f.rules[j].kind) {
                        return Err(BaseScenarioError::Inconsistent { e, i, j });
                    }
                }
            }
        }
        Ok(())
    }

    /// Last scripted event that is not order growth.
    pub fn last_event(&self) -> u64 {
        let f = self.functionals.iter().map(FunctionalScript::last_stage).max().unwrap_or(0);
        let j = self.jump.iter().map(|j| j.start).max().unwrap_or(0);
        f.max(j)
    }
}
