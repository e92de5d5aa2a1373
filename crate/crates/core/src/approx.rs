//! Staged approximations: ω-c.a. functions and families of clopen sets
//! given by finite stage grids.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::cantor::{BitString, ClopenSet};
use crate::dyadic::Dyadic;

/// Serde helper writing big integers as decimal strings.
pub mod big_dec {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Same as [`big_dec`] for maps keyed by component index.
pub mod big_dec_map {
    use std::collections::BTreeMap;

    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &BTreeMap<usize, BigUint>, s: S) -> Result<S::Ok, S::Error> {
        let m: BTreeMap<usize, String> = v.iter().map(|(k, x)| (*k, x.to_str_radix(10))).collect();
        m.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, BigUint>, D::Error> {
        let m = BTreeMap::<usize, String>::deserialize(d)?;
        m.into_iter()
            .map(|(k, v)| v.parse().map(|b| (k, b)).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApproxError {
    #[error("component {n} out of range (family has {components})")]
    OutOfRange { n: usize, components: usize },
    #[error("point of length {len} is shorter than the longest prefix ({needed})")]
    DepthTooSmall { len: usize, needed: usize },
}

/// A finite table f(n, s) with a declared mind-change bound per n.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagedFunction {
    /// `values[n][s]`.
    pub values: Vec<Vec<i64>>,
    pub declared_bound: BTreeMap<usize, u64>,
}

impl StagedFunction {
    pub fn mind_changes(&self, n: usize) -> Result<u64, ApproxError> {
        let row = self.values.get(n).ok_or(ApproxError::OutOfRange { n, components: self.values.len() })?;
        Ok(row.windows(2).filter(|w| w[0] != w[1]).count() as u64)
    }

    /// Components whose change count exceeds the declared bound.
    pub fn violations(&self) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&n| match self.declared_bound.get(&n) {
                Some(&g) => self.mind_changes(n).unwrap_or(0) > g,
                None => false,
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// λ(V_n) ≤ 2^-n.
    Standard,
    /// λ(V_n) ≤ 2^-2n.
    Quick,
    /// λ(V_n) ≤ 2^-n+1; the shifted output of the clopen conversion.
    Doubled,
    /// λ(V_n) ≤ 2^-n+2; the unshifted output of the clopen conversion.
    Cascade,
}

impl Profile {
    pub fn bound(self, n: usize) -> Dyadic {
        let n = n as u64;
        match self {
            Profile::Standard => Dyadic::pow2_neg(n),
            Profile::Quick => Dyadic::pow2_neg(2 * n),
            Profile::Doubled => Dyadic::pow2_neg(n).shl(1),
            Profile::Cascade => Dyadic::pow2_neg(n).shl(2),
        }
    }

    /// Least stage at which component `n` may be nonempty. The cascade
    /// output can push mass to high levels within a single stage, so it is
    /// exempt.
    fn first_stage(self, n: usize) -> usize {
        match self {
            Profile::Doubled | Profile::Cascade => 0,
            _ => n + 1,
        }
    }
}

/// Change events `(stage, value)` for one component, sorted by stage.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub events: Vec<(usize, ClopenSet)>,
}

impl Component {
    pub fn at(&self, s: usize) -> ClopenSet {
        let k = self.events.partition_point(|(t, _)| *t <= s);
        if k == 0 {
            ClopenSet::empty()
        } else {
            self.events[k - 1].1.clone()
        }
    }

    /// Appends a value at stage `s` if it differs from the current one.
    pub fn record(&mut self, s: usize, v: ClopenSet) {
        let cur = self.events.last().map(|(_, c)| c.clone()).unwrap_or_default();
        if cur != v {
            if let Some(last) = self.events.last_mut() {
                if last.0 == s {
                    last.1 = v;
                    return;
                }
            }
            self.events.push((s, v));
        }
    }

    /// Number of stages `s < horizon` with `V(s+1) != V(s)`.
    pub fn changes(&self, horizon: usize) -> u64 {
        let mut prev = ClopenSet::empty();
        let mut count = 0;
        for (t, v) in &self.events {
            if *t > horizon {
                break;
            }
            if *v != prev {
                // A value set at stage 0 is the starting value, not a change.
                if *t > 0 {
                    count += 1;
                }
                prev = v.clone();
            }
        }
        count
    }

    pub fn last_change(&self) -> Option<usize> {
        self.events.last().map(|(t, _)| *t)
    }
}

/// A test given by finitely many staged clopen components.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagedClopenFamily {
    pub profile: Profile,
    pub horizon: usize,
    pub components: Vec<Component>,
    /// Declared change bound g(n). Components without an entry must stay empty.
    #[serde(with = "big_dec_map")]
    pub declared_bound: BTreeMap<usize, BigUint>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    MeasureBound { n: usize, stage: usize, measure: Dyadic, bound: Dyadic },
    ChangeBound { n: usize, observed: u64, #[serde(with = "big_dec")] declared: BigUint },
    Normalization { n: usize, stage: usize },
    DomainGap { missing: usize },
    Undeclared { n: usize, stage: usize },
    UnsortedEvents { n: usize },
}

impl StagedClopenFamily {
    pub fn new(profile: Profile, n: usize, horizon: usize) -> StagedClopenFamily {
        StagedClopenFamily {
            profile,
            horizon,
            components: vec![Component::default(); n],
            declared_bound: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn at(&self, n: usize, s: usize) -> ClopenSet {
        self.components.get(n).map(|c| c.at(s)).unwrap_or_default()
    }

    /// The row `n ↦ V_{n,s}`.
    pub fn row(&self, s: usize) -> Vec<ClopenSet> {
        self.components.iter().map(|c| c.at(s)).collect()
    }

    pub fn max_len_at(&self, s: usize) -> usize {
        self.row(s).iter().map(ClopenSet::max_len).max().unwrap_or(0)
    }

    pub fn max_len(&self) -> usize {
        self.components
            .iter()
            .flat_map(|c| c.events.iter().map(|(_, v)| v.max_len()))
            .max()
            .unwrap_or(0)
    }

    pub fn last_change(&self) -> Option<usize> {
        self.components.iter().filter_map(Component::last_change).max()
    }

    /// No scripted change after half the horizon.
    pub fn is_settled(&self, horizon: usize) -> bool {
        self.last_change().is_none_or(|t| t <= horizon / 2)
    }
}

pub fn mind_changes(fam: &StagedClopenFamily, n: usize, horizon: usize) -> Result<u64, ApproxError> {
    let c = fam
        .components
        .get(n)
        .ok_or(ApproxError::OutOfRange { n, components: fam.len() })?;
    Ok(c.changes(horizon))
}

pub fn validate_family(fam: &StagedClopenFamily) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Some(&top) = fam.declared_bound.keys().next_back() {
        for m in 0..top {
            if !fam.declared_bound.contains_key(&m) {
                out.push(Violation::DomainGap { missing: m });
            }
        }
    }
    for (n, comp) in fam.components.iter().enumerate() {
        if comp.events.windows(2).any(|w| w[0].0 >= w[1].0) {
            out.push(Violation::UnsortedEvents { n });
            continue;
        }
        let bound = fam.profile.bound(n);
        let declared = fam.declared_bound.get(&n);
        for (s, v) in &comp.events {
            if v.is_empty() {
                continue;
            }
            let m = v.measure();
            if m > bound {
                out.push(Violation::MeasureBound { n, stage: *s, measure: m, bound: bound.clone() });
            }
            if *s < fam.profile.first_stage(n) {
                out.push(Violation::Normalization { n, stage: *s });
            }
            if declared.is_none() {
                out.push(Violation::Undeclared { n, stage: *s });
            }
        }
        if let Some(g) = declared {
            let observed = comp.changes(fam.horizon);
            if BigUint::from(observed) > *g {
                out.push(Violation::ChangeBound { n, observed, declared: g.clone() });
            }
        }
    }
    out
}

/// Components that still contain the whole cylinder of `x` at `horizon`.
pub fn verdict(x: &BitString, fam: &StagedClopenFamily, horizon: usize) -> Result<BTreeSet<usize>, ApproxError> {
    let needed = fam.max_len_at(horizon);
    if x.len() < needed {
        return Err(ApproxError::DepthTooSmall { len: x.len(), needed });
    }
    Ok(fam
        .row(horizon)
        .iter()
        .enumerate()
        .filter(|(_, v)| v.contains_point(x))
        .map(|(n, _)| n)
        .collect())
}

/// Append-only registry of finite prefix sets with stable indices.
#[derive(Clone, Debug, Default)]
pub struct CanonicalIndexRegistry {
    entries: Vec<ClopenSet>,
    index: HashMap<ClopenSet, usize>,
}

impl CanonicalIndexRegistry {
    pub fn new() -> CanonicalIndexRegistry {
        CanonicalIndexRegistry::default()
    }

    pub fn register(&mut self, set: ClopenSet) -> usize {
        if let Some(&i) = self.index.get(&set) {
            return i;
        }
        let i = self.entries.len();
        self.index.insert(set.clone(), i);
        self.entries.push(set);
        i
    }

    pub fn get(&self, i: usize) -> Option<&ClopenSet> {
        self.entries.get(i)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
