//! Bins: measure taken out of a child's U because a test covered it, kept
//! for reuse, with certainty claims.

use crate::tree::Node;
use demuth_core::{carve, ClopenSet, Dyadic};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// B^σ(n, ρ) is keyed by (σ, ρ, n).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinKey {
    pub holder: Node,
    pub rho: Node,
    pub n: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    pub contents: ClopenSet,
    /// certainty k ↦ claimed part.
    pub claims: BTreeMap<u64, ClopenSet>,
}

impl Bin {
    pub fn remove(&mut self, gone: &ClopenSet) {
        self.contents = self.contents.difference(gone);
        for c in self.claims.values_mut() {
            *c = c.difference(gone);
        }
        self.claims.retain(|_, c| !c.is_empty());
    }

    pub fn claimed(&self) -> ClopenSet {
        self.claims.values().fold(ClopenSet::empty(), |a, c| a.union(c))
    }
}

/// What a holder wants done to one bin if its tests succeed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinPlan {
    pub key: BinKey,
    pub x: ClopenSet,
    pub y: ClopenSet,
    /// k_0 ≤ k_1 ≤ ... ≤ k_m.
    pub ladder: Vec<u64>,
    /// Z(k_i) for i < m.
    pub keep: BTreeMap<u64, ClopenSet>,
}

impl BinPlan {
    pub fn certainty(&self) -> u64 {
        *self.ladder.last().unwrap()
    }
}

/// Plans the insertion of X, replacing what it can with bin measure outside V_n.
pub fn plan_insert(key: BinKey, bin: &Bin, v_n: &ClopenSet, x: &ClopenSet) -> BinPlan {
    let gap = bin.contents.difference(v_n);
    let want = std::cmp::min(gap.measure(), x.measure());
    let y = carve(&gap, &want, &ClopenSet::empty()).expect("gap covers its own measure");
    let kept = bin.contents.difference(&y);
    let mut rem = kept.union(x);
    let mut ladder = Vec::new();
    let mut keep = BTreeMap::new();
    loop {
        let k = least_k(&rem.measure());
        if ladder.last() == Some(&k) {
            break;
        }
        ladder.push(k);
        let z = bin.claims.get(&k).map(|c| c.intersection(&kept)).unwrap_or_default();
        if !z.is_empty() {
            rem = rem.difference(&z);
            keep.insert(k, z);
        }
    }
    // The last rung re-claims its own Z.
    let last = *ladder.last().unwrap();
    keep.remove(&last);
    BinPlan { key, x: x.clone(), y, ladder, keep }
}

fn least_k(m: &Dyadic) -> u64 {
    m.least_k_below().expect("ladder mass is positive")
}

/// Applies a plan to the bin as it stands now: B := (X ∪ B) − Y, with the
/// kept claims and everything else claimed at the final certainty.
pub fn apply_plan(bin: &mut Bin, plan: &BinPlan) {
    let contents = bin.contents.union(&plan.x).difference(&plan.y);
    let mut claims = BTreeMap::new();
    let mut rest = contents.clone();
    for (k, z) in &plan.keep {
        let z = z.intersection(&contents);
        rest = rest.difference(&z);
        if !z.is_empty() {
            claims.insert(*k, z);
        }
    }
    if !rest.is_empty() {
        claims.insert(plan.certainty(), rest);
    }
    bin.contents = contents;
    bin.claims = claims;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> ClopenSet {
        s.parse().unwrap()
    }

    fn key() -> BinKey {
        BinKey { holder: "<0,0>".parse().unwrap(), rho: "<0>".parse().unwrap(), n: 20 }
    }

    #[test]
    fn empty_bin_single_rung() {
        let p = plan_insert(key(), &Bin::default(), &c("{000000}"), &c("{000000}"));
        assert_eq!(p.ladder, vec![6]);
        assert!(p.y.is_empty());
        let mut b = Bin::default();
        apply_plan(&mut b, &p);
        assert_eq!(b.claims.keys().copied().collect::<Vec<_>>(), vec![6]);
    }

    #[test]
    fn growth_moves_to_lower_certainty() {
        let mut b = Bin { contents: c("{000001}"), claims: BTreeMap::new() };
        b.claims.insert(6, c("{000001}"));
        // V_n covers the old mass, so nothing is reusable.
        let v = c("{00000}");
        let p = plan_insert(key(), &b, &v, &c("{000000}"));
        assert_eq!(p.ladder, vec![5]);
        assert!(p.keep.is_empty());
        apply_plan(&mut b, &p);
        assert_eq!(b.claims.get(&5), Some(&c("{00000}")));
        assert_eq!(b.claims.len(), 1);
    }

    #[test]
    fn full_replacement_keeps_total() {
        let mut b = Bin { contents: c("{000001}"), claims: BTreeMap::new() };
        b.claims.insert(6, c("{000001}"));
        let p = plan_insert(key(), &b, &c("{000000}"), &c("{000000}"));
        assert_eq!(p.y, c("{000001}"));
        assert_eq!(p.ladder, vec![6]);
        apply_plan(&mut b, &p);
        assert_eq!(b.contents, c("{000000}"));
        assert_eq!(b.claims.get(&6), Some(&c("{000000}")));
    }

    #[test]
    fn ladder_peels_claims() {
        // 2^-3 claimed at 3, 2^-5 at 5; add 2^-6 that V does not cover.
        let mut b = Bin { contents: c("{000,00100}"), claims: BTreeMap::new() };
        b.claims.insert(3, c("{000}"));
        b.claims.insert(5, c("{00100}"));
        let v = c("{001010,000,00100}");
        let p = plan_insert(key(), &b, &v, &c("{001010}"));
        // total 2^-3+2^-5+2^-6: k0=3, peel Z(3); rest 2^-5+2^-6: k1=5, peel Z(5); rest 2^-6: k2=6, k3=6.
        assert_eq!(p.ladder, vec![3, 5, 6]);
        apply_plan(&mut b, &p);
        assert_eq!(b.claims.get(&3), Some(&c("{000}")));
        assert_eq!(b.claims.get(&5), Some(&c("{00100}")));
        assert_eq!(b.claims.get(&6), Some(&c("{001010}")));
    }

    #[test]
    fn remove_keeps_partition() {
        let mut b = Bin { contents: c("{00,01}"), claims: BTreeMap::new() };
        b.claims.insert(2, c("{00}"));
        b.claims.insert(3, c("{01}"));
        b.remove(&c("{01}"));
        assert_eq!(b.claimed(), b.contents);
        assert_eq!(b.claims.len(), 1);
    }
}
