//! Hypercubes of boxes and the tests run on them.

use crate::params::HKey;
use crate::tree::Node;
use demuth_core::BitString;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "stage")]
pub enum TestStatus {
    /// Interval not yet allocated.
    Waiting,
    Pending,
    Succeeded(u64),
    Failed(u64),
    Cancelled(u64),
}

impl TestStatus {
    pub fn unresolved(self) -> bool {
        matches!(self, TestStatus::Waiting | TestStatus::Pending)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRecord {
    pub key: HKey,
    pub alpha: BitString,
    /// The strategy that began the test.
    pub by: Node,
    pub created: u64,
    pub begun: Option<u64>,
    /// b(H) when the test began.
    pub b: u64,
    /// c(H,0..=b) when the test began: the subspace tested.
    pub plane: Vec<u64>,
    pub status: TestStatus,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum HyperError {
    #[error("interval of {0} is not yet defined")]
    IntervalUndefined(HKey),
    #[error("{0} already has a pending test")]
    Busy(HKey),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypercube {
    pub key: HKey,
    /// Box size; the dimension is k+1.
    pub k: u64,
    #[serde(with = "big_str")]
    pub side: BigUint,
    pub b: u64,
    /// Nonzero coordinates of c.
    pub c: BTreeMap<u64, u64>,
    /// Subspaces answered so far, with the string enumerated into their boxes.
    pub answered: Vec<(Vec<u64>, BitString)>,
}

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

impl Hypercube {
    pub fn new(key: HKey, k: u64, side: BigUint) -> Hypercube {
        Hypercube { key, k, side, b: 0, c: BTreeMap::new(), answered: Vec::new() }
    }

    pub fn c(&self, i: u64) -> u64 {
        *self.c.get(&i).unwrap_or(&0)
    }

    pub fn set_c(&mut self, i: u64, v: u64) {
        if v == 0 {
            self.c.remove(&i);
        } else {
            self.c.insert(i, v);
        }
    }

    /// The current subspace {x : x_i = c(i), i ≤ b}.
    pub fn plane(&self) -> Vec<u64> {
        (0..=self.b).map(|i| self.c(i)).collect()
    }

    /// Largest number of distinct strings any box of `plane` would hold after adding `alpha`.
    pub fn load_with(&self, plane: &[u64], alpha: &BitString) -> usize {
        let compatible = |p: &[u64], q: &[u64]| p.iter().zip(q).all(|(a, b)| a == b);
        let mut best = 0;
        let mut reps: Vec<&[u64]> = vec![plane];
        reps.extend(self.answered.iter().map(|(p, _)| p.as_slice()).filter(|p| p.len() > plane.len() && compatible(p, plane)));
        for rep in reps {
            let mut vals: BTreeSet<&BitString> = BTreeSet::new();
            vals.insert(alpha);
            for (p, a) in &self.answered {
                if p.len() <= rep.len() && compatible(p, rep) {
                    vals.insert(a);
                }
            }
            best = best.max(vals.len());
        }
        best
    }
}

/// Records a test on the current subspace of `h`.
pub fn begin_test(h: &Hypercube, alpha: BitString, by: Node, stage: u64, busy: bool) -> Result<TestRecord, HyperError> {
    if busy {
        return Err(HyperError::Busy(h.key.clone()));
    }
    Ok(TestRecord {
        key: h.key.clone(),
        alpha,
        by,
        created: stage,
        begun: Some(stage),
        b: h.b,
        plane: h.plane(),
        status: TestStatus::Pending,
    })
}

/// The b/c update for one hypercube, given the tests run on it.
///
/// `returned_last` holds the tests that succeeded or were cancelled at the
/// previous stage; `left_a` tells whether a string is no longer an initial
/// segment of A.
pub fn settle_cube(h: &mut Hypercube, tests: &[&TestRecord], prev: u64, left_a: impl Fn(&BitString) -> bool) {
    let cur = h.b;
    let promoted = tests
        .iter()
        .filter(|t| matches!(t.status, TestStatus::Succeeded(t1) if t1 <= prev) && t.b == cur && (cur as usize) < t.plane.len() && left_a(&t.alpha))
        .min_by_key(|t| t.begun.unwrap_or(u64::MAX));
    if let Some(t0) = promoted {
        h.set_c(cur, t0.plane[cur as usize]);
        h.b = cur + 1;
        return;
    }
    let returned = tests.iter().any(|t| {
        matches!(t.status, TestStatus::Succeeded(x) | TestStatus::Cancelled(x) if x == prev) && t.begun.is_some() && t.b == cur && t.plane.get(cur as usize) == Some(&h.c(cur))
    });
    if returned {
        let v = h.c(cur) + 1;
        h.set_c(cur, v);
    }
}
