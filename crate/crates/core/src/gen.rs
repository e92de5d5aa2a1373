//! Seeded random Demuth-test scripts for fuzzing.

use crate::approx::{Profile, StagedClopenFamily};
use crate::cantor::{canonicalize, BitString};
use crate::dyadic::Dyadic;
use num_bigint::BigUint;
use rand::Rng;

#[derive(Clone, Copy, Debug)]
pub struct FamilyLimits {
    pub components: usize,
    pub horizon: usize,
    /// Longest prefix beyond the component's own index.
    pub extra_depth: usize,
    pub changes: usize,
}

impl Default for FamilyLimits {
    fn default() -> Self {
        FamilyLimits { components: 8, horizon: 300, extra_depth: 6, changes: 4 }
    }
}

/// A normalized test, settled by horizon/4, with exact declared bounds.
pub fn random_family<R: Rng>(rng: &mut R, lim: &FamilyLimits) -> StagedClopenFamily {
    let horizon = rng.gen_range(lim.horizon / 2..=lim.horizon).max(8);
    let comps = rng.gen_range(1..=lim.components.max(1));
    let last = horizon / 4;
    let mut f = StagedClopenFamily::new(Profile::Standard, comps, horizon);
    for n in 0..comps {
        let mut t = n + 1 + rng.gen_range(0..4);
        for _ in 0..rng.gen_range(0..=lim.changes) {
            if t > last {
                break;
            }
            let k = rng.gen_range(0..4);
            let ws: Vec<BitString> = (0..k)
                .map(|_| {
                    let len = n + rng.gen_range(0..=lim.extra_depth);
                    BitString::from_index(rng.gen_range(0..1usize << len.min(60)), len)
                })
                .collect();
            let set = canonicalize(ws);
            if set.measure() <= Dyadic::pow2_neg(n as u64) {
                f.components[n].record(t, set);
            }
            t += 1 + rng.gen_range(0..8);
        }
        f.declared_bound.insert(n, BigUint::from(f.components[n].changes(horizon)));
    }
    f
}
