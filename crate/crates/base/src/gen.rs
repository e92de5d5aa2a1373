//! Seeded random scenarios for fuzzing.

use crate::env::{BaseScenario, FunctionalScript, JumpEntry, OrderScript, Rule, RuleKind, Shape};
use demuth_core::BitString;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Clone, Copy, Debug)]
pub struct BaseLimits {
    pub horizon: u64,
    pub depth: usize,
    pub orders: usize,
    pub functionals: usize,
}

impl Default for BaseLimits {
    fn default() -> Self {
        BaseLimits { horizon: 2000, depth: 7, orders: 3, functionals: 2 }
    }
}

fn bits<R: Rng>(rng: &mut R, len: usize) -> BitString {
    BitString::from_bits((0..len).map(|_| rng.gen()).collect())
}

fn order<R: Rng>(rng: &mut R) -> OrderScript {
    let start = rng.gen_range(0..4);
    match rng.gen_range(0..5) {
        0 => {
            let mut v: Vec<u64> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(1..6)).collect();
            v.sort_unstable();
            OrderScript { shape: Shape::Table { values: v }, start, every: rng.gen_range(1..4), cap: None }
        }
        1 => OrderScript { shape: Shape::Exp { scale: rng.gen_range(1..3), offset: 2 }, start, every: 1, cap: Some(rng.gen_range(2..20)) },
        2 => OrderScript { shape: Shape::Exp { scale: 1, offset: rng.gen_range(1..4) }, start, every: rng.gen_range(1..3), cap: None },
        _ => OrderScript { shape: Shape::Exp { scale: rng.gen_range(1..4), offset: rng.gen_range(2..5) }, start, every: 1, cap: None },
    }
}

fn functional<R: Rng>(rng: &mut R, last: u64) -> FunctionalScript {
    let mut roots: Vec<&str> = vec!["00", "01", "10", "11"];
    roots.shuffle(rng);
    let k = rng.gen_range(1..=3);
    let rules = roots[..k]
        .iter()
        .map(|r| {
            let mut oracle: BitString = r.parse().unwrap();
            let tail = rng.gen_range(0..3);
            oracle = oracle.concat(&bits(rng, tail));
            let kind = match rng.gen_range(0..5) {
                0 => RuleKind::Zeros { oracle },
                1 => RuleKind::Copy { oracle },
                2 => {
                    let len = rng.gen_range(1..8);
                    let output = bits(rng, len);
                    RuleKind::Axiom { oracle, output }
                }
                _ => RuleKind::Sparse { oracle: oracle.truncate(2) },
            };
            Rule { stage: rng.gen_range(0..=last), kind }
        })
        .collect();
    FunctionalScript { rules }
}

pub fn random_base<R: Rng>(rng: &mut R, lim: &BaseLimits) -> BaseScenario {
    let horizon = rng.gen_range(lim.horizon / 2..=lim.horizon).max(4);
    let last = horizon / 4;
    let depth = rng.gen_range(3.min(lim.depth)..=lim.depth);
    let orders = (0..rng.gen_range(1..=lim.orders.max(1))).map(|_| order(rng)).collect();
    let functionals = (0..rng.gen_range(0..=lim.functionals)).map(|_| functional(rng, last)).collect();
    let jump = (0..rng.gen_range(1..7)).map(|_| JumpEntry { use_: rng.gen_range(1..30), start: rng.gen_range(0..=last) }).collect();
    BaseScenario { depth, horizon, orders, functionals, jump }
}
