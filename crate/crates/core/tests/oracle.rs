//! Agreement with a brute-force bitset model of clopen sets.

use demuth_core::transforms::{cascade_levels, cascade_step, to_clopen, CascadeState};
use demuth_core::{canonicalize, carve, refine, BitString, ClopenSet, Dyadic, Profile, StagedClopenFamily};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Membership table over all strings of length `depth`.
#[derive(Clone, PartialEq, Eq, Debug)]
struct Bits {
    depth: usize,
    cells: Vec<bool>,
}

impl Bits {
    fn of(c: &ClopenSet, depth: usize) -> Bits {
        let mut cells = vec![false; 1 << depth];
        for w in c.prefixes() {
            let lo = w.to_index() << (depth - w.len());
            let hi = lo + (1 << (depth - w.len()));
            cells[lo..hi].iter_mut().for_each(|x| *x = true);
        }
        Bits { depth, cells }
    }

    fn zip(&self, o: &Bits, f: impl Fn(bool, bool) -> bool) -> Bits {
        Bits { depth: self.depth, cells: self.cells.iter().zip(&o.cells).map(|(&a, &b)| f(a, b)).collect() }
    }

    fn count(&self) -> usize {
        self.cells.iter().filter(|&&x| x).count()
    }

    fn measure(&self) -> Dyadic {
        Dyadic::new(BigUint::from(self.count()), self.depth as u64)
    }

    /// Reads the minimal antichain back off the table.
    fn antichain(&self) -> Vec<BitString> {
        fn go(b: &Bits, lo: usize, len: usize, w: BitString, out: &mut Vec<BitString>) {
            let block = &b.cells[lo..lo + (1 << (b.depth - len))];
            if block.iter().all(|&x| x) {
                out.push(w);
            } else if block.iter().any(|&x| x) {
                let half = 1 << (b.depth - len - 1);
                go(b, lo, len + 1, w.child(false), out);
                go(b, lo + half, len + 1, w.child(true), out);
            }
        }
        let mut out = Vec::new();
        go(self, 0, 0, BitString::empty(), &mut out);
        out
    }
}

fn random_set(rng: &mut ChaCha8Rng, depth: usize) -> ClopenSet {
    let k = rng.gen_range(0..8);
    let ws = (0..k).map(|_| {
        let len = rng.gen_range(0..=depth);
        BitString::from_index(rng.gen_range(0..(1usize << len)), len)
    });
    canonicalize(ws)
}

fn check_pair(a: &ClopenSet, b: &ClopenSet, depth: usize) {
    let (ba, bb) = (Bits::of(a, depth), Bits::of(b, depth));
    assert_eq!(a.measure(), ba.measure(), "measure {a}");
    assert_eq!(a.prefixes(), ba.antichain().as_slice(), "canonical {a}");
    let u = a.union(b);
    let i = a.intersection(b);
    let d = a.difference(b);
    assert_eq!(Bits::of(&u, depth), ba.zip(&bb, |x, y| x || y), "{a} ∪ {b}");
    assert_eq!(Bits::of(&i, depth), ba.zip(&bb, |x, y| x && y), "{a} ∩ {b}");
    assert_eq!(Bits::of(&d, depth), ba.zip(&bb, |x, y| x && !y), "{a} - {b}");
    assert_eq!(u.measure(), ba.zip(&bb, |x, y| x || y).measure());
    assert_eq!(a.is_subset(b), ba.cells.iter().zip(&bb.cells).all(|(&x, &y)| !x || y));
    assert_eq!(refine(a, depth).unwrap().len(), ba.count());
}

#[test]
fn random_pairs_agree_at_depth_ten() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let a = random_set(&mut rng, 10);
        let b = random_set(&mut rng, 10);
        check_pair(&a, &b, 10);
    }
}

#[test]
fn every_depth_three_pair_agrees() {
    // Every subset of the 8 depth-3 cells, paired with every other.
    let depth = 3;
    let sets: Vec<ClopenSet> = (0..256usize)
        .map(|mask| canonicalize((0..8).filter(|i| mask >> i & 1 == 1).map(|i| BitString::from_index(i, depth))))
        .collect();
    for a in &sets {
        for b in &sets {
            check_pair(a, b, depth);
        }
    }
}

#[test]
fn every_depth_four_set_is_canonical() {
    // Distinct tables must give distinct canonical sets and round-trip exactly.
    let depth = 4;
    for mask in 0..(1usize << 16) {
        let cells: Vec<bool> = (0..16).map(|i| mask >> i & 1 == 1).collect();
        let table = Bits { depth, cells };
        let c = canonicalize((0..16).filter(|i| mask >> i & 1 == 1).map(|i| BitString::from_index(i, depth)));
        assert_eq!(Bits::of(&c, depth), table);
        assert_eq!(c.prefixes(), table.antichain().as_slice());
    }
}

#[test]
fn every_two_prefix_pair_agrees_at_depth_four() {
    let strings: Vec<BitString> = (0..=4).flat_map(|l| (0..1usize << l).map(move |i| BitString::from_index(i, l))).collect();
    let mut sets = vec![ClopenSet::empty()];
    for (i, a) in strings.iter().enumerate() {
        sets.push(canonicalize([a.clone()]));
        for b in &strings[i + 1..] {
            sets.push(canonicalize([a.clone(), b.clone()]));
        }
    }
    for a in &sets {
        for b in &sets {
            check_pair(a, b, 4);
        }
    }
}

#[test]
fn carve_is_leftmost_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let depth = 8;
    for _ in 0..500 {
        let src = random_set(&mut rng, depth);
        let avoid = random_set(&mut rng, depth);
        let pool = Bits::of(&src.difference(&avoid), depth);
        let take = rng.gen_range(0..=pool.count());
        let target = Dyadic::new(BigUint::from(take), depth as u64);
        let y = carve(&src, &target, &avoid).unwrap();
        let mut want = vec![false; 1 << depth];
        pool.cells.iter().enumerate().filter(|(_, &x)| x).take(take).for_each(|(i, _)| want[i] = true);
        assert_eq!(Bits::of(&y, depth).cells, want);
    }
}

/// Cascade re-implemented over 4096-cell tables.
struct RefCascade {
    levels: usize,
    s: Vec<Vec<bool>>,
    u: Vec<Vec<bool>>,
}

const D: usize = 12;

fn exceeds_eps(cells: &[bool], n: usize) -> bool {
    let cnt = cells.iter().filter(|&&x| x).count() as u128;
    (cnt << n) > (1u128 << D)
}

impl RefCascade {
    fn step(&mut self, v: &[Vec<bool>]) {
        let empty = vec![false; 1 << D];
        let mut s = vec![empty.clone(); self.levels];
        let mut u = vec![empty.clone(); self.levels];
        for n in 0..self.levels {
            let fresh: Vec<bool> = s[n].iter().zip(&self.u[n]).map(|(&a, &b)| a && !b).collect();
            if exceeds_eps(&fresh, n) {
                u[n] = s[n].clone();
                break;
            }
            u[n] = self.u[n].clone();
            if n + 1 < self.levels {
                let vn = v.get(n).unwrap_or(&empty);
                s[n + 1] = (0..1 << D).map(|i| vn[i] || (s[n][i] && !u[n][i])).collect();
            }
        }
        self.s = s;
        self.u = u;
    }
}

fn random_family(rng: &mut ChaCha8Rng, horizon: usize) -> StagedClopenFamily {
    let comps = rng.gen_range(1..=6);
    let mut f = StagedClopenFamily::new(Profile::Standard, comps, horizon);
    for n in 0..comps {
        f.declared_bound.insert(n, BigUint::from(4u8));
        let mut t = n + 1;
        for _ in 0..rng.gen_range(0..=4) {
            t += rng.gen_range(0..6);
            if t > horizon / 2 {
                break;
            }
            // Cylinders at depth ≥ n+1 keep the measure below 2^-n.
            let len = rng.gen_range(n + 1..=D);
            let k = rng.gen_range(0..3);
            let ws: Vec<BitString> = (0..k).map(|_| BitString::from_index(rng.gen_range(0..1usize << len), len)).collect();
            let set = canonicalize(ws);
            if set.measure() <= Dyadic::pow2_neg(n as u64) {
                f.components[n].record(t, set);
            }
            t += 1;
        }
    }
    f
}

#[test]
fn cascade_matches_table_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..60 {
        let horizon = 60;
        let fam = random_family(&mut rng, horizon);
        let levels = cascade_levels(fam.len(), fam.max_len());
        let mut st = CascadeState::new(levels);
        let mut oracle = RefCascade {
            levels,
            s: vec![vec![false; 1 << D]; levels],
            u: vec![vec![false; 1 << D]; levels],
        };
        for s in 0..=horizon {
            let row = fam.row(s);
            st = cascade_step(&st, &row, s).unwrap();
            let vrow: Vec<Vec<bool>> = row.iter().map(|c| Bits::of(c, D).cells).collect();
            oracle.step(&vrow);
            for n in 0..levels {
                assert_eq!(Bits::of(&st.s[n], D).cells, oracle.s[n], "S({n}) at stage {s}");
                assert_eq!(Bits::of(&st.u[n], D).cells, oracle.u[n], "U({n}) at stage {s}");
            }
        }
        let conv = to_clopen(&fam, horizon).unwrap();
        assert_eq!(conv.trace.last().unwrap(), &st);
    }
}
