//! One line per acceptance criterion. Each outcome is compared with the
//! expected table, so a known failure stays visible without turning the
//! suite red, and an unexpected change in either direction fails it.

mod common;

use common::*;
use demuth_core::transforms::{bound_report, change_bound_breaches, covering_check, support_breaches, to_clopen, to_quick, u_measure_breaches};
use demuth_core::{canonicalize, random_family, BitString, ClopenSet, Dyadic, FamilyLimits};
use demuth_lab::fuzz::trial_seeds;
use demuth_lab::*;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

/// Criterion 2 fails: the claimed λ(U_n) ≤ 2^-n+1 does not hold. See README.
const EXPECTED: [bool; 7] = [true, false, true, true, true, true, true];

/// Runtime budgets in seconds, in debug builds.
const BUDGET: [u64; 7] = [10, 60, 60, 300, 300, 120, 60];

// ---- 1: clopen algebra against a bitset model ----

const D: usize = 10;

fn cells(c: &ClopenSet, depth: usize) -> Vec<bool> {
    let mut v = vec![false; 1 << depth];
    for w in c.prefixes() {
        let lo = w.to_index() << (depth - w.len());
        v[lo..lo + (1 << (depth - w.len()))].iter_mut().for_each(|x| *x = true);
    }
    v
}

fn count_measure(v: &[bool], depth: usize) -> Dyadic {
    Dyadic::new(BigUint::from(v.iter().filter(|&&x| x).count()), depth as u64)
}

/// The minimal antichain of a cell table, read off top-down.
fn antichain(v: &[bool], depth: usize) -> Vec<BitString> {
    fn go(v: &[bool], depth: usize, lo: usize, len: usize, w: BitString, out: &mut Vec<BitString>) {
        let block = &v[lo..lo + (1 << (depth - len))];
        if block.iter().all(|&x| x) {
            out.push(w);
        } else if block.iter().any(|&x| x) {
            go(v, depth, lo, len + 1, w.child(false), out);
            go(v, depth, lo + (1 << (depth - len - 1)), len + 1, w.child(true), out);
        }
    }
    let mut out = Vec::new();
    go(v, depth, 0, 0, BitString::empty(), &mut out);
    out
}

fn agree(a: &ClopenSet, b: &ClopenSet, depth: usize) -> bool {
    let (x, y) = (cells(a, depth), cells(b, depth));
    let zip = |f: fn(bool, bool) -> bool| x.iter().zip(&y).map(|(&p, &q)| f(p, q)).collect::<Vec<_>>();
    let (u, i, d) = (zip(|p, q| p || q), zip(|p, q| p && q), zip(|p, q| p && !q));
    a.measure() == count_measure(&x, depth)
        && a.prefixes() == antichain(&x, depth).as_slice()
        && cells(&a.union(b), depth) == u
        && cells(&a.intersection(b), depth) == i
        && cells(&a.difference(b), depth) == d
        && a.union(b).measure() == count_measure(&u, depth)
        && a.intersection(b).measure() == count_measure(&i, depth)
        && a.difference(b).measure() == count_measure(&d, depth)
        && a.is_subset(b) == x.iter().zip(&y).all(|(&p, &q)| !p || q)
}

fn from_cells(bits: u32, depth: usize) -> ClopenSet {
    canonicalize((0..1usize << depth).filter(|i| bits >> i & 1 == 1).map(|i| BitString::from_index(i, depth)))
}

fn clopen_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let random = |rng: &mut ChaCha8Rng| {
        let k = rng.gen_range(0..8);
        canonicalize((0..k).map(|_| {
            let len = rng.gen_range(0..=D);
            BitString::from_index(rng.gen_range(0..1usize << len), len)
        }))
    };
    let mut bad = 0;
    for _ in 0..1000 {
        let (a, b) = (random(&mut rng), random(&mut rng));
        bad += usize::from(!agree(&a, &b, D));
    }
    let mut exhaustive = 0;
    let mut bad_ex = 0;
    for bits in 0..1u32 << 16 {
        let c = from_cells(bits, 4);
        bad_ex += usize::from(!agree(&c, &c.complement(), 4));
        exhaustive += 1;
    }
    for x in 0..256u32 {
        let a = from_cells(x, 3);
        for y in 0..256u32 {
            bad_ex += usize::from(!agree(&a, &from_cells(y, 3), 3));
            exhaustive += 1;
        }
    }
    (bad == 0 && bad_ex == 0, format!("1000 random depth-10 pairs, {bad} disagree; {exhaustive} exhaustive depth-3/4 cases, {bad_ex} disagree"))
}

// ---- 2 and 3: the cascade and the quick conversion ----

fn cascade() -> (bool, String) {
    let lim = FuzzLimits::default_for(Kind::Transform);
    let (mut claimed, mut claimed_cells, mut corrected, mut over_k, mut uncovered, mut unsettled, mut top) = (0, 0, 0, 0, 0, 0, 0);
    let seeds = trial_seeds(2, 200);
    for &s in &seeds {
        let Scenario::Transform(f) = generate(Kind::Transform, s, lim) else { unreachable!() };
        assert!(f.len() <= 8 && f.horizon <= 300);
        let conv = to_clopen(&f, f.horizon).unwrap();
        let c = u_measure_breaches(&conv, true);
        claimed += usize::from(!c.is_empty());
        claimed_cells += c.len();
        corrected += u_measure_breaches(&conv, false).len();
        over_k += change_bound_breaches(&bound_report(&f, &conv, f.horizon), false).len();
        top += support_breaches(&conv).len();
        match covering_check(&f, &conv.output, f.horizon) {
            Ok(v) => uncovered += v.len(),
            Err(_) => unsettled += 1,
        }
    }
    let pass = claimed == 0 && corrected == 0 && over_k == 0 && uncovered == 0 && unsettled == 0 && top == 0;
    let detail = format!(
        "{} scripts; claimed λ(U_n) ≤ 2^-n+1 broken in {claimed} scripts ({claimed_cells} (n, s) pairs); corrected 2^-n+2 broken {corrected} times; \
         changes over k(n) {over_k}; uncovered V_n {uncovered}; unsettled {unsettled}; top-level mass {top}",
        seeds.len()
    );
    (pass, detail)
}

fn point_in(c: &ClopenSet, x: &BitString) -> bool {
    c.prefixes().iter().any(|w| w.is_prefix_of(x))
}

fn quick() -> (bool, String) {
    let lim = FamilyLimits { components: 8, horizon: 300, extra_depth: 4, changes: 4 };
    let points: Vec<BitString> = (0..1usize << 12).map(|i| BitString::from_index(i, 12)).collect();
    let (mut over, mut missed, mut implications) = (0, 0, 0u64);
    for s in trial_seeds(3, 200) {
        let f = random_family(&mut ChaCha8Rng::seed_from_u64(s), &lim);
        let q = to_quick(&f);
        let mut stages: Vec<usize> = q.components.iter().flat_map(|c| c.events.iter().map(|(t, _)| *t)).collect();
        stages.push(f.horizon);
        for n in 0..q.len() {
            for &t in &stages {
                over += usize::from(q.at(n, t).measure() > Dyadic::pow2_neg(2 * n as u64));
            }
            let (v1, v2, u) = (f.at(2 * n + 1, f.horizon), f.at(2 * n + 2, f.horizon), q.at(n, f.horizon));
            for x in &points {
                if point_in(&v1, x) || point_in(&v2, x) {
                    implications += 1;
                    missed += usize::from(!point_in(&u, x));
                }
            }
        }
    }
    (over == 0 && missed == 0, format!("200 scripts; λ(U_n) > 2^-2n {over} times; {implications} depth-12 points in V_2n+1 ∪ V_2n+2, {missed} outside U_n"))
}

// ---- 4 and 5: engine fuzzing ----

fn sjt_fuzz() -> (bool, String) {
    let lim = FuzzLimits::default_for(Kind::Sjt);
    for s in trial_seeds(7, 50) {
        let Scenario::Sjt(sc) = generate(Kind::Sjt, s, lim) else { unreachable!() };
        let changes = sc.families.iter().map(|f| f.events.len()).max().unwrap_or(0);
        assert!(sc.depth <= 4 && sc.branching <= 3 && sc.a_script.len() <= 30 && sc.horizon <= 2000 && changes <= 3);
    }
    let t = Instant::now();
    let sum = fuzz(Kind::Sjt, 50, 7, lim, &RunOptions::default(), None).unwrap();
    let failing: Vec<_> = sum.trials.iter().filter(|t| !t.breaches.is_empty()).map(|t| (t.index, t.breaches.clone())).collect();
    let settled = sum.trials.iter().filter(|t| !t.unsettled).count();
    let took = t.elapsed();
    let pass = failing.is_empty() && settled > 0;
    (pass, format!("50 scenarios, {settled} settled with X checked end to end; failing {failing:?}; {took:.1?}"))
}

fn base_fuzz() -> (bool, String) {
    let lim = FuzzLimits::default_for(Kind::Base);
    let t = Instant::now();
    let (mut failing, mut settled, mut traced, mut covered, mut witnesses, mut g_fixed) = (Vec::new(), 0, 0, 0, 0, 0);
    let mut verbatim = 0;
    for (i, s) in trial_seeds(7, 50).into_iter().enumerate() {
        let sc = generate(Kind::Base, s, lim);
        let Scenario::Base(b) = &sc else { unreachable!() };
        assert!(b.orders.len() <= 3 && b.functionals.len() <= 2 && b.horizon <= 2000);
        let out = run(&sc, &RunOptions::default()).unwrap();
        if !out.clean() {
            failing.push((i, out.report.breaches()));
        }
        let audit = &out.report.audit;
        if audit.get("unsettled").is_none() {
            settled += 1;
            traced += audit["traced_checked"].as_u64().unwrap();
            covered += audit["covered_checked"].as_u64().unwrap();
        }
        let snap: serde_json::Value = serde_json::from_str(&out.snapshots.last().unwrap().1).unwrap();
        witnesses += snap["a"].as_object().unwrap().values().filter(|e| e["role"] == "witness").count();
        g_fixed += snap["g"].as_object().unwrap().values().filter(|e| e["stage"].is_u64()).count();
        let v = run(&sc, &RunOptions { verbatim_n_rule: true, ..RunOptions::default() }).unwrap();
        verbatim += usize::from(v.report.breaches().contains("restraint_defined"));
    }
    let took = t.elapsed();
    let pass = failing.is_empty() && settled > 0;
    let detail = format!(
        "50 scenarios, {settled} settled; audits examined {traced} trace values and {covered} P-nodes; {witnesses} witnesses; \
         {g_fixed} g(n) values with determination stage; failing {failing:?}; info: the unpadded outcome rule breaks \
         restraint_defined in {verbatim}/50; {took:.1?}"
    );
    (pass, detail)
}

// ---- 6: determinism ----

fn determinism() -> (bool, String) {
    let opts = RunOptions { snapshot_every: Some(100), ..RunOptions::default() };
    let mut bad = Vec::new();
    let mut runs = 0;
    for kind in [Kind::Transform, Kind::Sjt, Kind::Base] {
        let lim = FuzzLimits { horizon: 600, depth: if kind == Kind::Sjt { 3 } else { FuzzLimits::default_for(kind).depth } };
        for s in trial_seeds(11, 10) {
            let sc = generate(kind, s, lim);
            let (a, b) = (run(&sc, &opts).unwrap(), run(&sc, &opts).unwrap());
            let same = a.report_text() == b.report_text() && a.snapshots == b.snapshots && a.artifacts == b.artifacts;
            if !same {
                bad.push((kind.name(), s));
            }
            runs += 1;
        }
    }
    (bad.is_empty(), format!("{runs} scenarios run twice, snapshots every 100 stages; differing {bad:?}"))
}

// ---- 7: injected faults through the binary ----

fn faults() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let sjt = write_script(dir.path(), "sjt.json", &Scenario::Sjt(sjt_active()));
    let base = write_script(dir.path(), "base.json", &Scenario::Base(base_busy(200)));
    let tr = write_script(dir.path(), "transform.json", &Scenario::Transform(two_masses()));
    let (sjt, base, tr) = (sjt.to_str().unwrap(), base.to_str().unwrap(), tr.to_str().unwrap());
    let cases: Vec<(&str, Vec<&str>, &str)> = vec![
        ("bin over-budget", vec!["run-sjt", sjt, "--fault", "bin-over-budget", "--fault-stage", "35"], "bin_bound"),
        ("double enumeration", vec!["run-base", base, "--fault", "double-enumeration", "--fault-stage", "10"], "fresh"),
        ("skipped initialisation", vec!["run-base", base, "--fault", "skipped-initialisation", "--fault-stage", "10"], "initialisation"),
        ("weakened k", vec!["transform", tr, "--weakened-k"], "change_bound"),
        ("inconsistent axiom", vec!["run-sjt", sjt, "--fault", "gamma-inconsistent", "--fault-stage", "35"], "gamma_consistency"),
        ("carve over-measure", vec!["run-sjt", sjt, "--fault", "carve-over-measure", "--fault-stage", "35"], "carve_insufficient"),
        ("b(H) > k", vec!["run-sjt", sjt, "--fault", "b-over-k", "--fault-stage", "35"], "b_bound"),
        ("U-nesting break", vec!["run-sjt", sjt, "--fault", "u-nesting-break", "--fault-stage", "35"], "u_nesting"),
    ];
    // Without faults the same inputs are clean.
    let baseline = [lab(&["run-sjt", sjt]).code, lab(&["run-base", base]).code, lab(&["transform", tr]).code];
    let mut misses = Vec::new();
    for (name, args, check) in &cases {
        let r = lab(args);
        if r.code != 1 || !r.breaches().iter().any(|b| b == check) {
            misses.push(format!("{name}: exit {} breaches {:?}", r.code, r.breaches()));
        }
    }
    let pass = misses.is_empty() && baseline == [0, 0, 0];
    (pass, format!("{}/8 faults exit 1 with the named breach; unfaulted exits {baseline:?}; misses {misses:?}", 8 - misses.len()))
}

fn main() {
    let criteria: [(&str, fn() -> (bool, String)); 7] = [
        ("clopen algebra matches a bitset oracle", clopen_oracle),
        ("cascade measure, change and covering bounds", cascade),
        ("quick conversion", quick),
        ("box-promotion engine fuzz", sjt_fuzz),
        ("priority-tree engine fuzz", base_fuzz),
        ("determinism", determinism),
        ("injected faults are named", faults),
    ];
    let mut results = BTreeMap::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = f();
        let pass = pass && t.elapsed() <= Duration::from_secs(BUDGET[i]);
        let word = if pass { "PASS" } else { "FAIL" };
        let note = if pass == EXPECTED[i] { "" } else { " [UNEXPECTED]" };
        println!("criterion {}: {word}{note} {name}: {detail} ({:.1?})", i + 1, t.elapsed());
        results.insert(i + 1, pass == EXPECTED[i]);
    }
    if results.values().any(|ok| !ok) {
        eprintln!("acceptance outcomes differ from the expected table");
        std::process::exit(1);
    }
}
