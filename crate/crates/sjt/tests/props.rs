use demuth_sjt::*;
use proptest::prelude::*;
use std::collections::BTreeMap;

fn g_total() -> GTable {
    GTable { default: 3, values: BTreeMap::new(), domain: Domain::total(40000, 1) }
}

#[derive(Debug, Clone)]
struct Raw {
    depth: usize,
    branching: u32,
    horizon: u64,
    designated: u32,
    delay: u64,
    a: Vec<(u64, u64)>,
    // (family, owner pick, offset, target pick, shift, extra stages)
    v: Vec<(usize, usize, u64, usize, u32, u64)>,
}

fn raw() -> impl Strategy<Value = Raw> {
    (2usize..=3, 2u32..=3, 100u64..=180, 0u32..3, 1u64..=3)
        .prop_flat_map(|(depth, branching, horizon, designated, delay)| {
            (
                Just((depth, branching, horizon, designated % branching, delay)),
                prop::collection::vec((1..horizon / 2, 0..(depth as u64 + 3)), 0..5),
                prop::collection::vec((0..depth, 0usize..64, 0u64..2, 0usize..64, 0u32..3, 0u64..20), 0..4),
            )
        })
        .prop_map(|((depth, branching, horizon, designated, delay), a, v)| Raw { depth, branching, horizon, designated, delay, a, v })
}

fn build(r: &Raw) -> SjtScenario {
    let mut sc = SjtScenario {
        depth: r.depth,
        branching: r.branching,
        horizon: r.horizon,
        a_script: r.a.clone(),
        families: vec![FamilyScript { g: g_total(), events: vec![] }; r.depth],
        trace: TracePolicy { designated: r.designated, overrides: BTreeMap::new(), delay: r.delay, others: Responder::Never },
    };
    let probe = Sjt::new(sc.clone()).unwrap();
    let all = Node::all_upto(r.branching, r.depth);
    for &(e, owner, offset, target, shift, extra) in &r.v {
        let owners: Vec<&Node> = all.iter().filter(|x| x.len() == e + 1 && x.in_f()).collect();
        let node = owners[owner % owners.len()].clone();
        let stage = probe.params.n_of(&node) + offset + 1 + extra;
        if stage > r.horizon / 2 {
            continue;
        }
        let hit = all[target % all.len()].clone();
        sc.families[e].events.push(VEvent { stage, n: Index::Rel { node, offset }, target: Target::Hit { node: hit, shift } });
    }
    sc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_runs_are_clean(r in raw()) {
        let mut e = Sjt::new(build(&r)).unwrap();
        e.run();
        prop_assert!(e.breach_names().is_empty(), "{:?}", e.breaches());
        let out = end_to_end(&e).unwrap();
        prop_assert!(out.ok(), "{:?}", out);
        for x in &out.path {
            prop_assert!(e.u_of(x).contains_point(&out.x));
        }
    }

    #[test]
    fn error_set_stays_small(r in raw()) {
        let mut e = Sjt::new(build(&r)).unwrap();
        for _ in 0..r.horizon {
            e.step();
            prop_assert!(e.state.error_set.measure() <= demuth_core::Dyadic::pow2_neg(2));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_runs_are_clean(seed in any::<u64>()) {
        use rand::SeedableRng;
        let lim = SjtLimits { horizon: 200, depth: 3, branching: 3, a_changes: 10, events: 4, per_family: 2 };
        let sc = random_sjt(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed), &lim);
        let mut e = Sjt::new(sc).unwrap();
        e.run();
        prop_assert!(e.breach_names().is_empty(), "{:?}", e.breaches());
        let out = end_to_end(&e).unwrap();
        prop_assert!(out.ok(), "{:?}", out);
    }
}
