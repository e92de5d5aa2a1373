use demuth_base::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario(seed: u64, horizon: u64) -> BaseScenario {
    let lim = BaseLimits { horizon, depth: 5, orders: 3, functionals: 2 };
    random_base(&mut ChaCha8Rng::seed_from_u64(seed), &lim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_runs_are_clean(seed in any::<u64>(), horizon in 40u64..240) {
        let sc = scenario(seed, horizon);
        prop_assert!(sc.validate().is_ok());
        let mut b = Base::new(sc).unwrap();
        b.run();
        prop_assert!(b.breach_names().is_empty(), "{:?}", b.breaches());
        if let Ok(r) = audit_final(&b) {
            prop_assert!(r.ok(), "{r:?}");
        }
    }

    #[test]
    fn u_components_stay_within_their_measure(seed in any::<u64>()) {
        let mut b = Base::new(scenario(seed, 150)).unwrap();
        b.run();
        for (n, c) in &b.state.u {
            prop_assert!(c.set.measure() <= demuth_core::Dyadic::pow2_neg(*n));
        }
    }

    #[test]
    fn generated_scenarios_roundtrip(seed in any::<u64>()) {
        let sc = scenario(seed, 500);
        let back: BaseScenario = serde_json::from_str(&serde_json::to_string(&sc).unwrap()).unwrap();
        prop_assert_eq!(back, sc);
    }
}
