use demuth_core::transforms::{bound_report, change_bound_breaches, covering_check, support_breaches, to_clopen, to_quick, u_measure_breaches};
use demuth_core::{canonicalize, carve, pick_point, refine, validate_family, BitString, ClopenSet, Dyadic, Profile, StagedClopenFamily};
use num_bigint::BigUint;
use proptest::prelude::*;

fn bitstring(max: usize) -> impl Strategy<Value = BitString> {
    prop::collection::vec(any::<bool>(), 0..=max).prop_map(BitString::from_bits)
}

fn clopen(max: usize) -> impl Strategy<Value = ClopenSet> {
    prop::collection::vec(bitstring(max), 0..6).prop_map(canonicalize)
}

proptest! {
    #[test]
    fn canonicalize_is_idempotent(c in clopen(8)) {
        prop_assert_eq!(canonicalize(c.prefixes().to_vec()), c);
    }

    #[test]
    fn measure_is_additive(a in clopen(8), b in clopen(8)) {
        let lhs = &a.union(&b).measure() + &a.intersection(&b).measure();
        let rhs = &a.measure() + &b.measure();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn de_morgan(a in clopen(8), b in clopen(8)) {
        prop_assert_eq!(a.union(&b).complement(), a.complement().intersection(&b.complement()));
    }

    #[test]
    fn subset_iff_empty_difference(a in clopen(6), b in clopen(6)) {
        prop_assert_eq!(a.is_subset(&b), a.difference(&b).is_empty());
    }

    #[test]
    fn carve_contract(src in clopen(7), avoid in clopen(7), frac in 0u64..=128) {
        let avail = src.difference(&avoid).measure();
        let target = Dyadic::new(avail.numerator() * BigUint::from(frac), avail.exponent() + 7);
        let y = carve(&src, &target, &avoid).unwrap();
        prop_assert!(y.is_subset(&src));
        prop_assert!(y.is_disjoint(&avoid));
        prop_assert_eq!(y.measure(), target);
    }

    #[test]
    fn carve_rejects_excess(src in clopen(6)) {
        let over = &src.measure() + &Dyadic::pow2_neg(9);
        prop_assert!(carve(&src, &over, &ClopenSet::empty()).is_err());
    }

    #[test]
    fn refine_counts_measure(c in clopen(6), extra in 0usize..3) {
        let d = c.max_len() + extra;
        let cells = refine(&c, d).unwrap();
        prop_assert_eq!(Dyadic::new(BigUint::from(cells.len()), d as u64), c.measure());
        if let Some(first) = cells.first() {
            prop_assert_eq!(&pick_point(&c, d).unwrap(), first);
        }
    }

    #[test]
    fn literal_roundtrip(c in clopen(8)) {
        prop_assert_eq!(c.to_string().parse::<ClopenSet>().unwrap(), c);
    }
}

/// A settled standard family: component n uses cylinders of length ≥ n+1.
fn family() -> impl Strategy<Value = StagedClopenFamily> {
    let comp = |n: usize| {
        prop::collection::vec((0usize..12, prop::collection::vec(bitstring(9), 0..3)), 0..4).prop_map(move |evs| {
            let mut out = Vec::new();
            let mut t = n + 1;
            for (dt, ws) in evs {
                t += dt;
                let ws = ws.into_iter().map(|w| {
                    let mut bits = vec![false; n + 1];
                    bits.extend_from_slice(w.bits());
                    BitString::from_bits(bits)
                });
                out.push((t, canonicalize(ws)));
                t += 1;
            }
            out
        })
    };
    (1usize..=6)
        .prop_flat_map(move |k| (0..k).map(comp).collect::<Vec<_>>())
        .prop_map(|rows| {
            let horizon = 200;
            let mut f = StagedClopenFamily::new(Profile::Standard, rows.len(), horizon);
            for (n, evs) in rows.into_iter().enumerate() {
                for (t, v) in evs {
                    f.components[n].record(t, v);
                }
                f.declared_bound.insert(n, BigUint::from(f.components[n].changes(horizon)));
            }
            f
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cascade_properties(f in family()) {
        prop_assert!(validate_family(&f).is_empty());
        let conv = to_clopen(&f, f.horizon).unwrap();
        prop_assert!(u_measure_breaches(&conv, false).is_empty());
        let rows = bound_report(&f, &conv, f.horizon);
        prop_assert!(change_bound_breaches(&rows, false).is_empty());
        prop_assert!(covering_check(&f, &conv.output, f.horizon).unwrap().is_empty());
        prop_assert!(validate_family(&conv.shifted()).is_empty());
        prop_assert!(validate_family(&conv.output).is_empty());
        prop_assert!(support_breaches(&conv).is_empty());
    }

    #[test]
    fn quick_properties(f in family()) {
        let q = to_quick(&f);
        prop_assert!(validate_family(&q).is_empty());
        for n in 0..q.len() {
            for s in 0..=f.horizon {
                let expect = f.at(2 * n + 1, s).union(&f.at(2 * n + 2, s));
                prop_assert_eq!(q.at(n, s), expect);
            }
        }
    }
}
