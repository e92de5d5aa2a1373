//! Conversions between kinds of Demuth tests: any test to a clopen test
//! through the S/U cascade, and clopen tests to quick tests.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::approx::{big_dec, validate_family, Component, Profile, StagedClopenFamily, Violation};
use crate::cantor::ClopenSet;
use crate::dyadic::Dyadic;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error("invalid row at stage {stage}: component {n} {why}")]
    InvalidRow { stage: usize, n: usize, why: String },
    #[error("invalid input family: {0:?}")]
    InvalidFamily(Vec<Violation>),
    #[error("family not settled by stage {horizon}")]
    NotSettled { horizon: usize },
}

pub fn epsilon(n: usize) -> Dyadic {
    Dyadic::pow2_neg(n as u64)
}

/// The auxiliary sets S(n) and the output sets U(n) at one stage.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeState {
    pub stage: usize,
    pub s: Vec<ClopenSet>,
    pub u: Vec<ClopenSet>,
}

impl CascadeState {
    pub fn new(levels: usize) -> CascadeState {
        CascadeState { stage: 0, s: vec![ClopenSet::empty(); levels], u: vec![ClopenSet::empty(); levels] }
    }

    pub fn levels(&self) -> usize {
        self.u.len()
    }
}

/// Number of cascade levels needed so that no mass can fall off the end.
pub fn cascade_levels(components: usize, max_prefix_len: usize) -> usize {
    components.max(max_prefix_len + 2) + 2
}

/// One stage of the cascade, applied to the row `v` of the input test.
pub fn cascade_step(prev: &CascadeState, v: &[ClopenSet], stage: usize) -> Result<CascadeState, TransformError> {
    let levels = prev.levels();
    for (n, vn) in v.iter().enumerate() {
        if vn.is_empty() {
            continue;
        }
        if n >= stage {
            return Err(TransformError::InvalidRow { stage, n, why: "is nonempty at or after its own index".into() });
        }
        if vn.measure() > epsilon(n) {
            return Err(TransformError::InvalidRow { stage, n, why: "exceeds 2^-n".into() });
        }
        if n + 1 >= levels {
            return Err(TransformError::InvalidRow { stage, n, why: "lies beyond the cascade levels".into() });
        }
    }
    let mut next = CascadeState::new(levels);
    next.stage = stage;
    for n in 0..levels {
        let fresh = next.s[n].difference(&prev.u[n]);
        if fresh.measure() > epsilon(n) {
            next.u[n] = next.s[n].clone();
            // Levels above n stay empty for this stage.
            break;
        }
        next.u[n] = prev.u[n].clone();
        if n + 1 < levels {
            let vn = v.get(n).cloned().unwrap_or_default();
            next.s[n + 1] = vn.union(&next.s[n].difference(&next.u[n]));
        } else {
            debug_assert!(next.s[n].difference(&next.u[n]).is_empty());
        }
    }
    Ok(next)
}

/// Output of the clopen conversion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClopenConversion {
    /// ⟨U_n⟩. The cascade guarantees λ(U_n) ≤ 2^-n+2.
    pub output: StagedClopenFamily,
    pub trace: Vec<CascadeState>,
}

impl ClopenConversion {
    /// The shifted test ⟨U_{n+1}⟩, with λ ≤ 2^-n+1. It is not normalized by stage.
    pub fn shifted(&self) -> StagedClopenFamily {
        let src = &self.output;
        let mut f = StagedClopenFamily::new(Profile::Doubled, src.len().saturating_sub(1), src.horizon);
        for n in 0..f.len() {
            f.components[n] = src.components[n + 1].clone();
            if let Some(g) = src.declared_bound.get(&(n + 1)) {
                f.declared_bound.insert(n, g.clone());
            }
        }
        f
    }
}

pub fn to_clopen(fam: &StagedClopenFamily, horizon: usize) -> Result<ClopenConversion, TransformError> {
    let violations = validate_family(fam);
    if !violations.is_empty() {
        return Err(TransformError::InvalidFamily(violations));
    }
    let levels = cascade_levels(fam.len(), fam.max_len());
    let mut state = CascadeState::new(levels);
    let mut trace = Vec::with_capacity(horizon + 1);
    let mut out = StagedClopenFamily::new(Profile::Cascade, levels, horizon);
    for s in 0..=horizon {
        state = cascade_step(&state, &fam.row(s), s)?;
        for (n, u) in state.u.iter().enumerate() {
            out.components[n].record(s, u.clone());
        }
        trace.push(state.clone());
    }
    let g = bound_table(fam);
    for n in 0..levels {
        out.declared_bound.insert(n, mind_change_bound(&g, n));
    }
    Ok(ClopenConversion { output: out, trace })
}

/// The input's declared bounds as a dense table; missing entries count as 0
/// since such components never change.
fn bound_table(fam: &StagedClopenFamily) -> Vec<BigUint> {
    (0..fam.len()).map(|n| fam.declared_bound.get(&n).cloned().unwrap_or_default()).collect()
}

fn ceil_n2_over_eps(n: usize) -> BigUint {
    BigUint::from((n * n) as u64) << n
}

/// Change bound for U_n depending only on g:
/// k(0) = 0, k(n) = (1 + Σ_{m<n} k(m)) · (1 + Σ_{m<n} g(m)) · ⌈n² / ε(n)⌉.
pub fn mind_change_bound(g: &[BigUint], n: usize) -> BigUint {
    bound_series(g, n, true)
}

/// The same recursion without the `1 +` terms. It is 0 at n = 1.
pub fn mind_change_bound_verbatim(g: &[BigUint], n: usize) -> BigUint {
    bound_series(g, n, false)
}

fn bound_series(g: &[BigUint], n: usize, safe: bool) -> BigUint {
    let base = if safe { BigUint::one() } else { BigUint::zero() };
    let mut ks: Vec<BigUint> = vec![BigUint::zero()];
    let mut sum_k = BigUint::zero();
    let mut sum_g = BigUint::zero();
    for m in 1..=n {
        sum_k += &ks[m - 1];
        sum_g += g.get(m - 1).cloned().unwrap_or_default();
        let k = (&base + &sum_k) * (&base + &sum_g) * ceil_n2_over_eps(m);
        ks.push(k);
    }
    ks.swap_remove(n)
}

/// Bound table for both variants, for reporting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: usize,
    pub observed: u64,
    #[serde(with = "big_dec")]
    pub safe: BigUint,
    #[serde(with = "big_dec")]
    pub verbatim: BigUint,
}

pub fn bound_report(input: &StagedClopenFamily, conv: &ClopenConversion, horizon: usize) -> Vec<BoundRow> {
    let g = bound_table(input);
    conv.output
        .components
        .iter()
        .enumerate()
        .map(|(n, c)| BoundRow {
            n,
            observed: c.changes(horizon),
            safe: mind_change_bound(&g, n),
            verbatim: mind_change_bound_verbatim(&g, n),
        })
        .collect()
}

/// Sufficient condition used by the quick conversion:
/// 2^-(2n+1) + 2^-(2n+2) < 2^-2n.
pub fn quick_budget_holds(n: usize) -> bool {
    let lhs = &epsilon(2 * n + 1) + &epsilon(2 * n + 2);
    lhs < epsilon(2 * n)
}

/// U_n = V_{2n+1} ∪ V_{2n+2}, stage by stage.
pub fn to_quick(fam: &StagedClopenFamily) -> StagedClopenFamily {
    let n_out = fam.len() / 2;
    let mut out = StagedClopenFamily::new(Profile::Quick, n_out, fam.horizon);
    for n in 0..n_out {
        assert!(quick_budget_holds(n));
        let (a, b) = (2 * n + 1, 2 * n + 2);
        let mut stages: Vec<usize> = fam
            .components
            .iter()
            .skip(a)
            .take(2)
            .flat_map(|c| c.events.iter().map(|(t, _)| *t))
            .collect();
        stages.sort_unstable();
        stages.dedup();
        let mut comp = Component::default();
        for t in stages {
            comp.record(t, fam.at(a, t).union(&fam.at(b, t)));
        }
        out.components[n] = comp;
        let ga = fam.declared_bound.get(&a);
        let gb = fam.declared_bound.get(&b);
        if ga.is_some() || gb.is_some() {
            let g = ga.cloned().unwrap_or_default() + gb.cloned().unwrap_or_default();
            out.declared_bound.insert(n, g);
        }
    }
    // Keep the domain an initial segment; filled slots are never used.
    if let Some(&top) = out.declared_bound.keys().next_back() {
        for m in 0..top {
            out.declared_bound.entry(m).or_default();
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverFailure {
    pub n: usize,
    pub uncovered: ClopenSet,
}

/// Checks V_n ⊆ ∪_{m ∈ (n, N]} U_m at the horizon for every n.
pub fn covering_check(
    v: &StagedClopenFamily,
    u: &StagedClopenFamily,
    horizon: usize,
) -> Result<Vec<CoverFailure>, TransformError> {
    if !v.is_settled(horizon) || !u.is_settled(horizon) {
        return Err(TransformError::NotSettled { horizon });
    }
    let urow = u.row(horizon);
    let mut above = vec![ClopenSet::empty(); urow.len() + 1];
    for m in (0..urow.len()).rev() {
        above[m] = above[m + 1].union(&urow[m]);
    }
    let mut out = Vec::new();
    for (n, vn) in v.row(horizon).into_iter().enumerate() {
        let cover = above.get(n + 1).cloned().unwrap_or_default();
        let uncovered = vn.difference(&cover);
        if !uncovered.is_empty() {
            out.push(CoverFailure { n, uncovered });
        }
    }
    Ok(out)
}

/// Stages at which mass reached the top cascade level.
pub fn support_breaches(conv: &ClopenConversion) -> Vec<usize> {
    conv.trace
        .iter()
        .filter(|st| st.s.last().is_some_and(|x| !x.is_empty()) || st.u.last().is_some_and(|x| !x.is_empty()))
        .map(|st| st.stage)
        .collect()
}

/// Offending (n, s) for λ(U_{n,s}) ≤ 2^-n+1 (`claimed`) or ≤ 2^-n+2.
///
/// The first bound does not follow from λ(S_{n+1,s}) ≤ 2^-n+1: U_n is
/// assigned S_n, whose bound is 2^-n+2, and it is attained.
pub fn u_measure_breaches(conv: &ClopenConversion, claimed: bool) -> Vec<(usize, usize)> {
    let profile = if claimed { Profile::Doubled } else { Profile::Cascade };
    let mut out = Vec::new();
    for st in &conv.trace {
        for (n, u) in st.u.iter().enumerate() {
            if u.measure() > profile.bound(n) {
                out.push((n, st.stage));
            }
        }
    }
    out
}

/// Components whose observed change count exceeds the given bound table.
pub fn change_bound_breaches(rows: &[BoundRow], verbatim: bool) -> Vec<usize> {
    rows.iter()
        .filter(|r| BigUint::from(r.observed) > if verbatim { r.verbatim.clone() } else { r.safe.clone() })
        .map(|r| r.n)
        .collect()
}

/// Sparse summary `n ↦ final U_n` for nonempty components.
pub fn final_components(fam: &StagedClopenFamily, horizon: usize) -> BTreeMap<usize, ClopenSet> {
    fam.row(horizon).into_iter().enumerate().filter(|(_, c)| !c.is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> ClopenSet {
        s.parse().unwrap()
    }

    fn big(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    fn single_mass(horizon: usize) -> StagedClopenFamily {
        let mut f = StagedClopenFamily::new(Profile::Standard, 5, horizon);
        f.components[3].events = vec![(4, c("{000000}"))];
        f.declared_bound = (0..5).map(|n| (n, BigUint::from(1u8))).collect();
        f
    }

    #[test]
    fn empty_row_keeps_state() {
        let st = CascadeState::new(6);
        let next = cascade_step(&st, &[], 3).unwrap();
        assert_eq!(next.u, st.u);
        assert_eq!(next.s, st.s);
    }

    #[test]
    fn full_space_triggers_level_one() {
        let st = CascadeState::new(6);
        let next = cascade_step(&st, &[c("{e}")], 1).unwrap();
        assert_eq!(next.s[1], ClopenSet::full());
        assert_eq!(next.u[1], ClopenSet::full());
        assert!(next.u[2..].iter().all(ClopenSet::is_empty));
        assert!(next.s[2..].iter().all(ClopenSet::is_empty));
    }

    #[test]
    fn row_validation() {
        let st = CascadeState::new(6);
        assert!(cascade_step(&st, &[ClopenSet::empty(), c("{0}")], 1).is_err());
        assert!(cascade_step(&st, &[ClopenSet::empty(), c("{e}")], 5).is_err());
    }

    #[test]
    fn single_mass_cascades_to_level_seven() {
        let f = single_mass(40);
        let conv = to_clopen(&f, 40).unwrap();
        let fin = final_components(&conv.output, 40);
        assert_eq!(fin.len(), 1);
        assert_eq!(fin.get(&7), Some(&c("{000000}")));
        assert!(covering_check(&f, &conv.output, 40).unwrap().is_empty());
        assert!(u_measure_breaches(&conv, true).is_empty());
        let rows = bound_report(&f, &conv, 40);
        assert!(change_bound_breaches(&rows, false).is_empty());
    }

    #[test]
    fn claimed_u_bound_is_exceeded() {
        // V_0 = {1} from stage 1 and V_1 = {0} from stage 2 force U_2 = 2^ω.
        let mut f = StagedClopenFamily::new(Profile::Standard, 2, 10);
        f.components[0].events = vec![(1, c("{1}"))];
        f.components[1].events = vec![(2, c("{0}"))];
        f.declared_bound = (0..2).map(|n| (n, BigUint::from(1u8))).collect();
        let conv = to_clopen(&f, 10).unwrap();
        assert_eq!(conv.trace[2].u[2], ClopenSet::full());
        assert_eq!(u_measure_breaches(&conv, true).first(), Some(&(2, 2)));
        assert!(u_measure_breaches(&conv, false).is_empty());
        assert!(covering_check(&f, &conv.output, 10).unwrap().is_empty());
    }

    #[test]
    fn deleting_the_cover_fails_at_three() {
        let f = single_mass(40);
        let mut conv = to_clopen(&f, 40).unwrap();
        conv.output.components[7] = Component::default();
        let r = covering_check(&f, &conv.output, 40).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].n, 3);
    }

    #[test]
    fn empty_family_converts_to_empty() {
        let f = StagedClopenFamily::new(Profile::Standard, 4, 20);
        let conv = to_clopen(&f, 20).unwrap();
        assert!(final_components(&conv.output, 20).is_empty());
        assert!(covering_check(&StagedClopenFamily::new(Profile::Standard, 4, 20), &conv.output, 20).unwrap().is_empty());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(mind_change_bound(&big(&[]), 0), BigUint::zero());
        assert_eq!(mind_change_bound(&big(&[2]), 1), BigUint::from(6u32));
        assert_eq!(mind_change_bound(&big(&[2, 3]), 2), BigUint::from(672u32));
        assert_eq!(mind_change_bound_verbatim(&big(&[2]), 1), BigUint::zero());
    }

    #[test]
    fn quick_examples() {
        assert!(to_quick(&StagedClopenFamily::new(Profile::Standard, 0, 5)).is_empty());
        let mut f = StagedClopenFamily::new(Profile::Standard, 3, 10);
        f.components[1].events = vec![(2, c("{000}"))];
        f.components[2].events = vec![(3, c("{1111}"))];
        f.declared_bound = (0..3).map(|n| (n, BigUint::from(1u8))).collect();
        let q = to_quick(&f);
        assert_eq!(q.at(0, 10), c("{000,1111}"));
        assert_eq!(q.at(0, 10).measure(), "3/16".parse().unwrap());
        assert_eq!(q.declared_bound[&0], BigUint::from(2u8));
        assert!(validate_family(&q).is_empty());
        assert!((0..40).all(quick_budget_holds));
    }

    #[test]
    fn unsettled_is_rejected() {
        let mut f = single_mass(40);
        f.components[3].events = vec![(30, c("{000000}"))];
        let conv = to_clopen(&f, 40).unwrap();
        assert!(matches!(covering_check(&f, &conv.output, 40), Err(TransformError::NotSettled { .. })));
    }
}
