//! The true path at the horizon and the point X it determines.

use crate::engine::Sjt;
use crate::tree::{Node, Outcome};
use demuth_core::{pick_point, verdict, BitString, ClopenSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PathError {
    #[error("scenario still changes at stage {last}, after half the horizon")]
    NotSettled { last: u64 },
    #[error("the sets along the path have empty intersection")]
    EmptyIntersection,
    #[error("depth {depth} is below the longest prefix {needed}")]
    DepthTooSmall { depth: usize, needed: usize },
}

/// Last scripted change to A or to a test.
pub fn last_event(eng: &Sjt) -> u64 {
    let a = eng.scenario.a_script.iter().map(|(s, _)| *s).max().unwrap_or(0);
    let v = eng.scenario.families.iter().flat_map(|f| f.events.iter().map(|e| e.stage)).max().unwrap_or(0);
    a.max(v)
}

/// f(e) = fin when g^e is partial, else the least d still accessible late in the run.
pub fn compute_true_path(eng: &Sjt) -> Result<Vec<Node>, PathError> {
    let h = eng.scenario.horizon;
    let last = last_event(eng);
    if last > h / 2 {
        return Err(PathError::NotSettled { last });
    }
    // Accessible in the second half of the run, after every scripted change.
    let after = last.max(h / 2);
    let seen_after = |x: &Node| eng.state.last_access.get(x).is_some_and(|&t| t > after);
    let mut path = vec![Node::root()];
    loop {
        let cur = path.last().unwrap().clone();
        if cur.len() >= eng.scenario.depth {
            break;
        }
        let next = if !eng.params.g_family(cur.len()).domain.is_total() {
            Some(cur.child(Outcome::Fin))
        } else {
            (0..eng.scenario.branching).map(|d| cur.child(Outcome::D(d))).find(|c| seen_after(c))
        };
        match next {
            Some(c) if seen_after(&c) => path.push(c),
            _ => break,
        }
    }
    Ok(path)
}

/// ∩ over the path of U − W − E, at the horizon.
pub fn path_core(eng: &Sjt, path: &[Node]) -> ClopenSet {
    let e = &eng.state.error_set;
    path.iter().fold(ClopenSet::full(), |acc, x| acc.intersection(&eng.u_of(x).difference(&eng.w_of(x)).difference(e)))
}

pub fn select_x(eng: &Sjt, path: &[Node], depth: usize) -> Result<BitString, PathError> {
    let core = path_core(eng, path);
    if core.is_empty() {
        return Err(PathError::EmptyIntersection);
    }
    pick_point(&core, depth).map_err(|_| PathError::DepthTooSmall { depth, needed: core.max_len() })
}

/// Depth at which X can be checked against every set involved.
pub fn needed_depth(eng: &Sjt, path: &[Node]) -> usize {
    let h = eng.scenario.horizon as usize;
    let mut d = path_core(eng, path).max_len().max(eng.state.error_set.max_len());
    for a in &eng.state.axioms {
        d = d.max(a.set.max_len());
    }
    for f in &eng.realized {
        d = d.max(f.max_len_at(h));
    }
    d.max(1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndToEnd {
    pub path: Vec<Node>,
    pub x: BitString,
    /// Levels |τ| > 1 on the path with no correct axiom covering X.
    pub gamma_missing: Vec<usize>,
    /// X lies in the error set.
    pub in_error: bool,
    /// (family, n) with X ∈ V_n and n ≥ n_ρ for a path node ρ that is passed.
    pub test_hits: Vec<(usize, usize)>,
}

impl EndToEnd {
    pub fn ok(&self) -> bool {
        self.gamma_missing.is_empty() && !self.in_error && self.test_hits.is_empty()
    }
}

pub fn end_to_end(eng: &Sjt) -> Result<EndToEnd, PathError> {
    let path = compute_true_path(eng)?;
    let depth = needed_depth(eng, &path);
    let x = select_x(eng, &path, depth)?;
    let a_final = |r: usize| eng.a_prefix(r);
    let gamma_missing = path
        .iter()
        .filter(|t| t.len() > 1)
        .filter(|t| !eng.state.axioms.iter().any(|ax| ax.set.contains_point(&x) && ax.alpha == a_final(t.len())))
        .map(Node::len)
        .collect();
    let in_error = eng.state.error_set.contains_point(&x);
    let mut test_hits = Vec::new();
    let h = eng.scenario.horizon as usize;
    for rho in path.iter().filter(|r| r.in_f()) {
        if path.last().is_none_or(|l| l.len() <= rho.len()) {
            continue;
        }
        let e = rho.len() - 1;
        let n0 = eng.params.n_of(rho) as usize;
        let hits = verdict(&x, &eng.realized[e], h).map_err(|_| PathError::DepthTooSmall { depth, needed: eng.realized[e].max_len_at(h) })?;
        test_hits.extend(hits.into_iter().filter(|&n| n >= n0).map(|n| (e, n)));
    }
    Ok(EndToEnd { path, x, gamma_missing, in_error, test_hits })
}
