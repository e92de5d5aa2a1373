//! The true path at the horizon and the final audit.

use crate::engine::Base;
use crate::tree::{Node, Out, Req};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AuditError {
    #[error("not settled: {0}")]
    NotSettled(String),
}

/// Leftmost outcomes still accessible in the second half of the run.
pub fn true_path(b: &Base) -> Vec<Node> {
    let half = b.scenario.horizon / 2;
    let late = |x: &Node| b.state.last_access.get(x).is_some_and(|&t| t > half);
    let mut path = vec![Node::root()];
    loop {
        let cur = path.last().unwrap().clone();
        let outs: &[Out] = match cur.req() {
            Req::N(_) => &[Out::Inf, Out::Fin],
            Req::P(..) => &[Out::Go],
        };
        match outs.iter().map(|&o| cur.child(o)).find(|c| late(c)) {
            Some(c) => path.push(c),
            None => break,
        }
    }
    path
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub path: Vec<Node>,
    /// (e, x) whose final jump value is missing from T^e_x.
    pub untraced: Vec<(usize, u64)>,
    /// (e, x) with |T^e_x| > h_e(x).
    pub oversize: Vec<(usize, u64)>,
    /// P-nodes whose final V is not inside U_n.
    pub uncovered: Vec<Node>,
    /// Number of (e, x) and P-nodes actually examined.
    pub traced_checked: usize,
    pub covered_checked: usize,
}

impl AuditReport {
    pub fn ok(&self) -> bool {
        self.untraced.is_empty() && self.oversize.is_empty() && self.uncovered.is_empty()
    }
}

pub fn audit_final(b: &Base) -> Result<AuditReport, AuditError> {
    let h = b.scenario.horizon;
    let half = h / 2;
    if b.scenario.last_event() > half {
        return Err(AuditError::NotSettled(format!("scripted event at stage {}", b.scenario.last_event())));
    }
    let path = true_path(b);
    for x in &path {
        let init = b.state.p_nodes.get(x).map(|s| s.last_init).or_else(|| b.state.n_nodes.get(x).map(|s| s.last_init)).unwrap_or(0);
        if init > half {
            return Err(AuditError::NotSettled(format!("{x} initialised at stage {init}")));
        }
    }
    let mut rep = AuditReport { path: path.clone(), ..Default::default() };
    for sigma in &path {
        match sigma.req() {
            Req::N(e) => {
                let Some(order) = b.scenario.orders.get(e) else { continue };
                if !order.is_order() {
                    continue;
                }
                let Some(st) = b.state.n_nodes.get(sigma) else { continue };
                for (x, j) in b.scenario.jump.iter().enumerate() {
                    let x = x as u64;
                    if let Some(t) = st.traces.get(&x) {
                        if x < order.domain_at(h) && num_bigint::BigUint::from(t.len()) > b.h(e, x) .clone() {
                            rep.oversize.push((e, x));
                        }
                    }
                    // The value is final once A stops changing below the use.
                    let changed = b.state.a.range(..j.use_).map(|(_, en)| en.stage).max().unwrap_or(0).max(j.start);
                    if st.attended.get(&x).is_none_or(|&t| t <= changed) {
                        continue;
                    }
                    rep.traced_checked += 1;
                    let v = b.a_prefix(j.use_);
                    if !st.traces.get(&x).is_some_and(|t| t.contains(&v)) {
                        rep.untraced.push((e, x));
                    }
                }
            }
            Req::P(e, _) => {
                let Some(st) = b.state.p_nodes.get(sigma) else { continue };
                let (Some(n), Some(y)) = (st.n, st.y) else { continue };
                let Some(f) = b.scenario.functionals.get(e) else { continue };
                let changed = b.state.a.range(..=y).map(|(_, en)| en.stage).max().unwrap_or(0).max(f.last_stage());
                if b.state.last_access.get(sigma).is_none_or(|&t| t <= changed) {
                    continue;
                }
                rep.covered_checked += 1;
                let v = f.v_set(h, &b.a_prefix(y + 1));
                let u = b.state.u.get(&n).map(|c| c.set.clone()).unwrap_or_default();
                if !v.is_subset(&u) {
                    rep.uncovered.push(sigma.clone());
                }
            }
        }
    }
    Ok(rep)
}
