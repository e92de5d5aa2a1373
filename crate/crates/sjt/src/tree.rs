//! Nodes of the strategy tree: finite sequences over ω ∪ {fin}.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Outcome of a node. Integers come first, `fin` is greatest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    D(u32),
    Fin,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::D(d) => write!(f, "{d}"),
            Outcome::Fin => write!(f, "fin"),
        }
    }
}

/// A strategy. Ordered length-first, then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Node(Vec<Outcome>);

impl Ord for Node {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.len().cmp(&o.0.len()).then_with(|| self.0.cmp(&o.0))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Node {
    pub fn root() -> Node {
        Node(Vec::new())
    }

    pub fn from_outcomes(v: Vec<Outcome>) -> Node {
        Node(v)
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<Outcome> {
        self.0.last().copied()
    }

    pub fn child(&self, o: Outcome) -> Node {
        let mut v = self.0.clone();
        v.push(o);
        Node(v)
    }

    pub fn parent(&self) -> Option<Node> {
        if self.0.is_empty() {
            None
        } else {
            Some(Node(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn prefix(&self, l: usize) -> Node {
        Node(self.0[..l].to_vec())
    }

    /// σ ∈ F: nonempty and not ending in fin.
    pub fn in_f(&self) -> bool {
        matches!(self.last(), Some(Outcome::D(_)))
    }

    pub fn is_prefix_of(&self, o: &Node) -> bool {
        o.0.len() >= self.0.len() && o.0[..self.0.len()] == self.0[..]
    }

    pub fn is_proper_prefix_of(&self, o: &Node) -> bool {
        self.0.len() < o.0.len() && self.is_prefix_of(o)
    }

    /// F^σ: the proper prefixes of σ lying in F, shortest first.
    pub fn f_set(&self) -> Vec<Node> {
        (1..self.0.len()).map(|l| self.prefix(l)).filter(Node::in_f).collect()
    }

    /// The longest element of F^σ.
    pub fn largest_f(&self) -> Option<Node> {
        self.f_set().pop()
    }

    /// Outcomes after `base`, when `base` is a prefix.
    pub fn suffix_after(&self, base: &Node) -> Option<Node> {
        base.is_prefix_of(self).then(|| Node(self.0[base.len()..].to_vec()))
    }

    /// Largest integer outcome used, if any.
    pub fn max_int(&self) -> Option<u32> {
        self.0
            .iter()
            .filter_map(|o| match o {
                Outcome::D(d) => Some(*d),
                Outcome::Fin => None,
            })
            .max()
    }

    /// Position in length-lexicographic order over outcomes {0..branching-1, fin}.
    /// Requires every integer outcome below `branching`.
    pub fn rank(&self, branching: u32) -> u128 {
        let base = branching as u128 + 1;
        let mut r: u128 = 0;
        let mut p: u128 = 1;
        for _ in 0..self.0.len() {
            r += p;
            p *= base;
        }
        let mut lex: u128 = 0;
        for o in &self.0 {
            let digit = match o {
                Outcome::D(d) => *d as u128,
                Outcome::Fin => branching as u128,
            };
            lex = lex * base + digit;
        }
        r + lex
    }

    /// Every node with integer outcomes below `branching` and length ≤ `depth`, in rank order.
    pub fn all_upto(branching: u32, depth: usize) -> Vec<Node> {
        let mut out = vec![Node::root()];
        let mut layer = vec![Node::root()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for n in &layer {
                for d in 0..branching {
                    next.push(n.child(Outcome::D(d)));
                }
                next.push(n.child(Outcome::Fin));
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for (i, o) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{o}")?;
        }
        write!(f, ">")
    }
}

#[derive(Debug, thiserror::Error)]
#[error("bad node literal: {0}")]
pub struct NodeParseError(String);

impl FromStr for Node {
    type Err = NodeParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let inner = t
            .strip_prefix('<')
            .and_then(|r| r.strip_suffix('>'))
            .ok_or_else(|| NodeParseError(s.to_string()))?;
        if inner.trim().is_empty() {
            return Ok(Node::root());
        }
        inner
            .split(',')
            .map(|p| match p.trim() {
                "fin" => Ok(Outcome::Fin),
                x => x.parse().map(Outcome::D).map_err(|_| NodeParseError(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Node)
    }
}

impl Serialize for Node {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Node {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Node {
        s.parse().unwrap()
    }

    #[test]
    fn rank_matches_sorted_enumeration() {
        let all = Node::all_upto(3, 3);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
        for (i, x) in all.iter().enumerate() {
            assert_eq!(x.rank(3), i as u128, "{x}");
        }
    }

    #[test]
    fn fin_is_last_among_siblings() {
        assert!(n("<0>") < n("<5>"));
        assert!(n("<5>") < n("<fin>"));
        assert!(n("<fin>") < n("<0,0>"));
        assert_eq!(n("<fin>").rank(2), 3);
    }

    #[test]
    fn f_sets() {
        assert!(!Node::root().in_f());
        assert!(!n("<fin>").in_f());
        assert!(n("<0,fin,2>").in_f());
        assert_eq!(n("<0,fin,2,1>").f_set(), vec![n("<0>"), n("<0,fin,2>")]);
        assert_eq!(n("<0,fin,fin>").largest_f(), Some(n("<0>")));
        assert_eq!(n("<fin,fin>").largest_f(), None);
    }

    #[test]
    fn literal_roundtrip() {
        for s in ["<>", "<0>", "<fin>", "<3,fin,0>"] {
            assert_eq!(n(s).to_string(), s);
        }
    }
}
