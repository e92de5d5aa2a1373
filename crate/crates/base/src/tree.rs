//! The priority tree. Level 2e works for N_e, level 2<e,m>+1 for P_{e,m}.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Outcome of a node. `Inf` lies left of `Fin`; P-nodes have the single outcome `Go`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Out {
    Inf,
    Fin,
    Go,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Req {
    N(usize),
    P(usize, usize),
}

/// Cantor pairing.
pub fn pair(e: usize, m: usize) -> usize {
    (e + m) * (e + m + 1) / 2 + m
}

pub fn unpair(z: usize) -> (usize, usize) {
    let mut w = 0;
    while (w + 1) * (w + 2) / 2 <= z {
        w += 1;
    }
    let m = z - w * (w + 1) / 2;
    (w - m, m)
}

pub fn req_at(level: usize) -> Req {
    if level.is_multiple_of(2) {
        Req::N(level / 2)
    } else {
        let (e, m) = unpair((level - 1) / 2);
        Req::P(e, m)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Node(Vec<Out>);

impl Node {
    pub fn root() -> Node {
        Node(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn outcomes(&self) -> &[Out] {
        &self.0
    }

    pub fn req(&self) -> Req {
        req_at(self.0.len())
    }

    pub fn child(&self, o: Out) -> Node {
        let mut v = self.0.clone();
        v.push(o);
        Node(v)
    }

    pub fn prefix(&self, l: usize) -> Node {
        Node(self.0[..l].to_vec())
    }

    pub fn is_prefix_of(&self, o: &Node) -> bool {
        o.0.starts_with(&self.0)
    }

    pub fn is_proper_prefix_of(&self, o: &Node) -> bool {
        self.0.len() < o.0.len() && self.is_prefix_of(o)
    }

    /// Strictly left: at the first difference self takes the smaller outcome.
    pub fn left_of(&self, o: &Node) -> bool {
        self.0.iter().zip(&o.0).find(|(a, b)| a != b).is_some_and(|(a, b)| a < b)
    }

    /// The N-nodes β with β⌢inf ⊆ self, with the index d of their order.
    pub fn inf_ancestors(&self) -> Vec<(Node, usize)> {
        (0..self.0.len())
            .filter(|&l| self.0[l] == Out::Inf)
            .map(|l| match req_at(l) {
                Req::N(d) => (self.prefix(l), d),
                Req::P(..) => unreachable!("inf below a P-node"),
            })
            .collect()
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self
            .0
            .iter()
            .map(|o| match o {
                Out::Inf => "inf",
                Out::Fin => "fin",
                Out::Go => "p",
            })
            .collect();
        write!(f, "<{}>", parts.join(","))
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("bad node literal {0:?}")]
pub struct NodeParseError(String);

impl FromStr for Node {
    type Err = NodeParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || NodeParseError(s.to_string());
        let inner = s.trim().strip_prefix('<').and_then(|r| r.strip_suffix('>')).ok_or_else(bad)?;
        let mut v = Vec::new();
        for (l, part) in inner.split(',').map(str::trim).filter(|p| !p.is_empty()).enumerate() {
            let o = match (part, req_at(l)) {
                ("inf", Req::N(_)) => Out::Inf,
                ("fin", Req::N(_)) => Out::Fin,
                ("p", Req::P(..)) => Out::Go,
                _ => return Err(bad()),
            };
            v.push(o);
        }
        Ok(Node(v))
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

    #[test]
    fn levels() {
        assert_eq!(req_at(0), Req::N(0));
        assert_eq!(req_at(1), Req::P(0, 0));
        assert_eq!(req_at(2), Req::N(1));
        assert_eq!(req_at(3), Req::P(1, 0));
        assert_eq!(req_at(5), Req::P(0, 1));
        assert_eq!(req_at(7), Req::P(2, 0));
    }

    #[test]
    fn pairing_inverts() {
        for e in 0..20 {
            for m in 0..20 {
                assert_eq!(unpair(pair(e, m)), (e, m));
            }
        }
    }

    #[test]
    fn left_and_literals() {
        let a: Node = "<inf,p>".parse().unwrap();
        let b: Node = "<fin>".parse().unwrap();
        assert!(a.left_of(&b));
        assert!(!b.left_of(&a));
        assert!(!a.left_of(&"<inf>".parse().unwrap()));
        assert_eq!(a.to_string(), "<inf,p>");
        assert!("<p>".parse::<Node>().is_err());
        assert_eq!(a.inf_ancestors(), vec![(Node::root(), 0)]);
    }
}
