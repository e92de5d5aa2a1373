//! Clopen subsets of Cantor space as canonical prefix antichains.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dyadic::Dyadic;

/// A finite binary string. `Ord` is lexicographic, with a proper prefix
/// ordered before its extensions.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn empty() -> BitString {
        BitString(Vec::new())
    }

    pub fn from_bits(bits: Vec<bool>) -> BitString {
        BitString(bits)
    }

    pub fn zeros(n: usize) -> BitString {
        BitString(vec![false; n])
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn push(&mut self, b: bool) {
        self.0.push(b);
    }

    pub fn child(&self, b: bool) -> BitString {
        let mut v = self.0.clone();
        v.push(b);
        BitString(v)
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        BitString(v)
    }

    pub fn truncate(&self, n: usize) -> BitString {
        BitString(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn comparable(&self, other: &BitString) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    /// The string read as a binary numeral, most significant bit first.
    pub fn to_index(&self) -> usize {
        self.0.iter().fold(0usize, |a, &b| (a << 1) | b as usize)
    }

    pub fn from_index(mut i: usize, len: usize) -> BitString {
        let mut v = vec![false; len];
        for slot in v.iter_mut().rev() {
            *slot = i & 1 == 1;
            i >>= 1;
        }
        BitString(v)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("e");
        }
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for BitString {
    type Err = CantorError;

    fn from_str(s: &str) -> Result<BitString, CantorError> {
        let s = s.trim();
        if s == "e" || s.is_empty() {
            return Ok(BitString::empty());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(CantorError::Parse(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<BitString, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CantorError {
    #[error("insufficient measure: wanted {wanted}, only {available} available")]
    InsufficientMeasure { wanted: Dyadic, available: Dyadic },
    #[error("depth {depth} is smaller than the longest prefix ({needed})")]
    DepthTooSmall { depth: usize, needed: usize },
    #[error("empty set")]
    EmptySet,
    #[error("malformed literal `{0}`")]
    Parse(String),
}

/// A clopen subset of 2^ω, stored as a sorted canonical prefix antichain.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct ClopenSet {
    prefixes: Vec<BitString>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersection,
    Difference,
}

impl SetOp {
    fn eval(self, a: bool, b: bool) -> bool {
        match self {
            SetOp::Union => a || b,
            SetOp::Intersection => a && b,
            SetOp::Difference => a && !b,
        }
    }
}

impl ClopenSet {
    pub fn empty() -> ClopenSet {
        ClopenSet { prefixes: Vec::new() }
    }

    pub fn full() -> ClopenSet {
        ClopenSet { prefixes: vec![BitString::empty()] }
    }

    pub fn cylinder(w: BitString) -> ClopenSet {
        ClopenSet { prefixes: vec![w] }
    }

    pub fn prefixes(&self) -> &[BitString] {
        &self.prefixes
    }

    pub fn is_empty(&self) -> bool {
        self.prefixes.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.prefixes.len() == 1 && self.prefixes[0].is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.prefixes.iter().map(BitString::len).max().unwrap_or(0)
    }

    pub fn contains_point(&self, x: &BitString) -> bool {
        self.prefixes.iter().any(|w| w.is_prefix_of(x))
    }

    pub fn union(&self, other: &ClopenSet) -> ClopenSet {
        combine(SetOp::Union, self, other)
    }

    pub fn intersection(&self, other: &ClopenSet) -> ClopenSet {
        combine(SetOp::Intersection, self, other)
    }

    pub fn difference(&self, other: &ClopenSet) -> ClopenSet {
        combine(SetOp::Difference, self, other)
    }

    pub fn complement(&self) -> ClopenSet {
        combine(SetOp::Difference, &ClopenSet::full(), self)
    }

    pub fn measure(&self) -> Dyadic {
        measure(self)
    }

    pub fn is_subset(&self, other: &ClopenSet) -> bool {
        subset(self, other)
    }

    pub fn is_disjoint(&self, other: &ClopenSet) -> bool {
        self.intersection(other).is_empty()
    }
}

/// Returns the canonical antichain denoting the same clopen set as `prefixes`.
pub fn canonicalize<I: IntoIterator<Item = BitString>>(prefixes: I) -> ClopenSet {
    let mut v: Vec<BitString> = prefixes.into_iter().collect();
    v.sort();
    v.dedup();
    // Sorted order puts every extension of w right after w.
    let mut anti: Vec<BitString> = Vec::with_capacity(v.len());
    for w in v {
        if anti.last().is_some_and(|p| p.is_prefix_of(&w)) {
            continue;
        }
        anti.push(w);
    }
    let mut out: Vec<BitString> = Vec::with_capacity(anti.len());
    for w in anti {
        out.push(w);
        while out.len() >= 2 {
            let n = out.len();
            let (a, b) = (&out[n - 2], &out[n - 1]);
            let l = a.len();
            if l > 0
                && b.len() == l
                && !a.bit(l - 1)
                && b.bit(l - 1)
                && a.bits()[..l - 1] == b.bits()[..l - 1]
            {
                let parent = a.truncate(l - 1);
                out.truncate(n - 2);
                out.push(parent);
            } else {
                break;
            }
        }
    }
    ClopenSet { prefixes: out }
}

pub fn measure(c: &ClopenSet) -> Dyadic {
    let l = c.max_len();
    let mut num = BigUint::zero();
    for w in &c.prefixes {
        num += BigUint::from(1u8) << (l - w.len());
    }
    Dyadic::new(num, l as u64)
}

enum Side<'a> {
    Empty,
    Full,
    Partial(&'a [BitString]),
}

fn side(strings: &[BitString], depth: usize) -> Side<'_> {
    match strings {
        [] => Side::Empty,
        [w] if w.len() == depth => Side::Full,
        _ => Side::Partial(strings),
    }
}

/// Splits a sorted slice of strings that all extend a common prefix of
/// length `depth` (and are longer than it) by their next bit.
fn split(strings: &[BitString], depth: usize) -> (&[BitString], &[BitString]) {
    let k = strings.partition_point(|w| !w.bit(depth));
    strings.split_at(k)
}

fn complement_within(strings: &[BitString], depth: usize, prefix: &mut BitString, out: &mut Vec<BitString>) {
    match side(strings, depth) {
        Side::Empty => out.push(prefix.clone()),
        Side::Full => {}
        Side::Partial(s) => {
            let (l, r) = split(s, depth);
            for (b, half) in [(false, l), (true, r)] {
                prefix.push(b);
                complement_within(half, depth + 1, prefix, out);
                prefix.0.pop();
            }
        }
    }
}

fn combine_rec(
    op: SetOp,
    a: &[BitString],
    b: &[BitString],
    depth: usize,
    prefix: &mut BitString,
    out: &mut Vec<BitString>,
) {
    let fixed = |v: bool, partial: &[BitString], partial_is_left: bool, prefix: &mut BitString, out: &mut Vec<BitString>| {
        let f = |x: bool| if partial_is_left { op.eval(x, v) } else { op.eval(v, x) };
        match (f(false), f(true)) {
            (false, false) => {}
            (true, true) => out.push(prefix.clone()),
            (false, true) => out.extend_from_slice(partial),
            (true, false) => complement_within(partial, depth, prefix, out),
        }
    };
    match (side(a, depth), side(b, depth)) {
        (Side::Partial(pa), Side::Partial(pb)) => {
            let (a0, a1) = split(pa, depth);
            let (b0, b1) = split(pb, depth);
            prefix.push(false);
            combine_rec(op, a0, b0, depth + 1, prefix, out);
            prefix.0.pop();
            prefix.push(true);
            combine_rec(op, a1, b1, depth + 1, prefix, out);
            prefix.0.pop();
        }
        (Side::Partial(pa), sb) => fixed(matches!(sb, Side::Full), pa, true, prefix, out),
        (sa, Side::Partial(pb)) => fixed(matches!(sa, Side::Full), pb, false, prefix, out),
        (sa, sb) => {
            if op.eval(matches!(sa, Side::Full), matches!(sb, Side::Full)) {
                out.push(prefix.clone());
            }
        }
    }
}

/// Pointwise boolean combination of two clopen sets.
pub fn combine(op: SetOp, a: &ClopenSet, b: &ClopenSet) -> ClopenSet {
    let mut out = Vec::new();
    combine_rec(op, &a.prefixes, &b.prefixes, 0, &mut BitString::empty(), &mut out);
    canonicalize(out)
}

pub fn subset(a: &ClopenSet, b: &ClopenSet) -> bool {
    combine(SetOp::Difference, a, b).is_empty()
}

/// The leftmost part of `cyl(w)` with measure `r`, where `0 < r < 2^-|w|`.
fn leftmost_within(w: &BitString, r: &Dyadic, out: &mut Vec<BitString>) {
    let scaled = r.shl(w.len() as u64);
    let digits = scaled.fraction_bits();
    let mut path = w.clone();
    for d in digits {
        if d {
            out.push(path.child(false));
        }
        path.push(d);
    }
}

/// A subset of `source - avoid` of measure exactly `target`, chosen as the
/// lexicographically leftmost portion.
pub fn carve(source: &ClopenSet, target: &Dyadic, avoid: &ClopenSet) -> Result<ClopenSet, CantorError> {
    let pool = source.difference(avoid);
    let available = pool.measure();
    if *target > available {
        return Err(CantorError::InsufficientMeasure { wanted: target.clone(), available });
    }
    let mut remaining = target.clone();
    let mut out = Vec::new();
    for w in pool.prefixes() {
        if remaining.is_zero() {
            break;
        }
        let piece = Dyadic::pow2_neg(w.len() as u64);
        if piece <= remaining {
            remaining = remaining.checked_sub(&piece).expect("piece fits");
            out.push(w.clone());
        } else {
            leftmost_within(w, &remaining, &mut out);
            remaining = Dyadic::zero();
        }
    }
    Ok(canonicalize(out))
}

/// All strings of length `depth` whose cylinder lies in `c`, in order.
pub fn refine(c: &ClopenSet, depth: usize) -> Result<Vec<BitString>, CantorError> {
    let needed = c.max_len();
    if depth < needed {
        return Err(CantorError::DepthTooSmall { depth, needed });
    }
    let mut out = Vec::new();
    for w in c.prefixes() {
        let extra = depth - w.len();
        for i in 0..(1usize << extra) {
            out.push(w.concat(&BitString::from_index(i, extra)));
        }
    }
    Ok(out)
}

/// The leftmost string of length `depth` inside `c`.
pub fn pick_point(c: &ClopenSet, depth: usize) -> Result<BitString, CantorError> {
    let needed = c.max_len();
    if depth < needed {
        return Err(CantorError::DepthTooSmall { depth, needed });
    }
    let w = c.prefixes.first().ok_or(CantorError::EmptySet)?;
    Ok(w.concat(&BitString::zeros(depth - w.len())))
}

impl fmt::Display for ClopenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, w) in self.prefixes.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{w}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for ClopenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for ClopenSet {
    type Err = CantorError;

    fn from_str(s: &str) -> Result<ClopenSet, CantorError> {
        let t = s.trim();
        let inner = t
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| CantorError::Parse(s.to_string()))?;
        if inner.trim().is_empty() {
            return Ok(ClopenSet::empty());
        }
        let parts = inner
            .split(',')
            .map(|p| {
                if p.trim().is_empty() {
                    Err(CantorError::Parse(s.to_string()))
                } else {
                    p.parse::<BitString>()
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(canonicalize(parts))
    }
}

impl Serialize for ClopenSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ClopenSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<ClopenSet, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}
