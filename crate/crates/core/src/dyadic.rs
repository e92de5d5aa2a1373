use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A non-negative rational of the form `numerator / 2^exponent`.
///
/// Values are kept canonical: the numerator is odd, or it is zero and the
/// exponent is zero. Two equal values are therefore structurally equal.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Dyadic {
    num: BigUint,
    exp: u64,
}

impl Dyadic {
    pub fn zero() -> Dyadic {
        Dyadic { num: BigUint::zero(), exp: 0 }
    }

    pub fn one() -> Dyadic {
        Dyadic { num: BigUint::one(), exp: 0 }
    }

    /// `2^-k`.
    pub fn pow2_neg(k: u64) -> Dyadic {
        Dyadic { num: BigUint::one(), exp: k }
    }

    pub fn from_int(n: u64) -> Dyadic {
        Dyadic::new(BigUint::from(n), 0)
    }

    pub fn new(num: BigUint, exp: u64) -> Dyadic {
        let mut d = Dyadic { num, exp };
        d.normalize();
        d
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0).min(self.exp);
        if tz > 0 {
            self.num >>= tz as usize;
            self.exp -= tz;
        }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.num
    }

    pub fn exponent(&self) -> u64 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Numerator after rescaling to denominator `2^e`. Requires `e >= exponent`.
    fn scaled(&self, e: u64) -> BigUint {
        &self.num << ((e - self.exp) as usize)
    }

    /// `self - other`, or `None` when the result would be negative.
    pub fn checked_sub(&self, other: &Dyadic) -> Option<Dyadic> {
        let e = self.exp.max(other.exp);
        let a = self.scaled(e);
        let b = other.scaled(e);
        if a < b {
            None
        } else {
            Some(Dyadic::new(a - b, e))
        }
    }

    /// `self - other`, clamped at zero.
    pub fn saturating_sub(&self, other: &Dyadic) -> Dyadic {
        self.checked_sub(other).unwrap_or_else(Dyadic::zero)
    }

    /// Multiplies by `2^-k`.
    pub fn shr(&self, k: u64) -> Dyadic {
        if self.is_zero() {
            return Dyadic::zero();
        }
        Dyadic { num: self.num.clone(), exp: self.exp + k }
    }

    /// Multiplies by `2^k`.
    pub fn shl(&self, k: u64) -> Dyadic {
        let drop = k.min(self.exp);
        Dyadic::new(&self.num << ((k - drop) as usize), self.exp - drop)
    }

    pub fn mul_int(&self, n: &BigUint) -> Dyadic {
        Dyadic::new(&self.num * n, self.exp)
    }

    /// Smallest `k` with `2^-k <= self`, for a positive value at most 1.
    /// For zero this is `None`.
    pub fn least_k_below(&self) -> Option<u64> {
        if self.is_zero() {
            return None;
        }
        // self = num / 2^exp with num >= 1; floor(log2 num) = bits - 1.
        let lg = self.num.bits() - 1;
        Some(self.exp.saturating_sub(lg))
    }

    /// If the value is an exact power of two `2^-k`, returns `k`.
    pub fn as_pow2_neg(&self) -> Option<u64> {
        if self.num.is_one() {
            Some(self.exp)
        } else {
            None
        }
    }

    /// Binary digits after the point, most significant first, up to the exponent.
    /// Only meaningful for values below 1.
    pub fn fraction_bits(&self) -> Vec<bool> {
        (1..=self.exp)
            .map(|i| self.num.bit(self.exp - i))
            .collect()
    }
}

impl Default for Dyadic {
    fn default() -> Dyadic {
        Dyadic::zero()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Dyadic) -> Ordering {
        let e = self.exp.max(other.exp);
        self.scaled(e).cmp(&other.scaled(e))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Dyadic) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, other: &Dyadic) -> Dyadic {
        let e = self.exp.max(other.exp);
        Dyadic::new(self.scaled(e) + other.scaled(e), e)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, other: Dyadic) -> Dyadic {
        &self + &other
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, other: &Dyadic) -> Dyadic {
        Dyadic::new(&self.num * &other.num, self.exp + other.exp)
    }
}

impl std::iter::Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |a, b| &a + &b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else if self.exp <= 20 {
            write!(f, "{}/{}", self.num, 1u64 << self.exp)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed dyadic literal `{0}`")]
pub struct DyadicParseError(pub String);

impl FromStr for Dyadic {
    type Err = DyadicParseError;

    fn from_str(s: &str) -> Result<Dyadic, DyadicParseError> {
        let bad = || DyadicParseError(s.to_string());
        let s = s.trim();
        let Some((n, d)) = s.split_once('/') else {
            return Ok(Dyadic::new(s.parse::<BigUint>().map_err(|_| bad())?, 0));
        };
        let num = n.trim().parse::<BigUint>().map_err(|_| bad())?;
        let d = d.trim();
        let exp = if let Some(e) = d.strip_prefix("2^") {
            e.parse::<u64>().map_err(|_| bad())?
        } else {
            let den = d.parse::<u64>().map_err(|_| bad())?;
            if den == 0 || !den.is_power_of_two() {
                return Err(bad());
            }
            den.trailing_zeros() as u64
        };
        Ok(Dyadic::new(num, exp))
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Dyadic, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
