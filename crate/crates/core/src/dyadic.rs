//! Exact dyadic rational coordinates `n / 2^e`.
//!
//! Every knot and meshline position in this crate is a [`Dyadic`]. Structured
//! refinement only ever halves spans, so the set is closed under every
//! operation the mesh code needs and equality is decided on integers.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest exponent accepted. Keeps every shifted numerator inside `i128`.
pub const MAX_EXPONENT: u32 = 60;

/// Fractional bits accepted when converting from `f64`.
pub const F64_EXPONENT: u32 = 32;

/// A dyadic rational `numerator / 2^exponent`, always stored normalized
/// (odd numerator, or exponent zero).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: i64,
    exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };

    /// Builds `numerator / 2^exponent` and normalizes it.
    pub fn new(numerator: i64, exponent: u32) -> Result<Self> {
        if exponent > MAX_EXPONENT {
            return Err(Error::NonDyadic(format!(
                "exponent {exponent} exceeds {MAX_EXPONENT}"
            )));
        }
        Ok(Self::normalized(numerator as i128, exponent))
    }

    pub fn from_int(value: i64) -> Self {
        Dyadic { num: value, exp: 0 }
    }

    fn normalized(mut num: i128, mut exp: u32) -> Self {
        if num == 0 {
            return Dyadic::ZERO;
        }
        while exp > 0 && num & 1 == 0 {
            num >>= 1;
            exp -= 1;
        }
        Dyadic {
            num: i64::try_from(num).expect("dyadic numerator overflow"),
            exp,
        }
    }

    pub fn numerator(self) -> i64 {
        self.num
    }

    pub fn exponent(self) -> u32 {
        self.exp
    }

    /// Numerator scaled to the common exponent `exp` (which must be >= self.exp).
    fn scaled(self, exp: u32) -> i128 {
        (self.num as i128) << (exp - self.exp)
    }

    pub fn midpoint(self, other: Dyadic) -> Dyadic {
        let e = self.exp.max(other.exp);
        Self::normalized(self.scaled(e) + other.scaled(e), e + 1)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / (2f64).powi(self.exp as i32)
    }

    /// Exact conversion of a finite `f64` with at most [`F64_EXPONENT`]
    /// fractional bits. Values such as 0.1 are rejected rather than rounded.
    pub fn from_f64(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonDyadic(format!("{value} is not finite")));
        }
        for exp in 0..=F64_EXPONENT {
            let scaled = value * (2f64).powi(exp as i32);
            if scaled.fract() == 0.0 && scaled.abs() < 9.0e18 {
                return Dyadic::new(scaled as i64, exp);
            }
        }
        Err(Error::NonDyadic(format!("{value} has no short dyadic expansion")))
    }

    /// `self / other` as an exact rational.
    pub fn ratio(self, other: Dyadic) -> BigRational {
        let e = self.exp.max(other.exp);
        BigRational::new(BigInt::from(self.scaled(e)), BigInt::from(other.scaled(e)))
    }

    /// `self / 2^k` exactly.
    pub fn halve_times(self, k: u32) -> Dyadic {
        Self::normalized(self.num as i128, self.exp + k)
    }

    /// `(self - lo) / n` if it is dyadic, as used to split a span into `n` cells.
    pub fn div_int(self, n: i64) -> Option<Dyadic> {
        if n <= 0 {
            return None;
        }
        let pow = n.trailing_zeros();
        let odd = (n >> pow) as i128;
        let num = self.num as i128;
        if num % odd != 0 {
            return None;
        }
        Some(Self::normalized(num / odd, self.exp + pow))
    }

    pub fn mul_int(self, n: i64) -> Dyadic {
        Self::normalized(self.num as i128 * n as i128, self.exp)
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.exp == other.exp {
            return self.num.cmp(&other.num);
        }
        let e = self.exp.max(other.exp);
        self.scaled(e).cmp(&other.scaled(e))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        let e = self.exp.max(rhs.exp);
        Self::normalized(self.scaled(e) + rhs.scaled(e), e)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        let e = self.exp.max(rhs.exp);
        Self::normalized(self.scaled(e) - rhs.scaled(e), e)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        Self::normalized(self.num as i128 * rhs.num as i128, self.exp + rhs.exp)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            num: -self.num,
            exp: self.exp,
        }
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

// Serialized as `[numerator, exponent]`.
impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.num, self.exp).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (num, exp) = <(i64, u32)>::deserialize(d)?;
        Dyadic::new(num, exp).map_err(serde::de::Error::custom)
    }
}
