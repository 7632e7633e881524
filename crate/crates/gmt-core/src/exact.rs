//! Exact arithmetic helpers shared across the crate: floor division on signed
//! integers, comparison of `n * 2^(e*s)` quantities for rational `s`, Farey
//! sequences, and rounded integer powers of two with rational exponents.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(n.into(), d.into())
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(n.into())
}

/// Floor division for signed integers (quotient rounded toward -inf).
pub fn floor_div(a: i128, b: i128) -> i128 {
    debug_assert!(b > 0);
    let q = a / b;
    if a % b != 0 && a < 0 {
        q - 1
    } else {
        q
    }
}

/// A non-negative quantity of the form `(num/den) * 2^(exp2 * s)` where `s`
/// is a fixed non-negative rational supplied at comparison time. Frostman,
/// regularity and Katz-Tao constants all have this shape; for irrational
/// `2^(exp2*s)` the value itself is irrational, so comparisons are done
/// exactly on q-th powers instead of on decimal approximations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicPow {
    pub num: u64,
    pub den: u64,
    pub exp2: i64,
}

impl DyadicPow {
    pub fn new(num: u64, den: u64, exp2: i64) -> Self {
        debug_assert!(den > 0);
        DyadicPow { num, den, exp2 }
    }

    /// Exact comparison of `self` vs `other`, both read as `(num/den)*2^(exp2*s)`.
    pub fn cmp_with(&self, other: &DyadicPow, s: &Rat) -> Ordering {
        debug_assert!(!s.is_negative());
        if self.num == 0 || other.num == 0 {
            return self.num.cmp(&other.num);
        }
        let p = s.numer().to_biguint().expect("s >= 0");
        let q = s.denom().to_biguint().expect("s >= 0");
        let q32 = q.to_u32().expect("denominator of s fits u32");
        let p64 = p.to_i64().expect("numerator of s fits i64") as i128;
        // self <=> other  <=>  num1^q * den2^q * 2^(e1*p) <=> num2^q * den1^q * 2^(e2*p)
        let e1 = self.exp2 as i128 * p64;
        let e2 = other.exp2 as i128 * p64;
        let shift = e1.min(e2);
        let lhs = BigUint::from(self.num).pow(q32) * BigUint::from(other.den).pow(q32)
            << u128::try_from(e1 - shift).unwrap();
        let rhs = BigUint::from(other.num).pow(q32) * BigUint::from(self.den).pow(q32)
            << u128::try_from(e2 - shift).unwrap();
        lhs.cmp(&rhs)
    }

    /// Exact comparison of `self = (num/den)*2^(exp2*s)` against a rational bound.
    pub fn cmp_rational(&self, bound: &Rat, s: &Rat) -> Ordering {
        debug_assert!(!s.is_negative());
        if bound.is_negative() {
            return Ordering::Greater;
        }
        if self.num == 0 {
            return if bound.is_zero() {
                Ordering::Equal
            } else {
                Ordering::Less
            };
        }
        if bound.is_zero() {
            return Ordering::Greater;
        }
        let p = s.numer().to_i64().expect("s numerator") as i128;
        let q32 = s.denom().to_u32().expect("s denominator fits u32");
        let bn = bound.numer().to_biguint().expect("bound >= 0");
        let bd = bound.denom().to_biguint().expect("bound > 0");
        let e = self.exp2 as i128 * p;
        // (num/den)*2^(e0*s) <=> bn/bd   raised to q-th power:
        // num^q * bd^q * 2^e  <=>  bn^q * den^q
        let mut lhs = BigUint::from(self.num).pow(q32) * bd.pow(q32);
        let mut rhs = bn.pow(q32) * BigUint::from(self.den).pow(q32);
        if e >= 0 {
            lhs <<= u128::try_from(e).unwrap();
        } else {
            rhs <<= u128::try_from(-e).unwrap();
        }
        lhs.cmp(&rhs)
    }

    pub fn to_f64(&self, s: &Rat) -> f64 {
        let sv = s.to_f64().unwrap_or(f64::NAN);
        (self.num as f64 / self.den as f64) * (self.exp2 as f64 * sv).exp2()
    }
}

/// log2 of a power of two, None otherwise.
pub fn log2_exact(n: u64) -> Option<u32> {
    if n > 0 && n.is_power_of_two() {
        Some(n.trailing_zeros())
    } else {
        None
    }
}

/// Round a rational half-up to the nearest integer.
pub fn round_half_up(x: &Rat) -> i64 {
    let shifted = x + rat(1, 2);
    shifted
        .floor()
        .to_integer()
        .to_i64()
        .expect("rounded value fits i64")
}

/// Round a rational to the nearest integer with ties to even.
pub fn round_half_even(x: &Rat) -> i64 {
    let fl = x.floor().to_integer().to_i64().expect("fits i64");
    let rem = x - Rat::from_integer(fl.into());
    let half = rat(1, 2);
    match rem.cmp(&half) {
        Ordering::Less => fl,
        Ordering::Greater => fl + 1,
        Ordering::Equal => {
            if fl % 2 == 0 {
                fl
            } else {
                fl + 1
            }
        }
    }
}

/// Nearest integer to 2^(e * s) for integer e >= 0 and rational s >= 0,
/// computed exactly via q-th roots: returns L minimizing |L - 2^(e*s)|.
pub fn pow2_rational_rounded(e: u32, s: &Rat) -> u64 {
    debug_assert!(!s.is_negative());
    let p = s.numer().to_u64().expect("s numerator") as u128;
    let q = s.denom().to_u64().expect("s denominator") as u32;
    let target_exp = p * e as u128; // value = 2^(target_exp / q)
    let target = BigUint::one() << target_exp;
    // binary search L with L^q <= 2^target_exp < (L+1)^q
    let mut lo: u64 = 1;
    let mut hi: u64 = 2u64
        .checked_pow(
            u32::try_from(target_exp / q as u128 + 1)
                .unwrap_or(63)
                .min(62),
        )
        .unwrap_or(u64::MAX / 2);
    while lo < hi {
        let mid = lo + (hi - lo + 1) / 2;
        if BigUint::from(mid).pow(q) <= target {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    // lo = floor(2^(e*s)); round by comparing (2*lo+1)^q against 2^(q + target... )
    // (lo + 1/2)^q  <=>  2^target_exp    <=>   (2lo+1)^q <=> 2^(target_exp + q)
    let half_up = BigUint::from(2 * lo + 1).pow(q);
    if half_up <= (BigUint::one() << (target_exp + q as u128)) {
        lo + 1
    } else {
        lo
    }
}

/// Farey fractions p/q in [0,1) with denominator at most `qmax`, sorted.
pub fn farey(qmax: u32) -> Vec<(u32, u32)> {
    let mut out = vec![(0u32, 1u32)];
    for q in 2..=qmax.max(1) {
        for p in 1..q {
            if num_integer::gcd(p, q) == 1 {
                out.push((p, q));
            }
        }
    }
    out.sort_by(|a, b| (a.0 as u64 * b.1 as u64).cmp(&(b.0 as u64 * a.1 as u64)));
    out
}

/// Exact test  a^q <= 2^m  for positive integers.
pub fn pow_le_pow2(a: u64, q: u32, m: u128) -> bool {
    BigUint::from(a).pow(q) <= (BigUint::one() << m)
}

/// Parse a rational from "p/q" or a bare integer string.
pub fn rat_from_str(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        Some(rat(n, d))
    } else {
        let n: i64 = s.parse().ok()?;
        Some(rat_int(n))
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn rat_to_string(r: &Rat) -> String {
    if r.denom() == &num_bigint::BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Serde codec for rationals as "p/q" strings (also accepts bare integers
/// and JSON numbers on input).
pub mod serde_rat {
    use super::{rat_from_str, rat_to_string, Rat};
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&rat_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Rat, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        match Raw::deserialize(de)? {
            Raw::Text(s) => rat_from_str(&s)
                .ok_or_else(|| D::Error::custom(format!("bad rational literal: {s}"))),
            Raw::Int(n) => Ok(super::rat_int(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_div_signed() {
        assert_eq!(floor_div(7, 2), 3);
        assert_eq!(floor_div(-7, 2), -4);
        assert_eq!(floor_div(-8, 2), -4);
        assert_eq!(floor_div(0, 4), 0);
    }

    #[test]
    fn dyadic_pow_ordering() {
        let s = rat(1, 2);
        // 3 * 2^(4 * 1/2) = 12  vs  5 * 2^(2 * 1/2) = 10
        let a = DyadicPow::new(3, 1, 4);
        let b = DyadicPow::new(5, 1, 2);
        assert_eq!(a.cmp_with(&b, &s), Ordering::Greater);
        // equality: 4 * 2^(0) vs 2 * 2^(2 * 1/2)
        let c = DyadicPow::new(4, 1, 0);
        let d = DyadicPow::new(2, 1, 2);
        assert_eq!(c.cmp_with(&d, &s), Ordering::Equal);
        assert_eq!(c.cmp_rational(&rat_int(4), &s), Ordering::Equal);
        assert_eq!(c.cmp_rational(&rat(9, 2), &s), Ordering::Less);
    }

    #[test]
    fn pow2_rounding() {
        let half = rat(1, 2);
        assert_eq!(pow2_rational_rounded(4, &half), 4);
        // 2^(3/2) = 2.828.. -> 3
        assert_eq!(pow2_rational_rounded(3, &half), 3);
        // 2^(1/2) = 1.414 -> 1
        assert_eq!(pow2_rational_rounded(1, &half), 1);
        assert_eq!(pow2_rational_rounded(7, &half), 11); // 2^3.5 = 11.31
    }

    #[test]
    fn farey_small() {
        let f = farey(4);
        let vals: Vec<(u32, u32)> = f;
        assert_eq!(vals, vec![(0, 1), (1, 4), (1, 3), (1, 2), (2, 3), (3, 4)]);
    }

    #[test]
    fn rounding_modes() {
        assert_eq!(round_half_even(&rat(9, 2)), 4);
        assert_eq!(round_half_even(&rat(11, 2)), 6);
        assert_eq!(round_half_up(&rat(9, 2)), 5);
        assert_eq!(round_half_up(&rat(7, 4)), 2);
        assert_eq!(round_half_even(&rat(7, 4)), 2);
    }
}
