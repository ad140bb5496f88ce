//! Small helpers around `num`'s exact rationals. Everything in this crate is
//! exact; there is no floating point anywhere.

use num::bigint::Sign;
use num::{BigInt, BigRational, BigUint, One, Signed, Zero};

use crate::error::{Error, Result};

pub fn rat_zero() -> BigRational {
    BigRational::zero()
}

pub fn rat_one() -> BigRational {
    BigRational::one()
}

pub fn rat_int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat_frac(num: i64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// 1/n for a big natural n.
pub fn rat_inv(n: &BigUint) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from_biguint(Sign::Plus, n.clone()))
}

pub fn rat_from_biguint(n: &BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from_biguint(Sign::Plus, n.clone()))
}

/// Renders a rational in its canonical `p/q` form (`p` alone when integral).
pub fn rat_to_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p`, `p/q` or `-p/q` into an exact rational.
pub fn rat_parse(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(num, den))
}

pub fn rat_abs(r: &BigRational) -> BigRational {
    r.abs()
}
