//! Lazy handling of the factorial thresholds N_q = (2^{q-1} #levels_{q-1})!.
//! These are only ever divided into or compared against, never materialized:
//! comparisons use early-stopping partial products and divisibility uses
//! Legendre's formula on the factor multiset.

use std::collections::BTreeMap;

use num::{BigUint, Integer, One, Zero};
use serde::{Deserialize, Serialize};

/// A threshold value: either the factorial of a (possibly huge) argument, or
/// an explicitly supplied value (toy mode).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NBound {
    Factorial(BigUint),
    Value(BigUint),
}

impl NBound {
    /// Does `s >= self` hold? For `Factorial(n)` the partial product
    /// 1*2*...*k is grown only until it exceeds `s`, so the factorial itself
    /// is materialized only when the answer is "yes".
    pub fn met_by(&self, s: &BigUint) -> bool {
        match self {
            NBound::Value(v) => s >= v,
            NBound::Factorial(n) => {
                if n <= &BigUint::one() {
                    return !s.is_zero();
                }
                let mut prod = BigUint::one();
                let mut k = BigUint::from(2u32);
                while k <= *n {
                    prod *= &k;
                    if prod > *s {
                        return false;
                    }
                    k += 1u32;
                }
                true
            }
        }
    }

    /// Does `d | self` hold? `None` means the test could not be certified
    /// (a factor of `d` beyond the trial-division guard and larger than the
    /// factorial argument); callers must treat that as a failure with reason.
    pub fn divisible_by(&self, d: &BigUint) -> Option<bool> {
        if d.is_zero() {
            return Some(false);
        }
        if d.is_one() {
            return Some(true);
        }
        match self {
            NBound::Value(v) => Some(v.is_multiple_of(d)),
            NBound::Factorial(n) => {
                // every k <= n divides n! (each prime power p^a <= n has
                // v_p(n!) >= floor(n/p) >= p^{a-1} >= a)
                if d <= n {
                    return Some(true);
                }
                let (factors, leftover) = trial_factor(d, 1_000_000);
                for (p, a) in &factors {
                    if legendre_valuation_at_least(n, p, *a) != Some(true) {
                        return Some(false);
                    }
                }
                match leftover {
                    None => Some(true),
                    // leftover's prime factors exceed the guard; if the
                    // leftover itself is <= n it still divides n! and its
                    // prime support is disjoint from the certified part
                    Some(l) if &l <= n => Some(true),
                    Some(_) => None,
                }
            }
        }
    }
}

/// v_p(n!) >= a, via Legendre's formula with early exit.
fn legendre_valuation_at_least(n: &BigUint, p: &BigUint, a: u64) -> Option<bool> {
    let mut total: u64 = 0;
    let mut pk = p.clone();
    while pk <= *n {
        let term = n / &pk;
        // terms shrink geometrically; the first one usually settles it
        match u64::try_from(&term) {
            Ok(t) => {
                total = total.saturating_add(t);
            }
            Err(_) => return Some(true), // astronomically many factors of p
        }
        if total >= a {
            return Some(true);
        }
        pk *= p;
    }
    Some(total >= a)
}

/// Trial division up to `guard`; returns (prime -> exponent, leftover > 1).
fn trial_factor(d: &BigUint, guard: u64) -> (BTreeMap<BigUint, u64>, Option<BigUint>) {
    let mut rest = d.clone();
    let mut factors = BTreeMap::new();
    let mut p = 2u64;
    while p <= guard {
        let pb = BigUint::from(p);
        if &pb * &pb > rest {
            break;
        }
        while rest.is_multiple_of(&pb) {
            rest /= &pb;
            *factors.entry(pb.clone()).or_insert(0u64) += 1;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if rest.is_one() {
        (factors, None)
    } else if rest <= BigUint::from(guard).pow(2) {
        // rest is prime (no factor below its square root)
        *factors.entry(rest).or_insert(0) += 1;
        (factors, None)
    } else {
        (factors, Some(rest))
    }
}

/// Where a stage takes its N_q values from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NSource {
    /// N_q = (2^{q-1} * #registered nodes of rank < q)!
    Lazy,
    /// explicitly supplied threshold values per rank, with a default
    Explicit {
        default: u64,
        #[serde(default)]
        overrides: BTreeMap<u32, u64>,
    },
}

impl NSource {
    pub fn toy() -> Self {
        NSource::Explicit { default: 1, overrides: BTreeMap::new() }
    }
}

/// The two places N_q is consumed pull in opposite directions: coefficient
/// denominators must divide N_q (larger is laxer) while very-fast-growing
/// sizes must reach N_q (smaller is laxer). Toy stages therefore keep the
/// lazy factorial for denominators and an explicit small table for growth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NPolicy {
    pub denom: NSource,
    pub growth: NSource,
}

impl NPolicy {
    pub fn strict() -> Self {
        NPolicy { denom: NSource::Lazy, growth: NSource::Lazy }
    }
    pub fn toy() -> Self {
        NPolicy { denom: NSource::Lazy, growth: NSource::toy() }
    }
    pub fn is_toy(&self) -> bool {
        self.growth != NSource::Lazy
    }
}

/// N_q for a given source. `count_below` is #(registered nodes of rank < q).
pub fn n_bound(source: &NSource, rank: u32, count_below: u64) -> NBound {
    match source {
        NSource::Lazy => {
            assert!(rank >= 1);
            let arg = (BigUint::one() << (rank - 1) as usize) * BigUint::from(count_below);
            NBound::Factorial(arg)
        }
        NSource::Explicit { default, overrides } => {
            NBound::Value(BigUint::from(*overrides.get(&rank).unwrap_or(default)))
        }
    }
}
