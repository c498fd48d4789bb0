//! Exact rational scalars and their text renderings.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Arbitrary precision rational; every quantity in the crate is one of these.
pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn frac(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// `base^exp` for any integer exponent. Panics on `0^negative`.
pub fn pow(base: &Rational, exp: i64) -> Rational {
    let mag = u32::try_from(exp.unsigned_abs()).expect("exponent out of range");
    let p = Rational::new(num_traits::pow::Pow::pow(base.numer(), mag), num_traits::pow::Pow::pow(base.denom(), mag));
    if exp >= 0 {
        p
    } else {
        assert!(!p.is_zero(), "zero raised to a negative power");
        p.recip()
    }
}

/// `q^exp` for an integer base.
pub fn qpow(q: u32, exp: i64) -> Rational {
    pow(&int(i64::from(q)), exp)
}

/// Canonical `num/den` form: gcd-reduced, positive denominator, denominator always written.
pub fn to_fraction_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `num/den` or a bare integer.
pub fn parse_fraction(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rational::new(n, d))
        }
        None => Some(Rational::from_integer(s.parse().ok()?)),
    }
}

/// Fixed-point rendering with `digits` fractional digits, rounding half to even.
pub fn to_decimal_string(r: &Rational, digits: usize) -> String {
    let scale = num_traits::pow::Pow::pow(BigInt::from(10u32), digits);
    let scaled = r.abs() * Rational::from_integer(scale);
    let (mut quot, rem) = scaled.numer().div_rem(scaled.denom());
    let twice = rem * 2u32;
    let den = scaled.denom();
    if &twice > den || (&twice == den && quot.is_odd()) {
        quot += BigInt::one();
    }
    let mut body = quot.to_string();
    if digits > 0 {
        if body.len() <= digits {
            body = format!("{}{}", "0".repeat(digits + 1 - body.len()), body);
        }
        body.insert(body.len() - digits, '.');
    }
    if r.is_negative() && !quot.is_zero() {
        format!("-{body}")
    } else {
        body
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn powers_with_negative_exponents() {
        assert_eq!(qpow(2, -2), frac(1, 4));
        assert_eq!(qpow(3, 0), int(1));
        assert_eq!(pow(&frac(2, 3), -3), frac(27, 8));
    }

    #[test]
    fn fraction_strings_are_canonical() {
        assert_eq!(to_fraction_string(&int(3)), "3/1");
        assert_eq!(to_fraction_string(&frac(6, -8)), "-3/4");
        assert_eq!(parse_fraction("-3/4"), Some(frac(-3, 4)));
        assert_eq!(parse_fraction("7"), Some(int(7)));
        assert_eq!(parse_fraction("1/0"), None);
    }

    #[test]
    fn decimal_rounds_half_to_even() {
        assert_eq!(to_decimal_string(&frac(1, 8), 2), "0.12");
        assert_eq!(to_decimal_string(&frac(3, 8), 2), "0.38");
        assert_eq!(to_decimal_string(&frac(-5, 2), 0), "-2");
        assert_eq!(to_decimal_string(&frac(1, 3), 4), "0.3333");
        assert_eq!(to_decimal_string(&frac(-1, 3000), 2), "0.00");
        assert_eq!(to_decimal_string(&frac(752, 3), 3), "250.667");
    }

    proptest! {
        #[test]
        fn fraction_string_round_trips(n in -10_000i64..10_000, d in 1i64..10_000) {
            let r = frac(n, d);
            prop_assert_eq!(parse_fraction(&to_fraction_string(&r)), Some(r));
        }
    }
}
