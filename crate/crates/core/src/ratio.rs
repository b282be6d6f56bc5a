//! Exact rational helpers and their text renderings.

use num::bigint::{BigInt, Sign};
use num::rational::{BigRational, Ratio};
use num::{Integer, One, Signed, ToPrimitive, Zero};

/// Small exact fraction used for overlap potentials (bin counts never exceed
/// `u64`).
pub type Fraction = Ratio<u64>;

pub fn to_big(f: Fraction) -> BigRational {
    BigRational::new(BigInt::from(*f.numer()), BigInt::from(*f.denom()))
}

/// `num/den` in lowest terms; integers render without a denominator.
pub fn fraction_string(f: &Fraction) -> String {
    if f.is_integer() {
        f.numer().to_string()
    } else {
        format!("{}/{}", f.numer(), f.denom())
    }
}

pub fn big_fraction_string(f: &BigRational) -> String {
    if f.is_integer() {
        f.numer().to_string()
    } else {
        format!("{}/{}", f.numer(), f.denom())
    }
}

pub fn fraction_f64(f: &Fraction) -> f64 {
    *f.numer() as f64 / *f.denom() as f64
}

pub fn big_f64(f: &BigRational) -> f64 {
    f.to_f64().unwrap_or(f64::NAN)
}

/// Fixed-point decimal with `places` digits, rounding half away from zero.
pub fn decimal(f: &BigRational, places: u32) -> String {
    let scale = BigInt::from(10u32).pow(places);
    let scaled = f * BigRational::from_integer(scale.clone());
    let (q, r) = scaled.numer().abs().div_rem(scaled.denom());
    let twice = r * BigInt::from(2u32);
    let rounded = if twice >= *scaled.denom() { q + BigInt::one() } else { q };
    let negative = scaled.numer().sign() == Sign::Minus && !rounded.is_zero();
    let (int_part, frac_part) = rounded.div_rem(&scale);
    let sign = if negative { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int_part}")
    } else {
        format!(
            "{sign}{int_part}.{:0>width$}",
            frac_part.to_string(),
            width = places as usize
        )
    }
}

pub fn fraction_decimal(f: &Fraction, places: u32) -> String {
    decimal(&to_big(*f), places)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn decimal_rounding() {
        assert_eq!(decimal(&r(109, 20), 2), "5.45");
        assert_eq!(decimal(&r(1, 3), 4), "0.3333");
        assert_eq!(decimal(&r(2, 3), 4), "0.6667");
        assert_eq!(decimal(&r(1, 8), 2), "0.13");
        assert_eq!(decimal(&r(-1, 8), 2), "-0.13");
        assert_eq!(decimal(&r(-1, 1000), 2), "0.00");
        assert_eq!(decimal(&r(7, 1), 0), "7");
        assert_eq!(decimal(&r(0, 1), 3), "0.000");
    }

    #[test]
    fn fraction_text() {
        assert_eq!(fraction_string(&Fraction::new(2, 6)), "1/3");
        assert_eq!(fraction_string(&Fraction::new(0, 6)), "0");
        assert_eq!(fraction_string(&Fraction::new(3, 3)), "1");
    }
}
