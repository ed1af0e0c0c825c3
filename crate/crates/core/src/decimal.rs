//! Fixed-point decimal used to carry tabulated coefficients at full
//! transcription precision until they are rounded once to `f64`.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

/// Number of fractional decimal digits kept.
pub const SCALE_DIGITS: u32 = 36;
const SCALE: i128 = 10i128.pow(SCALE_DIGITS);
/// Integer part is limited so that sums of a few dozen entries cannot overflow.
const MAX_INT_PART: i128 = 100;

/// A decimal number `value / 10^36` stored exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Decimal(i128);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDecimalError(pub String);

impl fmt::Display for ParseDecimalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseDecimalError {}

impl Decimal {
    pub const ZERO: Decimal = Decimal(0);
    pub const ONE: Decimal = Decimal(SCALE);
    pub const HALF: Decimal = Decimal(SCALE / 2);

    pub fn from_int(n: i64) -> Self {
        Decimal(n as i128 * SCALE)
    }

    /// Correctly rounded conversion, done through the decimal text so the
    /// standard library's round-to-nearest parser does the work.
    pub fn to_f64(self) -> f64 {
        self.to_string().parse().expect("decimal text is valid f64 text")
    }

    pub fn abs(self) -> Self {
        Decimal(self.0.abs())
    }
}

impl FromStr for Decimal {
    type Err = ParseDecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |m: &str| ParseDecimalError(format!("`{s}`: {m}"));
        let t = s.trim();
        let (neg, body) = match t.as_bytes().first() {
            Some(b'-') => (true, &t[1..]),
            Some(b'+') => (false, &t[1..]),
            _ => (false, t),
        };
        let (int_txt, frac_txt) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_txt.is_empty() && frac_txt.is_empty() {
            return Err(err("empty number"));
        }
        if !int_txt.bytes().all(|b| b.is_ascii_digit()) || !frac_txt.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err("expected a plain decimal number"));
        }
        let int_part: i128 =
            if int_txt.is_empty() { 0 } else { int_txt.parse().map_err(|_| err("integer part too large"))? };
        if int_part >= MAX_INT_PART {
            return Err(err("magnitude must be below 100"));
        }
        let frac_digits = frac_txt.as_bytes();
        let kept = frac_digits.len().min(SCALE_DIGITS as usize);
        let mut frac: i128 = 0;
        for &d in &frac_digits[..kept] {
            frac = frac * 10 + (d - b'0') as i128;
        }
        frac *= 10i128.pow(SCALE_DIGITS - kept as u32);
        // round half away from zero on the first dropped digit
        if frac_digits.len() > kept && frac_digits[kept] >= b'5' {
            frac += 1;
        }
        let magnitude = int_part * SCALE + frac;
        Ok(Decimal(if neg { -magnitude } else { magnitude }))
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let m = self.0.unsigned_abs();
        let int_part = m / SCALE as u128;
        let frac = m % SCALE as u128;
        if frac == 0 {
            return write!(f, "{sign}{int_part}");
        }
        let digits = format!("{:0width$}", frac, width = SCALE_DIGITS as usize);
        write!(f, "{sign}{int_part}.{}", digits.trim_end_matches('0'))
    }
}

impl Add for Decimal {
    type Output = Decimal;
    fn add(self, rhs: Decimal) -> Decimal {
        Decimal(self.0 + rhs.0)
    }
}

impl Sub for Decimal {
    type Output = Decimal;
    fn sub(self, rhs: Decimal) -> Decimal {
        Decimal(self.0 - rhs.0)
    }
}

impl Neg for Decimal {
    type Output = Decimal;
    fn neg(self) -> Decimal {
        Decimal(-self.0)
    }
}

impl Mul<i64> for Decimal {
    type Output = Decimal;
    fn mul(self, rhs: i64) -> Decimal {
        Decimal(self.0 * rhs as i128)
    }
}

impl Sum for Decimal {
    fn sum<I: Iterator<Item = Decimal>>(iter: I) -> Decimal {
        iter.fold(Decimal::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Decimal> for Decimal {
    fn sum<I: Iterator<Item = &'a Decimal>>(iter: I) -> Decimal {
        iter.copied().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_table_entries_exactly() {
        let d: Decimal = "-0.00072932909837392655161199996844".parse().unwrap();
        assert_eq!(d.to_string(), "-0.00072932909837392655161199996844");
        assert_eq!(d.to_f64(), -0.000_729_329_098_373_926_5_f64);
    }

    #[test]
    fn closure_arithmetic_is_exact() {
        let a: Decimal = "0.1".parse().unwrap();
        let b: Decimal = "0.2".parse().unwrap();
        assert_eq!(Decimal::HALF - (a + b), "0.2".parse().unwrap());
        assert_eq!(Decimal::ONE - (a + b) * 2, "0.4".parse().unwrap());
    }

    #[test]
    fn rejects_garbage() {
        assert!("1e-3".parse::<Decimal>().is_err());
        assert!("".parse::<Decimal>().is_err());
        assert!("-".parse::<Decimal>().is_err());
        assert!("0.1.2".parse::<Decimal>().is_err());
        assert!("123.0".parse::<Decimal>().is_err());
    }

    #[test]
    fn rounds_beyond_scale() {
        let d: Decimal = "0.0000000000000000000000000000000000015".parse().unwrap();
        assert_eq!(d, Decimal(2));
    }

    proptest! {
        #[test]
        fn text_round_trip(raw in -(99 * SCALE)..(99 * SCALE)) {
            let d = Decimal(raw);
            prop_assert_eq!(d.to_string().parse::<Decimal>().unwrap(), d);
        }
    }
}
