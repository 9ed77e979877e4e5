//! Angles that remember exact multiples of pi.
//!
//! Rotation angles enter as fractions of pi ("0.053pi", "1/4pi"). Keeping
//! the fraction avoids decimal drift in reports and lets orbit extension
//! decide rationality of `theta/pi` exactly.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    radians: f64,
    /// `(p, q)` in lowest terms when the angle is exactly `(p/q) pi`.
    over_pi: Option<(i64, u64)>,
}

impl Angle {
    pub fn zero() -> Self {
        Self::from_pi_fraction(0, 1)
    }

    pub fn from_radians(radians: f64) -> Self {
        Self {
            radians,
            over_pi: None,
        }
    }

    pub fn from_pi_fraction(p: i64, q: u64) -> Self {
        assert!(q != 0, "zero denominator");
        let g = gcd(p.unsigned_abs(), q);
        let (p, q) = (p / g as i64, q / g as u64);
        Self {
            radians: p as f64 / q as f64 * PI,
            over_pi: Some((p, q)),
        }
    }

    pub fn radians(&self) -> f64 {
        self.radians
    }

    /// The reduced fraction `theta/pi` when known exactly.
    pub fn over_pi(&self) -> Option<(i64, u64)> {
        self.over_pi
    }

    /// Parses "0.053pi", "1/4pi", "pi", or a plain number meaning radians.
    pub fn parse(text: &str) -> Result<Self> {
        let s = text.trim();
        let bad = |msg: &str| Error::Domain(format!("cannot parse angle '{text}': {msg}"));
        if let Some(frac) = s
            .strip_suffix("pi")
            .map(str::trim)
            .or_else(|| s.strip_suffix('\u{3c0}').map(str::trim))
        {
            if frac.is_empty() {
                return Ok(Self::from_pi_fraction(1, 1));
            }
            if frac == "-" {
                return Ok(Self::from_pi_fraction(-1, 1));
            }
            if let Some((num, den)) = frac.split_once('/') {
                let p: i64 = num
                    .trim()
                    .parse()
                    .map_err(|_| bad("bad fraction numerator"))?;
                let q: u64 = den
                    .trim()
                    .parse()
                    .map_err(|_| bad("bad fraction denominator"))?;
                if q == 0 {
                    return Err(bad("zero denominator"));
                }
                return Ok(Self::from_pi_fraction(p, q));
            }
            let (p, q) = decimal_to_fraction(frac).ok_or_else(|| bad("bad decimal multiple"))?;
            return Ok(Self::from_pi_fraction(p, q));
        }
        let radians: f64 = s.parse().map_err(|_| bad("not a number"))?;
        Ok(Self::from_radians(radians))
    }
}

/// "0.053" -> (53, 1000); also plain integers.
fn decimal_to_fraction(s: &str) -> Option<(i64, u64)> {
    let (sign, digits) = match s.strip_prefix('-') {
        Some(rest) => (-1i64, rest),
        None => (1i64, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let mut p: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().ok()?
    };
    let mut q: u64 = 1;
    for c in frac_part.chars() {
        p = p.checked_mul(10)?.checked_add((c as u8 - b'0') as i64)?;
        q = q.checked_mul(10)?;
    }
    Some((sign * p, q))
}

fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

impl fmt::Display for Angle {
    /// Canonical text form: an exact decimal multiple of pi when the reduced
    /// denominator is 2^a 5^b (e.g. "0.053pi"), a fraction otherwise
    /// ("1/3pi"), or plain radians when no fraction is known.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.over_pi {
            Some((p, q)) => {
                if let Some(dec) = fraction_to_decimal(p, q) {
                    write!(f, "{dec}pi")
                } else {
                    write!(f, "{p}/{q}pi")
                }
            }
            None => write!(f, "{}", self.radians),
        }
    }
}

fn fraction_to_decimal(p: i64, q: u64) -> Option<String> {
    let mut q_red = q;
    let mut twos = 0u32;
    let mut fives = 0u32;
    while q_red % 2 == 0 {
        q_red /= 2;
        twos += 1;
    }
    while q_red % 5 == 0 {
        q_red /= 5;
        fives += 1;
    }
    if q_red != 1 {
        return None;
    }
    let digits = twos.max(fives);
    if digits > 17 {
        return None;
    }
    // scale p/q to p'/10^digits
    let scale = 10u128.pow(digits) / q as u128;
    let scaled = p.unsigned_abs() as u128 * scale;
    let sign = if p < 0 { "-" } else { "" };
    if digits == 0 {
        return Some(format!("{sign}{scaled}"));
    }
    let ten = 10u128.pow(digits);
    let int = scaled / ten;
    let frac = scaled % ten;
    let frac_str = format!("{frac:0width$}", width = digits as usize);
    let frac_str = frac_str.trim_end_matches('0');
    if frac_str.is_empty() {
        Some(format!("{sign}{int}"))
    } else {
        Some(format!("{sign}{int}.{frac_str}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parse_forms() {
        let a = Angle::parse("0.053pi").unwrap();
        assert_eq!(a.over_pi(), Some((53, 1000)));
        assert_relative_eq!(a.radians(), 0.053 * PI, max_relative = 1e-15);
        assert_eq!(a.to_string(), "0.053pi");

        let a = Angle::parse("1/4pi").unwrap();
        assert_eq!(a.over_pi(), Some((1, 4)));
        assert_eq!(a.to_string(), "0.25pi");

        let a = Angle::parse("pi").unwrap();
        assert_eq!(a.over_pi(), Some((1, 1)));
        assert_eq!(a.to_string(), "1pi");

        let a = Angle::parse("0pi").unwrap();
        assert_eq!(a.over_pi(), Some((0, 1)));
        assert_relative_eq!(a.radians(), 0.0);

        let a = Angle::parse("1.234").unwrap();
        assert_eq!(a.over_pi(), None);
        assert_relative_eq!(a.radians(), 1.234);

        let a = Angle::parse("1/3pi").unwrap();
        assert_eq!(a.to_string(), "1/3pi");

        assert!(Angle::parse("xpi").is_err());
        assert!(Angle::parse("1/0pi").is_err());
        assert!(Angle::parse("").is_err());
    }

    #[test]
    fn canonical_round_trip() {
        for s in ["0.053pi", "0.25pi", "0pi", "2pi", "-0.4pi", "7/20pi", "1/3pi"] {
            let a = Angle::parse(s).unwrap();
            let printed = a.to_string();
            let b = Angle::parse(&printed).unwrap();
            assert_eq!(b.to_string(), printed, "not canonical for {s}");
            assert_eq!(a.over_pi(), b.over_pi());
        }
    }
}
