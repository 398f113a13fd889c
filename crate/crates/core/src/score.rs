//! Exact fixed-point arithmetic for scores and objective values.
//!
//! Scores carry exactly three fractional digits and are stored as integer
//! millipoints, so every comparison and sum is exact integer arithmetic.
//! Products of two scores (weight times saturated total) are exact in
//! micropoints and live in [`Value`]. No binary floating point enters any
//! comparison; conversion to `f64` happens only at serialization boundaries.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Serialize, Serializer};

pub const MILLIS_PER_POINT: i64 = 1000;

/// A fixed-point decimal with three fractional digits (integer millipoints).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Score(i64);

impl Score {
    pub const ZERO: Score = Score(0);
    pub const ONE: Score = Score(MILLIS_PER_POINT);

    pub const fn from_millis(millis: i64) -> Score {
        Score(millis)
    }

    pub const fn from_int(value: i64) -> Score {
        Score(value * MILLIS_PER_POINT)
    }

    pub const fn as_millis(self) -> i64 {
        self.0
    }

    /// True when the score is a whole number (an annotator level).
    pub const fn is_integer_level(self) -> bool {
        self.0 % MILLIS_PER_POINT == 0
    }

    /// Whole-number value, meaningful only when `is_integer_level`.
    pub const fn integer_part(self) -> i64 {
        self.0 / MILLIS_PER_POINT
    }

    pub fn min(self, other: Score) -> Score {
        Score(self.0.min(other.0))
    }

    pub fn max(self, other: Score) -> Score {
        Score(self.0.max(other.0))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / MILLIS_PER_POINT as f64
    }
}

impl Add for Score {
    type Output = Score;
    fn add(self, rhs: Score) -> Score {
        Score(self.0 + rhs.0)
    }
}

impl AddAssign for Score {
    fn add_assign(&mut self, rhs: Score) {
        self.0 += rhs.0;
    }
}

impl Sub for Score {
    type Output = Score;
    fn sub(self, rhs: Score) -> Score {
        Score(self.0 - rhs.0)
    }
}

impl Neg for Score {
    type Output = Score;
    fn neg(self) -> Score {
        Score(-self.0)
    }
}

impl Mul<i64> for Score {
    type Output = Score;
    fn mul(self, rhs: i64) -> Score {
        Score(self.0 * rhs)
    }
}

/// Exact product of two scores, in micropoints.
impl Mul for Score {
    type Output = Value;
    fn mul(self, rhs: Score) -> Value {
        Value(self.0 * rhs.0)
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_fixed(f, self.0, MILLIS_PER_POINT)
    }
}

impl FromStr for Score {
    type Err = String;

    /// Accepts a non-negative decimal with at most three fractional digits.
    /// Anything else is rejected so that exactness is never silently lost.
    fn from_str(s: &str) -> Result<Score, String> {
        let (int_part, frac_part) = match s.split_once('.') {
            Some((_, "")) => return Err(format!("invalid score value {s:?}")),
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("invalid score value {s:?}"));
        }
        if frac_part.len() > 3 || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!(
                "invalid score value {s:?}: at most 3 fractional digits are supported"
            ));
        }
        let whole: i64 = int_part
            .parse()
            .map_err(|_| format!("invalid score value {s:?}: integer part out of range"))?;
        let mut frac: i64 = 0;
        for b in frac_part.bytes() {
            frac = frac * 10 + i64::from(b - b'0');
        }
        for _ in frac_part.len()..3 {
            frac *= 10;
        }
        whole
            .checked_mul(MILLIS_PER_POINT)
            .and_then(|m| m.checked_add(frac))
            .map(Score)
            .ok_or_else(|| format!("invalid score value {s:?}: out of range"))
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

/// An exact objective value in micropoints (six fractional digits).
///
/// Weighted coverage sums are products of millipoint weights and millipoint
/// saturated totals, hence exactly representable here. Ordering is exact
/// integer comparison, which makes optimizer tie handling deterministic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Value(i64);

impl Value {
    pub const ZERO: Value = Value(0);

    pub const fn from_micros(micros: i64) -> Value {
        Value(micros)
    }

    pub const fn as_micros(self) -> i64 {
        self.0
    }

    pub fn from_score(score: Score) -> Value {
        Value(score.as_millis() * MILLIS_PER_POINT)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }
}

impl Add for Value {
    type Output = Value;
    fn add(self, rhs: Value) -> Value {
        Value(self.0 + rhs.0)
    }
}

impl AddAssign for Value {
    fn add_assign(&mut self, rhs: Value) {
        self.0 += rhs.0;
    }
}

impl Sub for Value {
    type Output = Value;
    fn sub(self, rhs: Value) -> Value {
        Value(self.0 - rhs.0)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_fixed(f, self.0, 1_000_000)
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

/// Rounds `numerator / denominator` half away from zero. `denominator` > 0.
pub(crate) fn div_round_half_away(numerator: i64, denominator: i64) -> i64 {
    debug_assert!(denominator > 0);
    if numerator >= 0 {
        (2 * numerator + denominator) / (2 * denominator)
    } else {
        -((2 * -numerator + denominator) / (2 * denominator))
    }
}

fn write_fixed(f: &mut fmt::Formatter<'_>, units: i64, per_point: i64) -> fmt::Result {
    let sign = if units < 0 { "-" } else { "" };
    let abs = units.unsigned_abs();
    let per = per_point as u64;
    let whole = abs / per;
    let mut frac = abs % per;
    if frac == 0 {
        return write!(f, "{sign}{whole}");
    }
    let mut digits = per / 10;
    let mut out = String::new();
    while frac > 0 {
        out.push(char::from(b'0' + (frac / digits) as u8));
        frac %= digits;
        digits /= 10;
    }
    write!(f, "{sign}{whole}.{out}")
}
