//! Positive constants stored by their natural logarithm.
//!
//! The prefactor of a maximal bound routinely exceeds `f64::MAX`
//! (it grows like `exp(c2 / c1)` and `c1` shrinks quadratically as the
//! rate approaches its limit), so it is carried as `ln C` and rendered as
//! a JSON number with an unbounded decimal exponent.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};

/// Largest natural log for which the plain `f64` rendering is used.
const PLAIN_LN_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Magnitude {
    ln: f64,
}

impl Magnitude {
    pub fn from_ln(ln: f64) -> Self {
        Magnitude { ln }
    }

    /// # Panics
    /// If `value` is not strictly positive.
    pub fn from_value(value: f64) -> Self {
        assert!(value > 0.0, "magnitude must be positive, got {value}");
        Magnitude { ln: value.ln() }
    }

    pub fn ln(self) -> f64 {
        self.ln
    }

    /// The value as `f64`; `+inf` when it does not fit.
    pub fn value(self) -> f64 {
        self.ln.exp()
    }

    pub fn is_finite_f64(self) -> bool {
        self.ln < f64::MAX.ln()
    }

    /// `self * exp(-x)` in log space.
    pub fn times_exp_neg(self, x: f64) -> Magnitude {
        Magnitude { ln: self.ln - x }
    }

    /// Decimal rendering: shortest round-trip `f64` when representable,
    /// otherwise a 16-digit mantissa with an explicit decimal exponent.
    pub fn to_decimal(self) -> String {
        if self.ln.abs() <= PLAIN_LN_LIMIT {
            return format!("{:e}", self.value());
        }
        let log10 = self.ln / std::f64::consts::LN_10;
        let mut exponent = log10.floor();
        let mut mantissa = (self.ln - exponent * std::f64::consts::LN_10).exp();
        if mantissa >= 10.0 {
            mantissa /= 10.0;
            exponent += 1.0;
        }
        format!("{mantissa:.15}e{}", exponent as i64)
    }

    pub fn parse_decimal(text: &str) -> Result<Magnitude> {
        let text = text.trim();
        let bad = || Error::Parse(format!("not a positive decimal number: {text:?}"));
        if let Ok(v) = text.parse::<f64>() {
            if v > 0.0 && v.is_finite() {
                return Ok(Magnitude::from_value(v));
            }
        }
        let (mantissa, exponent) = text.split_once(['e', 'E']).ok_or_else(bad)?;
        let mantissa: f64 = mantissa.parse().map_err(|_| bad())?;
        let exponent: i64 = exponent
            .trim_start_matches('+')
            .parse()
            .map_err(|_| bad())?;
        if !(mantissa > 0.0 && mantissa.is_finite()) {
            return Err(bad());
        }
        Ok(Magnitude {
            ln: mantissa.ln() + exponent as f64 * std::f64::consts::LN_10,
        })
    }
}

impl PartialOrd for Magnitude {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.ln.partial_cmp(&other.ln)
    }
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

impl FromStr for Magnitude {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Magnitude::parse_decimal(s)
    }
}

impl Serialize for Magnitude {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(self.to_decimal()).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Magnitude {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = Box::<RawValue>::deserialize(deserializer)?;
        let text = raw.get().trim_matches('"');
        Magnitude::parse_decimal(text).map_err(D::Error::custom)
    }
}
