//! Binary polynomials in the delay operator D.
//!
//! Two text forms are accepted: D-notation (`"1+D+D^3"`) and octal
//! (`"0o13"` or `"13"`). In octal form bit k of the value is the
//! coefficient of D^k, so `1+D+D^3` is `0o13` and `1+D+D^2+D^3` is `0o17`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

const MAX_DEGREE: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinaryPolynomial {
    mask: u32,
}

impl BinaryPolynomial {
    pub fn from_mask(mask: u32) -> Result<Self, Error> {
        if mask == 0 {
            return Err(Error::Config("zero polynomial".into()));
        }
        if 31 - mask.leading_zeros() > MAX_DEGREE {
            return Err(Error::Config(format!("polynomial degree above {MAX_DEGREE}")));
        }
        Ok(Self { mask })
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn degree(&self) -> usize {
        (31 - self.mask.leading_zeros()) as usize
    }

    pub fn coefficient(&self, k: usize) -> bool {
        k < 32 && (self.mask >> k) & 1 == 1
    }

    pub fn has_unit_constant(&self) -> bool {
        self.coefficient(0)
    }

    pub fn to_octal(&self) -> String {
        format!("0o{:o}", self.mask)
    }

    /// D-notation, lowest power first.
    pub fn to_d_notation(&self) -> String {
        (0..=self.degree())
            .filter(|&k| self.coefficient(k))
            .map(|k| match k {
                0 => "1".to_string(),
                1 => "D".to_string(),
                _ => format!("D^{k}"),
            })
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl fmt::Display for BinaryPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_d_notation())
    }
}

impl FromStr for BinaryPolynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(Error::Config("empty polynomial".into()));
        }
        let bad = || Error::Config(format!("cannot parse polynomial {s:?}"));
        if !s.contains(['D', 'd']) && s != "1" {
            let digits = s.strip_prefix("0o").unwrap_or(&s);
            let mask = u32::from_str_radix(digits, 8).map_err(|_| bad())?;
            return Self::from_mask(mask);
        }
        let mut mask = 0u32;
        for term in s.split(['+', '⊕']) {
            let power = match term {
                "1" => 0,
                "D" | "d" => 1,
                t => t
                    .strip_prefix("D^")
                    .or_else(|| t.strip_prefix("d^"))
                    .and_then(|p| p.parse::<u32>().ok())
                    .ok_or_else(bad)?,
            };
            if power > MAX_DEGREE {
                return Err(bad());
            }
            // repeated terms cancel over GF(2)
            mask ^= 1 << power;
        }
        Self::from_mask(mask)
    }
}

impl Serialize for BinaryPolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_d_notation())
    }
}

impl<'de> Deserialize<'de> for BinaryPolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
