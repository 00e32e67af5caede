//! Physical constants and unit-tagged quantities.
//!
//! Everything inside the crate is SI with angular frequencies in rad/s.
//! User-facing frequencies are given in Hz (or MHz, ...) and converted here.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Bohr radius, m.
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
/// Debye, C m.
pub const DEBYE: f64 = 3.335_640_951_98e-30;

/// Physical dimension a [`Quantity`] is expected to carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    /// Converted to angular frequency, rad/s.
    Frequency,
    Time,
    Length,
    Area,
    /// Electric dipole moment, C m.
    Dipole,
    /// Count per unit time, 1/s.
    Rate,
    Dimensionless,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dimension::Frequency => "frequency",
            Dimension::Time => "time",
            Dimension::Length => "length",
            Dimension::Area => "area",
            Dimension::Dipole => "dipole moment",
            Dimension::Rate => "rate",
            Dimension::Dimensionless => "dimensionless",
        };
        f.write_str(name)
    }
}

/// A number with an explicit unit string, e.g. `"700 MHz"` or `"1 cm^2"`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: &str) -> Self {
        Quantity {
            value,
            unit: unit.to_string(),
        }
    }

    fn unit_table(&self) -> Option<(Dimension, f64)> {
        let u = self.unit.as_str();
        let entry = match u {
            "rad/s" => (Dimension::Frequency, 1.0),
            "Hz" => (Dimension::Frequency, 2.0 * PI),
            "kHz" => (Dimension::Frequency, 2.0 * PI * 1e3),
            "MHz" => (Dimension::Frequency, 2.0 * PI * 1e6),
            "GHz" => (Dimension::Frequency, 2.0 * PI * 1e9),
            "s" => (Dimension::Time, 1.0),
            "ms" => (Dimension::Time, 1e-3),
            "us" => (Dimension::Time, 1e-6),
            "ns" => (Dimension::Time, 1e-9),
            "m" => (Dimension::Length, 1.0),
            "cm" => (Dimension::Length, 1e-2),
            "mm" => (Dimension::Length, 1e-3),
            "um" => (Dimension::Length, 1e-6),
            "nm" => (Dimension::Length, 1e-9),
            "m^2" => (Dimension::Area, 1.0),
            "cm^2" => (Dimension::Area, 1e-4),
            "mm^2" => (Dimension::Area, 1e-6),
            "um^2" => (Dimension::Area, 1e-12),
            "C*m" => (Dimension::Dipole, 1.0),
            "ea0" => (Dimension::Dipole, ELEMENTARY_CHARGE * BOHR_RADIUS),
            "D" => (Dimension::Dipole, DEBYE),
            "1/s" => (Dimension::Rate, 1.0),
            "1/ms" => (Dimension::Rate, 1e3),
            "1/us" => (Dimension::Rate, 1e6),
            "" | "1" => (Dimension::Dimensionless, 1.0),
            _ => return None,
        };
        Some(entry)
    }

    /// Converts to SI (angular frequency for [`Dimension::Frequency`]).
    pub fn to_si(&self, expected: Dimension) -> Result<f64> {
        let (dim, scale) = self
            .unit_table()
            .ok_or_else(|| Error::Input(format!("unknown unit {:?}", self.unit)))?;
        if dim != expected {
            return Err(Error::Input(format!(
                "expected a {expected} but {self} is a {dim}"
            )));
        }
        Ok(self.value * scale)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.unit.is_empty() {
            write!(f, "{}", self.value)
        } else {
            write!(f, "{} {}", self.value, self.unit)
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (num, unit) = match s.find(char::is_whitespace) {
            Some(idx) => (&s[..idx], s[idx..].trim()),
            None => (s, ""),
        };
        let value: f64 = num
            .parse()
            .map_err(|_| Error::Input(format!("cannot parse quantity {s:?}")))?;
        let q = Quantity::new(value, unit);
        if q.unit_table().is_none() {
            return Err(Error::Input(format!("unknown unit {unit:?} in {s:?}")));
        }
        Ok(q)
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_converts() {
        let q: Quantity = "700 MHz".parse().unwrap();
        assert!((q.to_si(Dimension::Frequency).unwrap() - 2.0 * PI * 700e6).abs() < 1e-3);
        let a: Quantity = "2 cm^2".parse().unwrap();
        assert!((a.to_si(Dimension::Area).unwrap() - 2e-4).abs() < 1e-18);
        let d: Quantity = "1 ea0".parse().unwrap();
        assert!((d.to_si(Dimension::Dipole).unwrap() - 8.478_353_6e-30).abs() < 1e-36);
    }

    #[test]
    fn rejects_wrong_dimension_and_unknown_units() {
        let q: Quantity = "3 us".parse().unwrap();
        assert!(q.to_si(Dimension::Frequency).is_err());
        assert!("3 furlongs".parse::<Quantity>().is_err());
        assert!("MHz".parse::<Quantity>().is_err());
    }
}
