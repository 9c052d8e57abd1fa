//! Physical quantities written as `"<number> <unit>"` strings.
//!
//! Every quantity is stored in its canonical unit and serialized with that
//! unit, so `parse(format(q)) == q` holds bit for bit.

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// Dimension of a configurable value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitKind {
    Dimensionless,
    Frequency,
    DeviceFrequency,
    Time,
    Rate,
    Voltage,
    RabiScale,
    PerVolt,
    PerMillivoltMicrosecond,
}

impl UnitKind {
    pub fn canonical(self) -> &'static str {
        match self {
            UnitKind::Dimensionless => "",
            UnitKind::Frequency => "MHz",
            UnitKind::DeviceFrequency => "GHz",
            UnitKind::Time => "us",
            UnitKind::Rate => "/us",
            UnitKind::Voltage => "V",
            UnitKind::RabiScale => "GHz/V",
            UnitKind::PerVolt => "/V",
            UnitKind::PerMillivoltMicrosecond => "/(mV us)",
        }
    }

    /// Scale factor from `suffix` to the canonical unit.
    pub fn factor(self, suffix: &str) -> Option<f64> {
        let s = suffix.trim();
        let f = match self {
            UnitKind::Dimensionless => match s {
                "" => 1.0,
                _ => return None,
            },
            UnitKind::Frequency => match s {
                "Hz" => 1e-6,
                "kHz" => 1e-3,
                "MHz" => 1.0,
                "GHz" => 1e3,
                _ => return None,
            },
            UnitKind::DeviceFrequency => match s {
                "MHz" => 1e-3,
                "GHz" => 1.0,
                _ => return None,
            },
            UnitKind::Time => match s {
                "ns" => 1e-3,
                "us" => 1.0,
                "ms" => 1e3,
                "s" => 1e6,
                _ => return None,
            },
            UnitKind::Rate => match s {
                "/ns" | "ns^-1" => 1e3,
                "/us" | "us^-1" => 1.0,
                "/ms" | "ms^-1" => 1e-3,
                "/s" | "s^-1" => 1e-6,
                _ => return None,
            },
            UnitKind::Voltage => match s {
                "uV" => 1e-6,
                "mV" => 1e-3,
                "V" => 1.0,
                _ => return None,
            },
            UnitKind::RabiScale => match s {
                "MHz/V" => 1e-3,
                "GHz/V" => 1.0,
                "MHz/mV" => 1.0,
                _ => return None,
            },
            UnitKind::PerVolt => match s {
                "/V" | "V^-1" => 1.0,
                "/mV" | "mV^-1" => 1e3,
                _ => return None,
            },
            UnitKind::PerMillivoltMicrosecond => match s {
                "/(mV us)" => 1.0,
                _ => return None,
            },
        };
        Some(f)
    }

    /// Parses `"<number> <unit>"` into the canonical unit.
    pub fn parse(self, text: &str) -> Result<f64, String> {
        let text = text.trim();
        let (num, unit) = split_number(text);
        let value: f64 = num.parse().map_err(|_| format!("`{text}`: `{num}` is not a number"))?;
        if unit.is_empty() && self != UnitKind::Dimensionless {
            return Err(format!("`{text}` needs a unit suffix, e.g. `{value} {}`", self.canonical()));
        }
        let f = self.factor(unit).ok_or_else(|| format!("`{text}`: unit `{unit}` is not a {self:?} unit (canonical `{}`)", self.canonical()))?;
        if !value.is_finite() {
            return Err(format!("`{text}` is not finite"));
        }
        Ok(if f == 1.0 { value } else { value * f })
    }

    pub fn format(self, value: f64) -> String {
        match self {
            UnitKind::Dimensionless => format!("{value}"),
            _ => format!("{value} {}", self.canonical()),
        }
    }
}

fn split_number(text: &str) -> (&str, &str) {
    if let Some((a, b)) = text.split_once(char::is_whitespace) {
        return (a, b.trim());
    }
    let end = text.find(|c: char| !(c.is_ascii_digit() || "+-.eE".contains(c))).unwrap_or(text.len());
    // Do not split inside "inf" / "NaN"; those are rejected by the parse.
    (&text[..end], &text[end..])
}

macro_rules! quantity {
    ($(#[$doc:meta])* $name:ident, $kind:expr) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
        pub struct $name(pub f64);

        impl $name {
            pub const KIND: UnitKind = $kind;

            pub fn value(self) -> f64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&Self::KIND.format(self.0))
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                Self::KIND.parse(s).map($name)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(de::Error::custom)
            }
        }
    };
}

quantity!(
    /// MHz.
    Frequency,
    UnitKind::Frequency
);
quantity!(
    /// GHz.
    DeviceFrequency,
    UnitKind::DeviceFrequency
);
quantity!(
    /// us.
    Time,
    UnitKind::Time
);
quantity!(
    /// 1/us.
    Rate,
    UnitKind::Rate
);
quantity!(
    /// V.
    Voltage,
    UnitKind::Voltage
);
quantity!(
    /// GHz/V.
    RabiScale,
    UnitKind::RabiScale
);
quantity!(
    /// 1/V.
    PerVolt,
    UnitKind::PerVolt
);
quantity!(
    /// 1/(mV us).
    PerMillivoltMicrosecond,
    UnitKind::PerMillivoltMicrosecond
);
