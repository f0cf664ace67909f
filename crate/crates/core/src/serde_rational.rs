//! Rationals in JSON: accepts `"-3/2"`, `"2"` or a bare integer; writes strings.

use serde::{de, Deserialize, Deserializer, Serializer};

use crate::scalar::{fmt_rational, parse_rational, Rational};

pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_rational(r))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Str(String),
    }
    match Raw::deserialize(d)? {
        Raw::Int(n) => Ok(Rational::from_integer(n as i128)),
        Raw::Str(s) => parse_rational(&s).map_err(de::Error::custom),
    }
}
