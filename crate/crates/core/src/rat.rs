//! Serde helpers that write rationals as `"n"` or `"n/d"` strings.

use rug::Rational;
use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
    let s = String::deserialize(d)?;
    parse(&s).map_err(D::Error::custom)
}

/// Parses `"n"` or `"n/d"` with a nonzero denominator.
pub fn parse(s: &str) -> Result<Rational, String> {
    let t = s.trim();
    let r = match t.split_once('/') {
        Some((n, d)) => {
            let n: rug::Integer = n.trim().parse().map_err(|_| format!("bad rational `{s}`"))?;
            let d: rug::Integer = d.trim().parse().map_err(|_| format!("bad rational `{s}`"))?;
            if d == 0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            Rational::from((n, d))
        }
        None => Rational::from(t.parse::<rug::Integer>().map_err(|_| format!("bad rational `{s}`"))?),
    };
    Ok(r)
}
