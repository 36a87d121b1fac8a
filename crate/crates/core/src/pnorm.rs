//! Serde helpers for norm exponents, which may be infinite. JSON has no
//! infinity literal, so `∞` is written as the string `"inf"`.

use serde::{Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(p: &f64, s: S) -> Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Num(f64),
    Text(String),
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(v),
        Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
        Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
    }
}
