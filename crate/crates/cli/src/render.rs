//! Canonical report output: sorted keys, 12 significant digits, no timestamps.

use serde::{Serialize, Serializer};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// A float as it appears in reports: rounded to twelve significant digits;
/// non-finite values are written as strings (`"inf"`, `"-inf"`, `"nan"`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_nan() {
            s.serialize_str("nan")
        } else if x.is_infinite() {
            s.serialize_str(if x > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(round_significant(x))
        }
    }
}

impl From<f64> for Num {
    fn from(x: f64) -> Self {
        Num(x)
    }
}

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let x = self.0;
        if x.is_infinite() {
            return f.write_str(if x > 0.0 { "inf" } else { "-inf" });
        }
        if x.is_nan() {
            return f.write_str("nan");
        }
        let r = round_significant(x);
        if r != 0.0 && (r.abs() >= 1e9 || r.abs() < 1e-4) {
            write!(f, "{r:e}")
        } else {
            write!(f, "{r}")
        }
    }
}

/// Pretty JSON with keys in sorted order.
pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    // `serde_json::Value` keeps object keys in a BTreeMap, so the round trip sorts them.
    let tree = serde_json::to_value(value)?;
    let mut out = serde_json::to_string_pretty(&tree)?;
    out.push('\n');
    Ok(out)
}

pub fn header_line() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or_default();
    format!("# advcal {} report, generated at unix time {secs}", env!("CARGO_PKG_VERSION"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(round_significant(0.538_996_500_732_687), 0.538_996_500_733);
        assert_eq!(round_significant(1_855.299_614_451_385), 1_855.299_614_45);
        assert_eq!(round_significant(0.0), 0.0);
        assert_eq!(round_significant(1e-300), 1e-300);
    }

    #[test]
    fn non_finite_values_are_strings() {
        assert_eq!(serde_json::to_string(&Num(f64::INFINITY)).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&Num(f64::NEG_INFINITY)).unwrap(), "\"-inf\"");
        assert_eq!(serde_json::to_string(&Num(0.1 + 0.2)).unwrap(), "0.3");
    }

    #[test]
    fn keys_are_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        let out = to_canonical_json(&S { zeta: 1, alpha: 2 }).unwrap();
        assert!(out.find("alpha").unwrap() < out.find("zeta").unwrap());
    }
}
