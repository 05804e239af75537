//! Ordered key/value reports written as `key=value` lines and as JSON.

use serde::ser::{Serialize, SerializeMap, Serializer};
use serde_json::Value;

#[derive(Debug, Default, Clone)]
pub struct Report {
    entries: Vec<(String, Value)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.entries.push((key.to_string(), value.into()));
        self
    }

    /// Floats go in as JSON numbers (`null` when not finite) and print in
    /// exponent form in the text variant.
    pub fn put_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.put(key, value)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let shown = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) if n.is_f64() => format!("{:e}", n.as_f64().unwrap()),
                Value::Null => "inf".to_string(),
                other => other.to_string(),
            };
            out.push_str(&format!("{k}={shown}\n"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

impl Serialize for Report {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (k, v) in &self.entries {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_insertion_order_in_both_forms() {
        let mut r = Report::new();
        r.put("z", "last").put("a", 3u64).put_f64("err", 2.5e-3);
        assert_eq!(r.to_text(), "z=last\na=3\nerr=2.5e-3\n");
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["err"], 2.5e-3);
        assert!(r.to_json().find("\"z\"").unwrap() < r.to_json().find("\"a\"").unwrap());
    }

    #[test]
    fn infinite_values_become_null() {
        let mut r = Report::new();
        r.put_f64("x", f64::INFINITY);
        assert_eq!(r.to_text(), "x=inf\n");
        assert!(r.to_json().contains("null"));
    }
}
