//! Run reports. Every computed number is emitted as `{"value", "tolerance"}`;
//! a tolerance of zero marks an exact formula evaluation or a count.

use lindode::C64;
use serde::Serialize;
use serde_json::{json, Map, Value};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub command: String,
    pub inputs: Map<String, Value>,
    pub results: Map<String, Value>,
    pub assertions: Vec<Assertion>,
    pub notes: Vec<String>,
    pub error: Option<String>,
    /// Plot-ready table for `--format csv`, when the command has one.
    pub csv: Option<String>,
}

pub fn measured(value: impl Serialize, tolerance: f64) -> Value {
    json!({ "value": value, "tolerance": tolerance })
}

pub fn pairs(v: &[C64]) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect())
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn input(&mut self, key: &str, value: impl Serialize) {
        self.inputs.insert(key.to_string(), json!(value));
    }

    pub fn result(&mut self, key: &str, value: impl Serialize, tolerance: f64) {
        self.results.insert(key.to_string(), measured(value, tolerance));
    }

    /// Inserts a pre-built value, for nested tables whose leaves carry their
    /// own tolerances.
    pub fn result_raw(&mut self, key: &str, value: Value) {
        self.results.insert(key.to_string(), value);
    }

    pub fn check(&mut self, name: &str, value: f64, tolerance: f64, pass: bool) {
        self.assertions.push(Assertion {
            name: name.to_string(),
            value,
            tolerance,
            pass,
        });
    }

    /// Passes when `value ≤ tolerance`; NaN fails.
    pub fn check_le(&mut self, name: &str, value: f64, tolerance: f64) {
        self.check(name, value, tolerance, value <= tolerance);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.assertions.iter().all(|a| a.pass)
    }

    pub fn to_json(&self) -> String {
        let status = if self.passed() { "ok" } else { "assertion_failed" };
        let doc = json!({
            "command": self.command,
            "status": status,
            "inputs": self.inputs,
            "results": self.results,
            "assertions": self.assertions,
            "notes": self.notes,
            "error": self.error,
        });
        let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_follows_assertions() {
        let mut r = Report::new("x");
        r.check_le("small", 1e-9, 1e-8);
        assert!(r.passed());
        assert!(r.to_json().contains("\"status\": \"ok\""));
        r.check_le("nan", f64::NAN, 1.0);
        assert!(!r.passed());
        assert!(r.to_json().contains("assertion_failed"));
    }

    #[test]
    fn numbers_carry_tolerances() {
        let mut r = Report::new("x");
        r.result("eta", 0.5, 1e-7);
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["results"]["eta"]["value"], 0.5);
        assert_eq!(v["results"]["eta"]["tolerance"], 1e-7);
    }

    #[test]
    fn pairs_are_re_im() {
        assert_eq!(pairs(&[C64::new(1.0, -2.0)]), json!([[1.0, -2.0]]));
    }
}
