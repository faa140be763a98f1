//! Machine-readable verification reports (`"schema": "report/1"`).

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA: &str = "report/1";

/// Shortest-safe CSV rendering of a double: 17 significant digits, '.' decimal.
pub fn format_sig17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// One comparison of a computed number against a pinned threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub inputs: Value,
    pub statistic: f64,
    /// How `statistic` is compared with `threshold`, e.g. `"<="` or `">"`.
    pub comparison: String,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// Passes when `statistic <= threshold`.
    pub fn at_most(name: impl Into<String>, inputs: Value, statistic: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            inputs,
            statistic,
            comparison: "<=".into(),
            threshold,
            pass: statistic <= threshold,
        }
    }

    /// Passes when `statistic > threshold`.
    pub fn above(name: impl Into<String>, inputs: Value, statistic: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            inputs,
            statistic,
            comparison: ">".into(),
            threshold,
            pass: statistic > threshold,
        }
    }

    /// Passes when `statistic >= threshold`.
    pub fn at_least(
        name: impl Into<String>,
        inputs: Value,
        statistic: f64,
        threshold: f64,
    ) -> Self {
        Self {
            name: name.into(),
            inputs,
            statistic,
            comparison: ">=".into(),
            threshold,
            pass: statistic >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: String,
    pub tool_version: String,
    pub name: String,
    pub config: Value,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>, config: Value) -> Self {
        Self {
            schema: SCHEMA.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            name: name.into(),
            config,
            checks: Vec::new(),
            pass: true,
            wall_clock_seconds: None,
        }
    }

    pub fn push(&mut self, check: CheckRecord) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    /// Append every check of `other`, keeping the conjunction.
    pub fn absorb(&mut self, other: VerificationReport) {
        for c in other.checks {
            self.push(c);
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sig17_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 123_456.789, 0.0, f64::MIN_POSITIVE] {
            let s = format_sig17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            assert!(!s.contains(','));
        }
        assert_eq!(format_sig17(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn overall_pass_is_conjunction() {
        let mut r = VerificationReport::new("t", json!({}));
        assert!(r.pass);
        r.push(CheckRecord::at_most("a", json!({}), 1e-13, 1e-12));
        assert!(r.pass);
        r.push(CheckRecord::above("b", json!({}), -1.0, 0.0));
        assert!(!r.pass);
        assert_eq!(r.failures().count(), 1);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"schema\":\"report/1\""));
        assert!(!s.contains("wall_clock"));
        let back: VerificationReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
