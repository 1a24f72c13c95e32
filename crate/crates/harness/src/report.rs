use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// How a gate compares its statistic to the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `value <= threshold`.
    AtMost,
    /// `value >= threshold`.
    AtLeast,
    /// `|value| <= threshold`.
    AbsAtMost,
    /// `value >= threshold`, otherwise inconclusive rather than failed.
    Floor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub verdict: Verdict,
}

impl Gate {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let ok = match relation {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast | Relation::Floor => value >= threshold,
            Relation::AbsAtMost => value.abs() <= threshold,
        };
        let verdict = match (ok, relation) {
            (true, _) => Verdict::Pass,
            (false, Relation::Floor) => Verdict::Inconclusive,
            (false, _) => Verdict::Fail,
        };
        Self { name: name.into(), value, relation, threshold, verdict }
    }

    pub fn line(&self) -> String {
        let op = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast | Relation::Floor => ">=",
            Relation::AbsAtMost => "|.|<=",
        };
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        format!("{tag} {}: {:.6e} {op} {:.6e}", self.name, self.value, self.threshold)
    }
}

/// Everything an experiment measured; the verdict follows from the gates alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub statistics: BTreeMap<String, serde_json::Value>,
    pub gates: Vec<Gate>,
    pub notes: Vec<String>,
    pub verdict: Verdict,
}

impl ExperimentReport {
    pub fn new(experiment: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.into(),
            seed,
            config,
            statistics: BTreeMap::new(),
            gates: Vec::new(),
            notes: Vec::new(),
            verdict: Verdict::Pass,
        }
    }

    pub fn stat(&mut self, key: impl Into<String>, value: impl Serialize) {
        self.statistics.insert(key.into(), serde_json::to_value(value).expect("serializable statistic"));
    }

    pub fn gate(&mut self, gate: Gate) {
        self.gates.push(gate);
        self.verdict = verdict_of(&self.gates);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Fail if any gate fails, inconclusive if some gate is inconclusive, pass otherwise.
pub fn verdict_of(gates: &[Gate]) -> Verdict {
    if gates.iter().any(|g| g.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if gates.iter().any(|g| g.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_follow_gates() {
        assert_eq!(Gate::new("a", 1.0, Relation::AtMost, 2.0).verdict, Verdict::Pass);
        assert_eq!(Gate::new("a", -3.0, Relation::AbsAtMost, 2.0).verdict, Verdict::Fail);
        assert_eq!(Gate::new("a", 1.0, Relation::Floor, 2.0).verdict, Verdict::Inconclusive);
        assert_eq!(Gate::new("a", f64::NAN, Relation::AtLeast, 2.0).verdict, Verdict::Fail);
        let mut r = ExperimentReport::new("x", 1, serde_json::Value::Null);
        r.gate(Gate::new("a", 1.0, Relation::Floor, 2.0));
        assert_eq!(r.verdict, Verdict::Inconclusive);
        r.gate(Gate::new("b", 3.0, Relation::AtMost, 2.0));
        assert_eq!(r.verdict, Verdict::Fail);
        let back: ExperimentReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
