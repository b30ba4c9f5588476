use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "1.0.0";

/// Version string written into every JSON report.
pub fn report_schema_version() -> &'static str {
    SCHEMA_VERSION
}

/// One named quantity. `pass` is `None` for informational rows.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub paper_ref: String,
    pub value: Value,
    pub bound: Value,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub command: String,
    pub config: Value,
    pub results: Vec<CheckResult>,
}

fn json(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

impl Report {
    pub fn new(command: &str, config: impl Serialize) -> Self {
        Report { schema_version: SCHEMA_VERSION, command: command.into(), config: json(config), results: Vec::new() }
    }

    pub fn info(&mut self, name: &str, paper_ref: &str, value: impl Serialize) {
        self.results.push(CheckResult {
            name: name.into(),
            paper_ref: paper_ref.into(),
            value: json(value),
            bound: Value::Null,
            pass: None,
        });
    }

    /// A value with its reference level, not a pass/fail check.
    pub fn compare(&mut self, name: &str, paper_ref: &str, value: impl Serialize, bound: impl Serialize) {
        self.results.push(CheckResult {
            name: name.into(),
            paper_ref: paper_ref.into(),
            value: json(value),
            bound: json(bound),
            pass: None,
        });
    }

    pub fn check(&mut self, name: &str, paper_ref: &str, value: impl Serialize, bound: impl Serialize, pass: bool) {
        self.results.push(CheckResult {
            name: name.into(),
            paper_ref: paper_ref.into(),
            value: json(value),
            bound: json(bound),
            pass: Some(pass),
        });
    }

    /// No check failed.
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.pass != Some(false))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
