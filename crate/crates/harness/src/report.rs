use std::collections::BTreeMap;

use serde::Serialize;

use crate::output::fmt_f64;

/// How the measured value is compared with the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
    #[serde(rename = "<")]
    Below,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
            Relation::Below => "<",
        }
    }

    fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Relation::AtMost => measured <= threshold,
            Relation::AtLeast => measured >= threshold,
            Relation::Above => measured > threshold,
            Relation::Below => measured < threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// NaN (serialized as null) when the computation itself failed.
    pub measured: f64,
    pub threshold: f64,
    pub relation: Relation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn compare(name: impl Into<String>, measured: f64, relation: Relation, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: relation.holds(measured, threshold),
            measured,
            threshold,
            relation,
            detail: None,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::compare(name, measured, Relation::AtMost, threshold)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::compare(name, measured, Relation::AtLeast, threshold)
    }

    /// A check whose computation raised an error.
    pub fn errored(name: impl Into<String>, threshold: f64, relation: Relation, err: impl std::fmt::Display) -> Self {
        Self {
            name: name.into(),
            passed: false,
            measured: f64::NAN,
            threshold,
            relation,
            detail: Some(err.to_string()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn line(&self) -> String {
        let mut s = format!(
            "{} {}: measured {} {} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            fmt_f64(self.measured),
            self.relation.symbol(),
            fmt_f64(self.threshold)
        );
        if let Some(d) = &self.detail {
            s.push_str(&format!(" ({d})"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Flat configuration echo.
    pub config: BTreeMap<String, String>,
    pub wall_time_s: f64,
    pub checks: Vec<Check>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks.iter().map(Check::line).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }
}
