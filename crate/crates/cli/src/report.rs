//! Machine-readable verification reports.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// How a measured value is compared with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Below,
    Equal,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckGroup {
    pub name: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub package: &'static str,
    pub version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub threads: usize,
    pub debug_build: bool,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            threads: rayon::current_num_threads(),
            debug_build: cfg!(debug_assertions),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub config: Value,
    pub environment: Environment,
    /// Computed quantities that are not pass/fail checks.
    pub results: serde_json::Map<String, Value>,
    pub groups: Vec<CheckGroup>,
    pub pass: bool,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.canonical_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Report {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.into(),
            config_hash: config_hash(cfg),
            config: serde_json::to_value(cfg).expect("configuration serializes"),
            environment: Environment::current(),
            results: serde_json::Map::new(),
            groups: Vec::new(),
            pass: true,
        }
    }

    pub fn result<T: Serialize>(&mut self, key: &str, value: &T) {
        self.results.insert(key.into(), serde_json::to_value(value).expect("result serializes"));
    }

    pub fn group(&mut self, name: &str) -> GroupBuilder<'_> {
        GroupBuilder { report: self, group: CheckGroup { name: name.into(), checks: Vec::new(), pass: true } }
    }

    /// Names of failed checks as `group.check`.
    pub fn failures(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| g.checks.iter().filter(|c| !c.pass).map(move |c| format!("{}.{}", g.name, c.name)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub struct GroupBuilder<'a> {
    report: &'a mut Report,
    group: CheckGroup,
}

impl GroupBuilder<'_> {
    fn push(&mut self, name: &str, value: f64, tolerance: f64, bound: Bound) -> &mut Self {
        let pass = match bound {
            Bound::Below => value < tolerance,
            Bound::Equal => value == tolerance,
        };
        assert!(!self.group.checks.iter().any(|c| c.name == name), "duplicate check {name}");
        self.group.checks.push(Check { name: name.into(), value, tolerance, bound, pass });
        self
    }

    /// Passes when `value < tolerance` (NaN fails).
    pub fn below(&mut self, name: &str, value: f64, tolerance: f64) -> &mut Self {
        self.push(name, value, tolerance, Bound::Below)
    }

    pub fn equal(&mut self, name: &str, value: f64, expected: f64) -> &mut Self {
        self.push(name, value, expected, Bound::Equal)
    }
}

impl Drop for GroupBuilder<'_> {
    fn drop(&mut self) {
        let mut g = std::mem::replace(&mut self.group, CheckGroup { name: String::new(), checks: Vec::new(), pass: true });
        g.pass = g.checks.iter().all(|c| c.pass);
        self.report.pass &= g.pass;
        self.report.groups.push(g);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_pass_is_conjunction() {
        let cfg = RunConfig::default();
        let mut r = Report::new("verify", &cfg);
        r.group("a").below("x", 1e-10, 1e-9).equal("y", 2.0, 2.0);
        assert!(r.pass);
        r.group("b").below("z", f64::NAN, 1.0);
        assert!(!r.pass);
        assert_eq!(r.failures(), vec!["b.z".to_string()]);
        assert_eq!(r.config_hash.len(), 64);
    }

    #[test]
    #[should_panic(expected = "duplicate")]
    fn checks_are_unique_within_a_group() {
        let cfg = RunConfig::default();
        let mut r = Report::new("verify", &cfg);
        r.group("a").below("x", 0.0, 1.0).below("x", 0.0, 1.0);
    }
}
