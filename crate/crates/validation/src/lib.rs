//! Acceptance criteria for the integrators, each a list of pass/fail checks
//! with its tolerances fixed here.

pub mod criteria;
pub mod oracles;

use std::fmt;
use std::time::Duration;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub label: String,
    pub detail: String,
    pub pass: bool,
}

impl Check {
    pub fn new(label: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { label: label.into(), detail: detail.into(), pass }
    }

    /// `value <= limit`.
    pub fn at_most(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Check::new(label, value <= limit, format!("{value:.3e} <= {limit:.0e}"))
    }

    /// `|value - target| <= tol`.
    pub fn near(label: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Check::new(label, (value - target).abs() <= tol, format!("{value:.4} vs {target} +- {tol}"))
    }

    pub fn failed(label: impl Into<String>, error: impl fmt::Display) -> Self {
        Check::new(label, false, format!("error: {error}"))
    }
}

#[derive(Clone, Debug)]
pub struct Criterion {
    pub name: &'static str,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl Criterion {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ok = self.checks.iter().filter(|c| c.pass).count();
        write!(
            f,
            "{} {} ({}/{} checks, {:.1} s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            ok,
            self.checks.len(),
            self.elapsed.as_secs_f64()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_status() {
        let mut c = Criterion { name: "demo", checks: vec![], elapsed: Duration::ZERO };
        assert!(!c.passed());
        c.checks.push(Check::at_most("small", 1e-13, 1e-12));
        c.checks.push(Check::near("order", 8.2, 8.0, 0.5));
        assert!(c.passed());
        assert!(c.to_string().starts_with("PASS demo (2/2 checks"));
        c.checks.push(Check::at_most("large", 2e-12, 1e-12));
        assert!(!c.passed());
        assert_eq!(c.failures().count(), 1);
        assert!(c.to_string().starts_with("FAIL demo (2/3 checks"));
    }
}
