//! Finite monoids, their products, and actions on finite sets, with
//! exhaustive law checks.
//!
//! Every check here is exact integer enumeration: a [`LawReport`] counts
//! violating tuples and keeps the first one found as a witness.

mod action;
mod monoid;
pub mod text;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use action::{restricted_image_size, verify_decomposition, ActionProperties, FiniteAction};
pub use monoid::{closure_from_generators, ElemId, GeneratorSet, MonoidTable, PowerRelation};

/// Structural problems with a table or action, as opposed to law violations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("monoid must have at least one element")]
    Empty,
    #[error("{what} {value} out of range (bound {bound})")]
    OutOfRange { what: &'static str, value: usize, bound: usize },
    #[error("row {row} has length {len}, expected {expected}")]
    RowLength { row: usize, len: usize, expected: usize },
    #[error("action has {got} maps, monoid has {expected} elements")]
    MapCount { got: usize, expected: usize },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Outcome of checking one law over a finite domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub law: String,
    pub violations: usize,
    /// First violating tuple in enumeration order.
    pub witness: Option<Vec<usize>>,
    pub max_residual: f64,
}

impl LawReport {
    pub fn new(law: impl Into<String>) -> Self {
        Self { law: law.into(), violations: 0, witness: None, max_residual: 0.0 }
    }

    pub fn record(&mut self, witness: Vec<usize>) {
        self.record_residual(witness, 1.0);
    }

    pub fn record_residual(&mut self, witness: Vec<usize>, residual: f64) {
        self.violations += 1;
        if self.witness.is_none() {
            self.witness = Some(witness);
        }
        self.max_residual = self.max_residual.max(residual);
    }

    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for LawReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.holds() {
            write!(f, "{:<40} ok", self.law)
        } else {
            write!(f, "{:<40} FAIL {} violation(s), witness {:?}", self.law, self.violations, self.witness.as_deref().unwrap_or(&[]))
        }
    }
}

/// A bundle of law reports from one check.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub reports: Vec<LawReport>,
}

impl Verification {
    pub fn new(reports: Vec<LawReport>) -> Self {
        Self { reports }
    }

    pub fn is_exact(&self) -> bool {
        self.reports.iter().all(LawReport::holds)
    }

    pub fn total_violations(&self) -> usize {
        self.reports.iter().map(|r| r.violations).sum()
    }

    pub fn get(&self, law: &str) -> Option<&LawReport> {
        self.reports.iter().find(|r| r.law == law)
    }

    pub fn extend(&mut self, other: Verification) {
        self.reports.extend(other.reports);
    }

    /// Prefix every law name, e.g. with the factor it was checked on.
    pub fn scoped(mut self, scope: &str) -> Self {
        for r in &mut self.reports {
            r.law = format!("{scope}: {}", r.law);
        }
        self
    }
}

impl fmt::Display for Verification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.reports {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}
