//! Named residual reports shared by every verification routine.
//!
//! A report maps relation names to a residual (sup over the grid of an
//! operator norm, or 0.0 for relations checked in exact arithmetic), the
//! tolerance it was judged against, and the grid point where the worst
//! fibre occurred.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationEntry {
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub worst_fibre_t: Option<f64>,
    /// Per-grid-point residual curve, kept out of the JSON report; the CLI
    /// exports it as CSV on request.
    #[serde(skip)]
    pub curve: Option<Vec<(f64, f64)>>,
}

impl RelationEntry {
    pub fn new(residual: f64, tolerance: f64, worst_fibre_t: Option<f64>) -> Self {
        RelationEntry {
            residual,
            tolerance,
            pass: residual <= tolerance,
            worst_fibre_t,
            curve: None,
        }
    }

    pub fn with_curve(mut self, curve: Vec<(f64, f64)>) -> Self {
        self.curve = Some(curve);
        self
    }

    /// Entry for a relation decided in exact rational arithmetic: the
    /// residual is 0 on pass, and a floating-point estimate on failure.
    pub fn exact(pass: bool, residual_estimate: f64, worst_fibre_t: Option<f64>) -> Self {
        RelationEntry {
            residual: if pass { 0.0 } else { residual_estimate },
            tolerance: 0.0,
            pass,
            worst_fibre_t,
            curve: None,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationReport {
    pub entries: BTreeMap<String, RelationEntry>,
}

impl RelationReport {
    pub fn new() -> Self {
        RelationReport::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, entry: RelationEntry) {
        self.entries.insert(name.into(), entry);
    }

    pub fn insert_residual(
        &mut self,
        name: impl Into<String>,
        residual: f64,
        tolerance: f64,
        worst_fibre_t: Option<f64>,
    ) {
        self.insert(name, RelationEntry::new(residual, tolerance, worst_fibre_t));
    }

    pub fn entry(&self, name: &str) -> Option<&RelationEntry> {
        self.entries.get(name)
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.entries.get(name).map(|e| e.residual)
    }

    pub fn all_pass(&self) -> bool {
        self.entries.values().all(|e| e.pass)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(_, e)| !e.pass)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Largest residual in the report, with its relation name.
    pub fn worst(&self) -> Option<(&str, f64)> {
        self.entries
            .iter()
            .map(|(k, e)| (k.as_str(), e.residual))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Absorb `other`, prefixing each relation name with `prefix.`.
    pub fn merge(&mut self, prefix: &str, other: RelationReport) {
        for (k, v) in other.entries {
            self.entries.insert(format!("{prefix}.{k}"), v);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
