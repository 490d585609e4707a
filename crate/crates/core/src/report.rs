//! Serializable records for CLI artifacts and property suites.

use serde::Serialize;

/// One exported norm or modular value.
#[derive(Debug, Clone, Serialize)]
pub struct NormRecord {
    pub quantity: String,
    pub value: f64,
    pub grid_h: f64,
    pub quad_error_estimate: f64,
}

/// One property of the invariant suite, evaluated over random trials.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// Smallest signed slack observed; negative values beyond tolerance
    /// count as failures.
    pub worst_margin: f64,
    pub note: String,
}

/// Full property-suite report.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub seed: u64,
    pub trials: usize,
    pub properties: Vec<PropertyResult>,
}

impl PropertyReport {
    pub fn failures(&self) -> usize {
        self.properties.iter().map(|p| p.failures).sum()
    }
}
