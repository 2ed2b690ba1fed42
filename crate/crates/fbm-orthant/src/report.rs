//! Self-contained run reports: everything needed to reproduce a result
//! (config, seeds, versions) together with the numbers themselves.

use crate::constants::AsymptoticResult;
use crate::critical::CriticalPoint;
use crate::model::ModelSpec;
use crate::montecarlo::{ComparisonTable, McEstimate};
use crate::pickands::PickandsEstimate;
use serde::Serialize;
use std::time::Instant;

/// A complete machine-readable record of one tool invocation. Every
/// numeric field is reproducible from `(config, seed, version)`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    /// Subcommand that produced this report.
    pub command: String,
    /// Echo of the validated model configuration.
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads the run was capped to (0 = library default).
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical: Option<CriticalPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotics: Option<AsymptoticResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pickands: Option<PickandsEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<McEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonTable>,
    pub wall_clock_ms: u64,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, model: &ModelSpec) -> Self {
        let config = serde_json::from_str(&model.to_json())
            .expect("model config round-trips through JSON");
        RunReport {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            seed: None,
            threads: 0,
            critical: None,
            asymptotics: None,
            pickands: None,
            estimate: None,
            comparison: None,
            wall_clock_ms: 0,
            warnings: Vec::new(),
        }
    }

    /// Records elapsed wall-clock time since `start`.
    pub fn finish_timing(&mut self, start: Instant) {
        self.wall_clock_ms = start.elapsed().as_millis() as u64;
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::find_t0;
    use crate::scenarios::scalar_fractional;

    #[test]
    fn report_serializes_with_expected_keys() {
        let model = scalar_fractional(0.25).unwrap();
        let mut report = RunReport::new("analyze", &model);
        report.seed = Some(42);
        report.critical = Some(find_t0(&model).unwrap());
        report.warn("example warning");
        let start = Instant::now();
        report.finish_timing(start);
        let value: serde_json::Value =
            serde_json::from_str(&report.to_json_pretty()).unwrap();
        assert_eq!(value["command"], "analyze");
        assert_eq!(value["seed"], 42);
        assert_eq!(value["config"]["H"], 0.25);
        assert!(value["critical"]["t0"].is_number());
        assert!(value["version"].as_str().is_some_and(|v| !v.is_empty()));
        assert_eq!(value["warnings"][0], "example warning");
        // optional sections absent rather than null
        assert!(value.get("estimate").is_none());
        assert!(value.get("pickands").is_none());
    }
}
