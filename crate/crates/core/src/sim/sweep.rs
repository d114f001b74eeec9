use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, ScenarioConfig};
use super::run::{run_config, RunOptions, RunResult};
use crate::protocol::Variant;

/// Cross product swept by `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub variants: Vec<Variant>,
    pub malicious_fractions: Vec<f64>,
    pub file_bits: Vec<u64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            variants: vec![Variant::D2d, Variant::Sd2d, Variant::Std2d],
            malicious_fractions: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            file_bits: vec![500_000],
            seeds: (1..=10).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub variant: Variant,
    pub malicious_fraction: f64,
    pub file_bits: u64,
    pub seed: u64,
}

impl SweepPoint {
    pub fn apply(&self, base: &ScenarioConfig) -> ScenarioConfig {
        ScenarioConfig {
            variant: self.variant,
            malicious_fraction: self.malicious_fraction,
            file_bits: self.file_bits,
            seed: self.seed,
            ..base.clone()
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let empty = |field: &str| ConfigError::new(field, "must not be empty");
        if self.variants.is_empty() {
            return Err(empty("sweep.variants"));
        }
        if self.malicious_fractions.is_empty() {
            return Err(empty("sweep.malicious_fractions"));
        }
        if self.file_bits.is_empty() {
            return Err(empty("sweep.file_bits"));
        }
        if self.seeds.is_empty() {
            return Err(empty("sweep.seeds"));
        }
        if let Some(f) = self.malicious_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(ConfigError::new(
                "sweep.malicious_fractions",
                format!("must lie in [0, 1], got {f}"),
            ));
        }
        Ok(())
    }

    /// Points ordered by file size, fraction, variant, then seed.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &file_bits in &self.file_bits {
            for &malicious_fraction in &self.malicious_fractions {
                for &variant in &self.variants {
                    for &seed in &self.seeds {
                        out.push(SweepPoint {
                            variant,
                            malicious_fraction,
                            file_bits,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SweepFailure {
    pub point: SweepPoint,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub results: Vec<RunResult>,
    pub failures: Vec<SweepFailure>,
}

/// Runs every grid point. Output order is the grid order whatever the
/// parallelism; failing points are collected, not fatal.
pub fn sweep(base: &ScenarioConfig, grid: &SweepGrid, parallel: bool) -> SweepOutcome {
    let points = grid.points();
    let one = |p: &SweepPoint| {
        run_config(&p.apply(base), RunOptions::default()).map_err(|e| SweepFailure {
            point: *p,
            error: e.to_string(),
        })
    };
    let runs: Vec<Result<RunResult, SweepFailure>> = if parallel {
        points.par_iter().map(one).collect()
    } else {
        points.iter().map(one).collect()
    };
    let mut outcome = SweepOutcome::default();
    for r in runs {
        match r {
            Ok(res) => outcome.results.push(res),
            Err(f) => outcome.failures.push(f),
        }
    }
    outcome
}
