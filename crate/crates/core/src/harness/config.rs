//! Experiment configuration: JSON in, validated structs out. Unknown keys
//! are rejected so a typo never silently runs the default.

use crate::error::{Error, Result};
use crate::gff::ModelParams;
use crate::lattice::LatticeShape;
use crate::mcmc::McmcSchedule;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

/// A scaling experiment: one chain per (N, replica), one fit at the end.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Lattice half-widths to sweep; at least 3, all distinct, all >= 2.
    pub n_values: Vec<usize>,
    pub dim: usize,
    pub range_dim: usize,
    pub beta: f64,
    pub gamma: f64,
    /// Independent chains per N, at least 2.
    pub replicas: usize,
    pub master_seed: u64,
    /// Log-correction exponent handed to the scaling fit.
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub schedule: McmcSchedule,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let distinct: HashSet<usize> = self.n_values.iter().copied().collect();
        if distinct.len() < 3 || distinct.len() != self.n_values.len() {
            return Err(Error::usage(
                "n_values must hold at least 3 distinct lattice half-widths",
            ));
        }
        if self.n_values.iter().any(|&n| n < 2) {
            return Err(Error::usage(
                "lattice half-widths must be >= 2 for the log-log fit",
            ));
        }
        if self.replicas < 2 {
            return Err(Error::usage(
                "need at least 2 replicas per N for a standard error",
            ));
        }
        self.schedule.validate()?;
        let records = (self.schedule.n_sweeps - self.schedule.burn_in) / self.schedule.thinning;
        if records < 10 {
            return Err(Error::usage(format!(
                "schedule yields only {records} records per chain; diagnostics need >= 10"
            )));
        }
        for &n in &self.n_values {
            self.params_for(n)?.validate()?;
        }
        Ok(())
    }

    pub fn params_for(&self, n: usize) -> Result<ModelParams<f64>> {
        let shape = LatticeShape::new(n, self.dim)?;
        ModelParams::new(shape, self.range_dim, self.beta, self.gamma)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::usage(format!("bad config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Config for one chain (the `mcmc` subcommand).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChainRunConfig {
    pub n: usize,
    pub dim: usize,
    pub range_dim: usize,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub schedule: McmcSchedule,
}

impl ChainRunConfig {
    pub fn params(&self) -> Result<ModelParams<f64>> {
        let shape = LatticeShape::new(self.n, self.dim)?;
        ModelParams::new(shape, self.range_dim, self.beta, self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?.validate()?;
        self.schedule.validate()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ChainRunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::usage(format!("bad config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            n_values: vec![2, 3, 4],
            dim: 2,
            range_dim: 1,
            beta: 1.0,
            gamma: 0.5,
            replicas: 2,
            master_seed: 7,
            rho: 0.0,
            schedule: McmcSchedule::default(),
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = sample();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value = serde_json::to_value(sample()).unwrap();
        v["surprise"] = 1.into();
        let res: std::result::Result<ExperimentConfig, _> =
            serde_json::from_value(v);
        assert!(res.is_err());
    }

    #[test]
    fn validation_catches_bad_grids() {
        let mut cfg = sample();
        cfg.n_values = vec![2, 3];
        assert!(matches!(cfg.validate(), Err(Error::Usage(_))));
        let mut cfg = sample();
        cfg.n_values = vec![2, 3, 3];
        assert!(matches!(cfg.validate(), Err(Error::Usage(_))));
        let mut cfg = sample();
        cfg.n_values = vec![1, 2, 3];
        assert!(matches!(cfg.validate(), Err(Error::Usage(_))));
        let mut cfg = sample();
        cfg.replicas = 1;
        assert!(matches!(cfg.validate(), Err(Error::Usage(_))));
        let mut cfg = sample();
        cfg.schedule.n_sweeps = 120;
        cfg.schedule.burn_in = 100;
        cfg.schedule.thinning = 10;
        assert!(matches!(cfg.validate(), Err(Error::Usage(_))));
        assert!(sample().validate().is_ok());
    }
}
