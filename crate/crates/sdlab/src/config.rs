//! Experiment configuration files: one JSON object per experiment.

use std::path::{Path, PathBuf};

use sdlab_core::{Scheme, UStar};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Convergence,
    Nonuniqueness,
    PinningEquivalence,
    Oscillation,
    EnergyStability,
    DriftNorms,
    EpsilonContinuation,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Convergence,
        Suite::Nonuniqueness,
        Suite::PinningEquivalence,
        Suite::Oscillation,
        Suite::EnergyStability,
        Suite::DriftNorms,
        Suite::EpsilonContinuation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Convergence => "convergence",
            Suite::Nonuniqueness => "nonuniqueness",
            Suite::PinningEquivalence => "pinning_equivalence",
            Suite::Oscillation => "oscillation",
            Suite::EnergyStability => "energy_stability",
            Suite::DriftNorms => "drift_norms",
            Suite::EpsilonContinuation => "epsilon_continuation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSize {
    pub n_r: usize,
    pub n_theta: usize,
}

impl GridSize {
    pub fn new(n_r: usize, n_theta: usize) -> Self {
        Self { n_r, n_theta }
    }

    /// `(n, 2n)` for each `n`.
    pub fn doubling(ns: &[usize]) -> Vec<GridSize> {
        ns.iter().map(|&n| GridSize::new(n, 2 * n)).collect()
    }
}

fn default_tol() -> f64 {
    1e-8
}

fn default_q() -> f64 {
    4.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_sources() -> usize {
    5
}

fn default_etas() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub suite: Suite,
    #[serde(default)]
    pub alpha: f64,
    /// Swirl strength of the divergence-free drift.
    #[serde(default)]
    pub beta: f64,
    pub grids: Vec<GridSize>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Manufactured profile for the convergence suite (default `1 - r^2`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_star: Option<UStar>,
    /// Regularization schedule for the continuation suites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_schedule: Option<Vec<f64>>,
    /// Number of random bump sources in the energy suite.
    #[serde(default = "default_sources")]
    pub sources: usize,
    /// Mollification radii for the drift suite.
    #[serde(default = "default_etas")]
    pub etas: Vec<f64>,
}

impl ExperimentConfig {
    pub fn new(name: impl Into<String>, suite: Suite, grids: Vec<GridSize>) -> Self {
        Self {
            name: name.into(),
            suite,
            alpha: 0.0,
            beta: 0.0,
            grids,
            scheme: Scheme::Centered,
            tol: default_tol(),
            q: default_q(),
            seed: 0,
            output_dir: default_output_dir(),
            u_star: None,
            epsilon_schedule: None,
            sources: default_sources(),
            etas: default_etas(),
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn epsilon_schedule(&self) -> Vec<f64> {
        self.epsilon_schedule.clone().unwrap_or_else(sdlab_core::solve::default_epsilon_schedule)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.name)));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be non-empty and contain no path separators".into());
        }
        if self.grids.is_empty() {
            return bad("at least one grid is required".into());
        }
        for g in &self.grids {
            if g.n_r < 4 || g.n_theta < 8 || g.n_theta % 2 != 0 {
                return bad(format!("grid ({}, {}) needs n_r >= 4 and even n_theta >= 8", g.n_r, g.n_theta));
            }
        }
        if self.grids.windows(2).any(|w| w[1].n_r <= w[0].n_r) {
            return bad("grids must be listed with strictly increasing n_r".into());
        }
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return bad(format!("tol = {} must lie in (0, 1e-2]", self.tol));
        }
        if !(self.q > 2.0) {
            return bad(format!("q = {} must exceed 2", self.q));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return bad("alpha and beta must be finite".into());
        }
        if let Some(s) = &self.epsilon_schedule {
            if s.is_empty() || s.iter().any(|e| !(*e > 0.0)) || s.windows(2).any(|w| w[1] >= w[0]) {
                return bad("epsilon_schedule must be positive and strictly decreasing".into());
            }
        }
        match self.suite {
            Suite::Convergence if self.grids.len() < 3 => bad("convergence needs at least 3 grids".into()),
            Suite::Nonuniqueness | Suite::PinningEquivalence | Suite::Oscillation if self.alpha >= 0.0 => {
                bad(format!("{} requires alpha < 0", self.suite.name()))
            }
            Suite::Nonuniqueness if self.grids.len() < 2 => bad("nonuniqueness needs at least 2 grids".into()),
            Suite::EpsilonContinuation if self.alpha < 0.0 => {
                bad("epsilon_continuation requires alpha >= 0".into())
            }
            Suite::Oscillation if self.grids[0].n_r < 32 => {
                bad("oscillation needs n_r >= 32 for four dyadic radii".into())
            }
            Suite::EnergyStability if self.sources == 0 => bad("energy_stability needs sources >= 1".into()),
            Suite::DriftNorms if self.etas.iter().any(|e| !(*e > 0.0)) => bad("etas must be positive".into()),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_gets_defaults() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"name":"x","suite":"convergence","alpha":1,"grids":[{"n_r":8,"n_theta":16},{"n_r":16,"n_theta":32},{"n_r":32,"n_theta":64}]}"#,
        )
        .unwrap();
        assert_eq!(c.tol, 1e-8);
        assert_eq!(c.q, 4.0);
        assert_eq!(c.scheme, Scheme::Centered);
        assert_eq!(c.sources, 5);
        c.validate().unwrap();
    }

    #[test]
    fn suite_specific_rules() {
        let grids = GridSize::doubling(&[8, 16]);
        assert!(ExperimentConfig::new("a", Suite::Nonuniqueness, grids.clone()).validate().is_err());
        assert!(ExperimentConfig::new("a", Suite::Nonuniqueness, grids.clone()).with_alpha(-0.5).validate().is_ok());
        assert!(ExperimentConfig::new("a", Suite::Convergence, grids.clone()).validate().is_err());
        assert!(ExperimentConfig::new("a", Suite::EpsilonContinuation, grids.clone()).with_alpha(-1.0).validate().is_err());
        assert!(ExperimentConfig::new("a", Suite::DriftNorms, vec![GridSize::new(8, 9)]).validate().is_err());
        assert!(ExperimentConfig::new("a", Suite::DriftNorms, grids.clone()).with_tol(0.5).validate().is_err());
        assert!(ExperimentConfig::new("a/b", Suite::DriftNorms, grids).validate().is_err());
    }
}
