//! Flat JSON run configuration.
//!
//! Every key is optional. Command-line flags override file values, and
//! unset keys fall back to the defaults below.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bonus::{BonusKind, BonusSpec, PopularitySource};
use crate::error::{ModelError, Result};
use crate::payoff::ModelParams;
use crate::welfare::{uniform_grid, BeliefDistribution, EvaluatorWeight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub bonus_kind: Option<BonusKind>,
    /// Bonus intensity, utility units.
    pub k: Option<f64>,
    pub k_grid: Option<Vec<f64>>,
    pub k_lo: Option<f64>,
    pub k_hi: Option<f64>,
    pub k_points: Option<usize>,
    /// Quadratic precision cost coefficient.
    pub cost_c: Option<f64>,
    /// Fixed cost of acquiring any signal.
    pub cost_f: Option<f64>,
    pub cost_f_grid: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub mu_lo: Option<f64>,
    pub mu_hi: Option<f64>,
    pub mu_points: Option<usize>,
    pub horizon: Option<usize>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub popularity_mode: Option<PopularitySource>,
    pub output: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

pub const DEFAULT_COST_C: f64 = 0.6;
pub const DEFAULT_COST_F: f64 = 0.06;
pub const DEFAULT_SEED: u64 = 20_240_601;

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ModelError::Config(format!("{}: {e}", path.display())))
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(
            self,
            top,
            bonus_kind,
            k,
            k_grid,
            k_lo,
            k_hi,
            k_points,
            cost_c,
            cost_f,
            cost_f_grid,
            lambda,
            lambda_grid,
            mu_lo,
            mu_hi,
            mu_points,
            horizon,
            n_paths,
            seed,
            popularity_mode,
            output,
            format
        );
        self
    }

    pub fn bonus(&self, k: f64) -> Result<BonusSpec> {
        BonusSpec::new(self.bonus_kind.unwrap_or(BonusKind::Proportional), k)
    }

    pub fn k(&self) -> f64 {
        self.k.unwrap_or(0.0)
    }

    pub fn params_at(&self, k: f64) -> Result<ModelParams> {
        let mut p = ModelParams::new(
            self.bonus(k)?,
            self.cost_c.unwrap_or(DEFAULT_COST_C),
            self.cost_f.unwrap_or(DEFAULT_COST_F),
        )?;
        p.popularity_mode = self.popularity_mode.unwrap_or(PopularitySource::ProxyFromBelief);
        p.validated()
    }

    pub fn params(&self) -> Result<ModelParams> {
        self.params_at(self.k())
    }

    /// Explicit grid, else `k_lo..=k_hi` in `k_points` steps, else `0..=1.2`
    /// in steps of 0.1.
    pub fn k_grid(&self) -> Result<Vec<f64>> {
        let grid = match &self.k_grid {
            Some(g) => g.clone(),
            None => uniform_grid(
                self.k_lo.unwrap_or(0.0),
                self.k_hi.unwrap_or(1.2),
                self.k_points.unwrap_or(13),
            ),
        };
        if grid.is_empty() {
            return Err(ModelError::Config("k grid is empty".into()));
        }
        for &k in &grid {
            self.bonus(k)?;
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ModelError::Config("k grid must be strictly increasing".into()));
        }
        Ok(grid)
    }

    pub fn beliefs(&self) -> Result<BeliefDistribution> {
        let d = BeliefDistribution::default();
        BeliefDistribution::uniform(
            self.mu_lo.unwrap_or(d.lo),
            self.mu_hi.unwrap_or(d.hi),
            self.mu_points.unwrap_or(d.n_points),
        )
    }

    pub fn cost_f_grid(&self) -> Vec<f64> {
        match (&self.cost_f_grid, self.cost_f) {
            (Some(g), _) => g.clone(),
            (None, Some(f)) => vec![f],
            (None, None) => vec![0.06, 0.16],
        }
    }

    pub fn lambdas(&self, default: &[f64]) -> Result<Vec<EvaluatorWeight>> {
        let raw = match (&self.lambda_grid, self.lambda) {
            (Some(g), _) => g.clone(),
            (None, Some(l)) => vec![l],
            (None, None) => default.to_vec(),
        };
        raw.into_iter().map(EvaluatorWeight::new).collect()
    }

    pub fn horizon(&self) -> usize {
        self.horizon.unwrap_or(100)
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths.unwrap_or(1000)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn format(&self) -> OutputFormat {
        self.format.unwrap_or_default()
    }

    /// Re-validates every field that has a domain.
    pub fn validated(self) -> Result<Self> {
        self.params()?;
        self.k_grid()?;
        self.beliefs()?;
        for f in self.cost_f_grid() {
            self.params()?.with_fixed_cost(f)?;
        }
        self.lambdas(&[1.0])?;
        if self.horizon == Some(0) {
            return Err(ModelError::Config("horizon must be at least 1".into()));
        }
        if self.n_paths == Some(0) {
            return Err(ModelError::Config("n_paths must be at least 1".into()));
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"k": 0.2, "kappa": 1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn flat_json_parses() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"bonus_kind": "proportional", "k": 0.4, "cost_c": 0.6, "cost_f": 0.16,
                "lambda_grid": [0, 0.5], "popularity_mode": "empirical_counts", "format": "json"}"#,
        )
        .unwrap();
        let cfg = cfg.validated().unwrap();
        assert_eq!(cfg.params().unwrap().cost_f, 0.16);
        assert_eq!(cfg.lambdas(&[]).unwrap().len(), 2);
        assert_eq!(cfg.format(), OutputFormat::Json);
    }

    #[test]
    fn overlay_prefers_the_top_layer() {
        let file = RunConfig {
            k: Some(0.2),
            seed: Some(1),
            ..RunConfig::default()
        };
        let flags = RunConfig {
            k: Some(0.6),
            ..RunConfig::default()
        };
        let merged = file.overlay(&flags);
        assert_eq!(merged.k, Some(0.6));
        assert_eq!(merged.seed, Some(1));
    }

    #[test]
    fn invalid_values_fail_validation() {
        for bad in [
            RunConfig {
                k: Some(-0.1),
                ..RunConfig::default()
            },
            RunConfig {
                k_grid: Some(vec![0.2, 0.1]),
                ..RunConfig::default()
            },
            RunConfig {
                lambda: Some(1.5),
                ..RunConfig::default()
            },
            RunConfig {
                horizon: Some(0),
                ..RunConfig::default()
            },
        ] {
            assert!(bad.validated().is_err());
        }
    }

    #[test]
    fn default_grids() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.k_grid().unwrap().len(), 13);
        assert_eq!(cfg.beliefs().unwrap().points().len(), 97);
        assert_eq!(cfg.cost_f_grid(), vec![0.06, 0.16]);
    }
}
