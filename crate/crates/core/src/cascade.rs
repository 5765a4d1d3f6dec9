//! Monte Carlo simulation of the sequential game.
//!
//! Each agent looks up the public belief, solves its precision choice, draws a
//! signal if it invests, and acts on its cutoff. An observer who knows the
//! equilibrium strategy updates the public belief from the action alone.
//!
//! Randomness comes from a ChaCha stream keyed by the path seed, repositioned
//! to a fixed block per step, so a path depends only on `(seed, step)` and
//! never on scheduling.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bonus::{posterior_cutoff, proxy_cutoff, proxy_error_bound, BonusKind, Popularity, PopularitySource};
use crate::error::{ModelError, Result};
use crate::gaussian::{bayes_update, Belief};
use crate::payoff::{strategy, uninformed_action, ModelParams};
use crate::precision::{solve_precision_with, SolverConfig};

/// RNG words reserved per step.
const WORDS_PER_STEP: u128 = 64;

/// Slack for the proxy error bound on simulated steps.
pub const PROXY_BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub params: ModelParams,
    pub horizon: usize,
    /// Initial public belief.
    pub mu0: f64,
    /// Fixed true state; drawn from `mu0` when `None`.
    pub theta: Option<u8>,
    /// Precision choices are cached on beliefs rounded to this resolution.
    pub cache_resolution: f64,
}

impl SimulationConfig {
    pub fn new(params: ModelParams, horizon: usize) -> Self {
        Self {
            params,
            horizon,
            mu0: 0.5,
            theta: None,
            cache_resolution: 1e-6,
        }
    }

    pub fn validated(self) -> Result<Self> {
        self.params.validated()?;
        if self.horizon == 0 {
            return Err(ModelError::Config("horizon must be at least 1".into()));
        }
        Belief::new(self.mu0)?;
        if matches!(self.theta, Some(t) if t > 1) {
            return Err(ModelError::Config("theta must be 0 or 1".into()));
        }
        if !(self.cache_resolution >= 0.0) {
            return Err(ModelError::Config("cache resolution must be non-negative".into()));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    /// 1-based arrival index.
    pub index: usize,
    pub mu_before: f64,
    pub mu_after: f64,
    pub p1_empirical: f64,
    pub invested: bool,
    pub rho: f64,
    pub signal: Option<f64>,
    /// Raw posterior cutoff the agent acted on.
    pub cutoff: f64,
    pub action: u8,
    pub was_informative: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CascadeType {
    OneCascade,
    ZeroCascade,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeOnset {
    pub onset: Option<usize>,
    pub kind: CascadeType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadePath {
    pub theta: u8,
    pub steps: Vec<AgentStep>,
    pub cascade_onset: Option<usize>,
    pub cascade_type: CascadeType,
    pub seed: u64,
}

type CacheKey = (i64, i64);

struct PrecisionCache {
    resolution: f64,
    entries: HashMap<CacheKey, (f64, bool)>,
}

impl PrecisionCache {
    fn new(resolution: f64) -> Self {
        Self {
            resolution,
            entries: HashMap::new(),
        }
    }

    fn snap(&self, x: f64) -> (i64, f64) {
        if self.resolution > 0.0 {
            let key = (x / self.resolution).round();
            (key as i64, key * self.resolution)
        } else {
            (x.to_bits() as i64, x)
        }
    }

    /// `(rho*, invests)` at the belief and popularity snapped to the grid.
    fn lookup(&mut self, mu: Belief, pop: &Popularity, params: &ModelParams) -> Result<(f64, bool)> {
        let (mu_key, mu_snap) = self.snap(mu.value());
        let (p_key, p_snap) = match pop.source() {
            PopularitySource::ProxyFromBelief => (0, f64::NAN),
            PopularitySource::EmpiricalCounts => self.snap(pop.p1()),
        };
        if let Some(hit) = self.entries.get(&(mu_key, p_key)) {
            return Ok(*hit);
        }
        let mu_snap = Belief::clipped(mu_snap, crate::gaussian::PROBABILITY_CLIP)?;
        let pop_snap = match pop.source() {
            PopularitySource::ProxyFromBelief => Popularity::proxy(mu_snap.value())?,
            PopularitySource::EmpiricalCounts => {
                Popularity::new(p_snap.clamp(0.0, 1.0), PopularitySource::EmpiricalCounts)?
            }
        };
        let eq = solve_precision_with(mu_snap, params, &pop_snap, &SolverConfig::default());
        let hit = (eq.rho_star, eq.invests);
        self.entries.insert((mu_key, p_key), hit);
        Ok(hit)
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn step_rng(seed: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(step as u128 * WORDS_PER_STEP);
    rng
}

pub fn simulate_path_with(config: &SimulationConfig, seed: u64) -> Result<CascadePath> {
    let config = config.validated()?;
    let params = &config.params;
    let theta = match config.theta {
        Some(t) => t,
        None => u8::from(step_rng(seed, 0).random::<f64>() < config.mu0),
    };
    let mut cache = PrecisionCache::new(config.cache_resolution);
    let mut mu = Belief::new(config.mu0)?;
    let mut ones = 0usize;
    let mut steps = Vec::with_capacity(config.horizon);

    for index in 1..=config.horizon {
        let empirical = Popularity::from_counts(ones, index - 1)?;
        let pop = match params.popularity_mode {
            PopularitySource::ProxyFromBelief => Popularity::proxy(mu.value())?,
            PopularitySource::EmpiricalCounts => empirical,
        };
        let (rho, invests) = cache.lookup(mu, &pop, params)?;
        let (action, signal, play) = if invests {
            let play = strategy(mu, rho, params, &pop);
            let z: f64 = step_rng(seed, index).sample(StandardNormal);
            let s = f64::from(theta) + z / rho.sqrt();
            (u8::from(s >= play.s_star), Some(s), play)
        } else {
            let play = strategy(mu, 0.0, params, &pop);
            (uninformed_action(mu, params, &pop).action, None, play)
        };
        let mu_after = bayes_update(mu, action, &play.probs)?;
        steps.push(AgentStep {
            index,
            mu_before: mu.value(),
            mu_after: mu_after.value(),
            p1_empirical: empirical.p1(),
            invested: invests,
            rho: if invests { rho } else { 0.0 },
            signal,
            cutoff: play.cutoff.raw,
            action,
            was_informative: invests && play.s_star.is_finite(),
        });
        ones += usize::from(action);
        mu = mu_after;
    }

    let mut path = CascadePath {
        theta,
        steps,
        cascade_onset: None,
        cascade_type: CascadeType::None,
        seed,
    };
    let onset = detect_cascade(&path);
    path.cascade_onset = onset.onset;
    path.cascade_type = onset.kind;
    Ok(path)
}

pub fn simulate_path(params: &ModelParams, horizon: usize, seed: u64) -> Result<CascadePath> {
    simulate_path_with(&SimulationConfig::new(*params, horizon), seed)
}

/// Start of the terminal run of signal-independent steps that all take the
/// same action.
pub fn detect_cascade(path: &CascadePath) -> CascadeOnset {
    let Some(last) = path.steps.last() else {
        return CascadeOnset {
            onset: None,
            kind: CascadeType::None,
        };
    };
    if last.was_informative {
        return CascadeOnset {
            onset: None,
            kind: CascadeType::None,
        };
    }
    let start = path
        .steps
        .iter()
        .rposition(|s| s.was_informative || s.action != last.action)
        .map_or(0, |i| i + 1);
    CascadeOnset {
        onset: Some(path.steps[start].index),
        kind: if last.action == 1 {
            CascadeType::OneCascade
        } else {
            CascadeType::ZeroCascade
        },
    }
}

/// Seeds `seed, seed + 1, ...` for the paths of an ensemble.
pub fn path_seed(seed: u64, path: usize) -> u64 {
    seed.wrapping_add(path as u64)
}

pub fn simulate_ensemble(config: &SimulationConfig, n_paths: usize, seed: u64) -> Result<Vec<CascadePath>> {
    (0..n_paths)
        .into_par_iter()
        .map(|i| simulate_path_with(config, path_seed(seed, i)))
        .collect()
}

/// Per-path quantities reduced into [`EnsembleSummary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathDiagnostics {
    pub cascade_onset: Option<usize>,
    pub cascade_correct: Option<bool>,
    /// Mean one-step belief change along the path.
    pub mean_belief_change: f64,
    pub proxy_gap_max: f64,
    pub proxy_bound_violations: usize,
    /// Steps where `|mu - 1/2| > |p1 - mu|` yet the exact and proxy cutoffs
    /// sit on opposite sides of 1/2.
    pub cutoff_sign_disagreements: usize,
    /// Signal-independent steps whose belief nonetheless moved.
    pub uninformative_moves: usize,
    pub invested_steps: usize,
}

impl PathDiagnostics {
    pub fn from_path(path: &CascadePath, params: &ModelParams) -> Result<Self> {
        let mut gap_max: f64 = 0.0;
        let mut violations = 0;
        let mut disagreements = 0;
        let mut moves = 0;
        for s in &path.steps {
            if params.bonus.kind == BonusKind::Proportional {
                let b = proxy_error_bound(&params.bonus, s.p1_empirical, s.mu_before)?;
                gap_max = gap_max.max(b.exact_gap);
                if !b.holds(PROXY_BOUND_SLACK) {
                    violations += 1;
                }
                if (s.mu_before - 0.5).abs() > (s.p1_empirical - s.mu_before).abs() {
                    let pop = Popularity::new(s.p1_empirical, PopularitySource::EmpiricalCounts)?;
                    let exact = posterior_cutoff(&params.bonus, &pop).raw - 0.5;
                    let proxy = proxy_cutoff(params.k(), s.mu_before)? - 0.5;
                    if sign(exact) != sign(proxy) {
                        disagreements += 1;
                    }
                }
            }
            if !s.was_informative && s.mu_after != s.mu_before {
                moves += 1;
            }
        }
        let n = path.steps.len() as f64;
        let total_change = path.steps.iter().map(|s| s.mu_after - s.mu_before).sum::<f64>();
        let cascade_correct = path.cascade_onset.map(|_| match path.cascade_type {
            CascadeType::OneCascade => path.theta == 1,
            CascadeType::ZeroCascade => path.theta == 0,
            CascadeType::None => false,
        });
        Ok(Self {
            cascade_onset: path.cascade_onset,
            cascade_correct,
            mean_belief_change: total_change / n,
            proxy_gap_max: gap_max,
            proxy_bound_violations: violations,
            cutoff_sign_disagreements: disagreements,
            uninformative_moves: moves,
            invested_steps: path.steps.iter().filter(|s| s.invested).count(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub horizon: usize,
    pub k: f64,
    pub seed: u64,
    pub cascade_frequency: f64,
    pub mean_onset: Option<f64>,
    pub correct_cascade_share: Option<f64>,
    /// Largest `|c(p1) - c~(mu)|` seen on any step (proportional bonus only).
    pub proxy_gap_max: f64,
    pub proxy_bound_violations: usize,
    pub cutoff_sign_disagreements: usize,
    /// `|mean one-step belief change|` over paths.
    pub martingale_residual: f64,
    pub martingale_standard_error: f64,
    pub uninformative_moves: usize,
    pub mean_invested_steps: f64,
}

impl EnsembleSummary {
    pub fn from_diagnostics(config: &SimulationConfig, seed: u64, diags: &[PathDiagnostics]) -> Self {
        let n = diags.len() as f64;
        let onsets: Vec<f64> = diags.iter().filter_map(|d| d.cascade_onset).map(|o| o as f64).collect();
        let correct = diags.iter().filter(|d| d.cascade_correct == Some(true)).count();
        let mean_change = diags.iter().map(|d| d.mean_belief_change).sum::<f64>() / n;
        let var = if diags.len() > 1 {
            diags
                .iter()
                .map(|d| (d.mean_belief_change - mean_change).powi(2))
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        Self {
            n_paths: diags.len(),
            horizon: config.horizon,
            k: config.params.k(),
            seed,
            cascade_frequency: onsets.len() as f64 / n,
            mean_onset: (!onsets.is_empty()).then(|| onsets.iter().sum::<f64>() / onsets.len() as f64),
            correct_cascade_share: (!onsets.is_empty()).then(|| correct as f64 / onsets.len() as f64),
            proxy_gap_max: diags.iter().map(|d| d.proxy_gap_max).fold(0.0, f64::max),
            proxy_bound_violations: diags.iter().map(|d| d.proxy_bound_violations).sum(),
            cutoff_sign_disagreements: diags.iter().map(|d| d.cutoff_sign_disagreements).sum(),
            martingale_residual: mean_change.abs(),
            martingale_standard_error: (var / n).sqrt(),
            uninformative_moves: diags.iter().map(|d| d.uninformative_moves).sum(),
            mean_invested_steps: diags.iter().map(|d| d.invested_steps as f64).sum::<f64>() / n,
        }
    }
}

pub fn ensemble_statistics_with(config: &SimulationConfig, n_paths: usize, seed: u64) -> Result<EnsembleSummary> {
    if n_paths == 0 {
        return Err(ModelError::Config("an ensemble needs at least one path".into()));
    }
    let config = config.validated()?;
    let diags: Vec<PathDiagnostics> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let path = simulate_path_with(&config, path_seed(seed, i))?;
            PathDiagnostics::from_path(&path, &config.params)
        })
        .collect::<Result<_>>()?;
    Ok(EnsembleSummary::from_diagnostics(&config, seed, &diags))
}

pub fn ensemble_statistics(params: &ModelParams, horizon: usize, n_paths: usize, seed: u64) -> Result<EnsembleSummary> {
    ensemble_statistics_with(&SimulationConfig::new(*params, horizon), n_paths, seed)
}
