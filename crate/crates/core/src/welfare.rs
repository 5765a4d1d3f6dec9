//! Welfare under an evaluator that weights the nonconformity bonus by
//! `lambda` while agents act on the full bonus.
//!
//! Everything here is evaluated analytically through action probabilities, so
//! curves and tables carry no sampling noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bonus::Popularity;
use crate::error::{check_unit, ModelError, Result};
use crate::gaussian::Belief;
use crate::payoff::{gross_payoff, ModelParams};
use crate::precision::solve_precision;

/// Evenly spaced points from `lo` to `hi` inclusive, snapped to 12 decimals so
/// that round values such as 0.5 are hit exactly.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (x * 1e12).round() / 1e12
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EvaluatorWeight(f64);

impl EvaluatorWeight {
    pub const PREFERENCE_RESPECTING: Self = Self(1.0);

    pub fn new(lambda: f64) -> Result<Self> {
        check_unit("lambda", lambda).map(Self)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareRecord {
    pub mu: f64,
    pub k: f64,
    pub lambda: f64,
    pub rho_star: f64,
    pub correctness: f64,
    pub bonus_expectation: f64,
    pub precision_cost: f64,
    pub fixed_cost: f64,
    pub welfare: f64,
}

impl WelfareRecord {
    /// Re-weights the bonus without re-solving behavior.
    pub fn with_lambda(&self, lambda: EvaluatorWeight) -> Self {
        let l = lambda.value();
        Self {
            lambda: l,
            welfare: self.correctness + l * self.bonus_expectation - self.precision_cost - self.fixed_cost,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    UniformGrid,
}

/// Equal-weight distribution of public beliefs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefDistribution {
    pub kind: DistributionKind,
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

impl Default for BeliefDistribution {
    /// 0.02, 0.03, ..., 0.98.
    fn default() -> Self {
        Self {
            kind: DistributionKind::UniformGrid,
            lo: 0.02,
            hi: 0.98,
            n_points: 97,
        }
    }
}

impl BeliefDistribution {
    pub fn uniform(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        Self {
            kind: DistributionKind::UniformGrid,
            lo,
            hi,
            n_points,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        Belief::new(self.lo)?;
        Belief::new(self.hi)?;
        if !(self.lo < self.hi) {
            return Err(ModelError::Config(format!(
                "belief grid needs lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.n_points < 2 {
            return Err(ModelError::Config("belief grid needs at least 2 points".into()));
        }
        Ok(self)
    }

    pub fn points(&self) -> Vec<f64> {
        uniform_grid(self.lo, self.hi, self.n_points)
    }
}

pub fn equilibrium_welfare(mu: Belief, k: f64, lambda: EvaluatorWeight, params: &ModelParams) -> Result<WelfareRecord> {
    let params = params.with_k(k)?;
    let eq = solve_precision(mu, &params);
    let pop = Popularity::proxy(mu.value())?;
    let g = gross_payoff(mu, eq.rho_star, &params, &pop);
    let record = WelfareRecord {
        mu: mu.value(),
        k,
        lambda: 1.0,
        rho_star: eq.rho_star,
        correctness: g.correctness,
        bonus_expectation: g.bonus_expectation,
        precision_cost: params.precision_cost(eq.rho_star),
        fixed_cost: params.fixed_cost(eq.rho_star),
        welfare: 0.0,
    };
    Ok(record.with_lambda(lambda))
}

/// Per-period planner welfare. The planner controls the same precision choice
/// the agent faces, so this coincides with equilibrium welfare at full weight.
pub fn planner_welfare(mu: Belief, k: f64, params: &ModelParams) -> Result<WelfareRecord> {
    equilibrium_welfare(mu, k, EvaluatorWeight::PREFERENCE_RESPECTING, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateWelfare {
    pub k: f64,
    pub lambda: f64,
    pub average: f64,
    pub min: f64,
    pub max: f64,
}

fn summarize(k: f64, lambda: f64, welfare: impl Iterator<Item = f64>) -> AggregateWelfare {
    let (mut sum, mut n, mut min, mut max) = (0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY);
    for w in welfare {
        sum += w;
        n += 1;
        min = min.min(w);
        max = max.max(w);
    }
    AggregateWelfare {
        k,
        lambda,
        average: sum / n as f64,
        min,
        max,
    }
}

/// Welfare records over the distribution's grid, in grid order.
pub fn welfare_records(k: f64, params: &ModelParams, dist: &BeliefDistribution) -> Result<Vec<WelfareRecord>> {
    let dist = dist.validated()?;
    let beliefs: Vec<Belief> = dist.points().into_iter().map(Belief::new).collect::<Result<_>>()?;
    beliefs
        .par_iter()
        .map(|&mu| equilibrium_welfare(mu, k, EvaluatorWeight::PREFERENCE_RESPECTING, params))
        .collect()
}

pub fn aggregate_welfare(
    k: f64,
    lambda: EvaluatorWeight,
    params: &ModelParams,
    dist: &BeliefDistribution,
) -> Result<AggregateWelfare> {
    let records = welfare_records(k, params, dist)?;
    Ok(summarize(
        k,
        lambda.value(),
        records.iter().map(|r| r.with_lambda(lambda).welfare),
    ))
}

pub fn welfare_curve(
    k_grid: &[f64],
    lambda: EvaluatorWeight,
    params: &ModelParams,
    dist: &BeliefDistribution,
) -> Result<Vec<AggregateWelfare>> {
    Ok(welfare_curves(k_grid, &[lambda], params, dist)?.remove(0))
}

/// One curve per evaluator weight; behavior is solved once per `(mu, k)`.
pub fn welfare_curves(
    k_grid: &[f64],
    lambdas: &[EvaluatorWeight],
    params: &ModelParams,
    dist: &BeliefDistribution,
) -> Result<Vec<Vec<AggregateWelfare>>> {
    if k_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ModelError::Config("k grid must be strictly increasing".into()));
    }
    let per_k: Vec<Vec<WelfareRecord>> = k_grid
        .iter()
        .map(|&k| welfare_records(k, params, dist))
        .collect::<Result<_>>()?;
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            k_grid
                .iter()
                .zip(&per_k)
                .map(|(&k, records)| {
                    summarize(k, lambda.value(), records.iter().map(|r| r.with_lambda(lambda).welfare))
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveShape {
    Increasing,
    Decreasing,
    InvertedU,
    Other,
}

/// Comparison slack for shape detection.
pub const SHAPE_TOLERANCE: f64 = 1e-9;

/// Classifies a series: strictly monotone, strictly up then strictly down
/// around an interior peak, or neither.
pub fn detect_shape(series: &[f64]) -> Result<CurveShape> {
    if series.len() < 3 {
        return Err(ModelError::Config(format!(
            "shape detection needs at least 3 points, got {}",
            series.len()
        )));
    }
    let up = |w: &[f64]| w[1] - w[0] > SHAPE_TOLERANCE;
    let down = |w: &[f64]| w[0] - w[1] > SHAPE_TOLERANCE;
    let steps: Vec<&[f64]> = series.windows(2).collect();
    if steps.iter().all(|w| up(w)) {
        return Ok(CurveShape::Increasing);
    }
    if steps.iter().all(|w| down(w)) {
        return Ok(CurveShape::Decreasing);
    }
    let rising = steps.iter().take_while(|w| up(w)).count();
    if rising > 0 && rising < steps.len() && steps[rising..].iter().all(|w| down(w)) {
        return Ok(CurveShape::InvertedU);
    }
    Ok(CurveShape::Other)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DerivativeTarget {
    Belief(f64),
    Aggregate(BeliefDistribution),
}

/// Right derivative in `k` at `k = 0` from forward differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KDerivative {
    pub coarse: f64,
    pub fine: f64,
    /// Richardson combination `2 fine - coarse`.
    pub estimate: f64,
    /// `|fine - coarse|`, a step-consistency diagnostic.
    pub step_gap: f64,
}

pub const K_DERIVATIVE_STEP: f64 = 1e-3;

pub fn local_k_derivative(
    target: DerivativeTarget,
    lambda: EvaluatorWeight,
    params: &ModelParams,
) -> Result<KDerivative> {
    let eval = |k: f64| -> Result<f64> {
        match target {
            DerivativeTarget::Belief(mu) => Ok(equilibrium_welfare(Belief::new(mu)?, k, lambda, params)?.welfare),
            DerivativeTarget::Aggregate(dist) => Ok(aggregate_welfare(k, lambda, params, &dist)?.average),
        }
    };
    let h = K_DERIVATIVE_STEP;
    let w0 = eval(0.0)?;
    let coarse = (eval(h)? - w0) / h;
    let fine = (eval(0.5 * h)? - w0) / (0.5 * h);
    Ok(KDerivative {
        coarse,
        fine,
        estimate: 2.0 * fine - coarse,
        step_gap: (fine - coarse).abs(),
    })
}

/// Published preference-respecting welfare for `c = 0.6`, `F = 0.06`:
/// `(k, average, min, max)`.
pub const PUBLISHED_LIGHT_COST_TABLE: [(f64, f64, f64, f64); 5] = [
    (0.0, 0.6569, 0.5348, 0.7416),
    (0.2, 0.6792, 0.5519, 0.7643),
    (0.4, 0.6877, 0.5620, 0.7727),
    (0.6, 0.6830, 0.5580, 0.7687),
    (0.8, 0.6681, 0.5430, 0.7545),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableComparison {
    pub k: f64,
    pub avg: f64,
    pub min: f64,
    pub max: f64,
    pub paper_avg: f64,
    pub paper_min: f64,
    pub paper_max: f64,
    /// `avg - paper_avg`.
    pub delta: f64,
}

/// Computes the published table's rows and places them beside the published
/// values.
pub fn compare_published_table(params: &ModelParams, dist: &BeliefDistribution) -> Result<Vec<TableComparison>> {
    let ks: Vec<f64> = PUBLISHED_LIGHT_COST_TABLE.iter().map(|r| r.0).collect();
    let curve = welfare_curve(&ks, EvaluatorWeight::PREFERENCE_RESPECTING, params, dist)?;
    Ok(curve
        .iter()
        .zip(PUBLISHED_LIGHT_COST_TABLE)
        .map(|(row, (k, avg, min, max))| TableComparison {
            k,
            avg: row.average,
            min: row.min,
            max: row.max,
            paper_avg: avg,
            paper_min: min,
            paper_max: max,
            delta: row.average - avg,
        })
        .collect())
}
