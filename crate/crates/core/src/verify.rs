//! Comparative-statics checks with machine-readable verdicts.
//!
//! Every check scans a grid, compares an observed quantity with what the
//! model's qualitative claims require, and records each disagreement as a
//! [`Violation`]. Step sizes and tolerances live in [`VerifyConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bonus::{BonusKind, BonusSpec};
use crate::cascade::{ensemble_statistics_with, SimulationConfig};
use crate::error::{ModelError, Result};
use crate::gaussian::{signal_threshold, threshold_k_sensitivity, Belief};
use crate::payoff::ModelParams;
use crate::precision::{precision_profile, solve_precision, EquilibriumPoint};
use crate::welfare::{
    detect_shape, local_k_derivative, uniform_grid, welfare_curve, welfare_curves, BeliefDistribution, CurveShape,
    DerivativeTarget, EvaluatorWeight,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckId {
    ThresholdSensitivity,
    InvestmentNesting,
    CenterInvariance,
    PrecisionDip,
    WelfareShape,
    EventualDecline,
    ProxyBound,
}

impl CheckId {
    pub const ALL: [CheckId; 7] = [
        CheckId::ThresholdSensitivity,
        CheckId::InvestmentNesting,
        CheckId::CenterInvariance,
        CheckId::PrecisionDip,
        CheckId::WelfareShape,
        CheckId::EventualDecline,
        CheckId::ProxyBound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::ThresholdSensitivity => "threshold-sensitivity",
            CheckId::InvestmentNesting => "investment-nesting",
            CheckId::CenterInvariance => "center-invariance",
            CheckId::PrecisionDip => "precision-dip",
            CheckId::WelfareShape => "welfare-shape",
            CheckId::EventualDecline => "eventual-decline",
            CheckId::ProxyBound => "proxy-bound",
        }
    }

    /// Checks whose outcome does not depend on the cost calibration.
    pub fn calibration_free(self) -> bool {
        self == CheckId::ThresholdSensitivity
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        CheckId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| ModelError::UnknownCheck(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub inputs: BTreeMap<String, f64>,
    pub observed: f64,
    pub expected: f64,
    pub gap: f64,
}

impl Violation {
    fn new(inputs: &[(&str, f64)], observed: f64, expected: f64) -> Self {
        Self {
            inputs: inputs.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            observed,
            expected,
            gap: (observed - expected).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_id: CheckId,
    /// Cost calibration the check ran under, `None` for calibration-free checks.
    pub calibration: Option<Calibration>,
    pub passed: bool,
    pub violations: Vec<Violation>,
    pub tolerance: f64,
    /// Cells skipped because a precondition failed, such as no investment.
    pub skipped: Vec<BTreeMap<String, f64>>,
    /// Wall-clock time; not part of the reproducible content.
    pub runtime_secs: f64,
}

impl CheckReport {
    fn finish(
        check_id: CheckId,
        calibration: Option<Calibration>,
        tolerance: f64,
        violations: Vec<Violation>,
        skipped: Vec<BTreeMap<String, f64>>,
        started: Instant,
    ) -> Self {
        Self {
            check_id,
            calibration,
            passed: violations.is_empty(),
            violations,
            tolerance,
            skipped,
            runtime_secs: started.elapsed().as_secs_f64(),
        }
    }
}

/// Cost parameters of a calibration; bonus intensity is set by each check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub cost_c: f64,
    pub cost_f: f64,
}

impl Calibration {
    pub const LIGHT_COST: Calibration = Calibration {
        cost_c: 0.6,
        cost_f: 0.06,
    };
    pub const HEAVY_COST: Calibration = Calibration {
        cost_c: 0.6,
        cost_f: 0.16,
    };

    pub fn params(&self, k: f64) -> Result<ModelParams> {
        ModelParams::new(BonusSpec::proportional(k)?, self.cost_c, self.cost_f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Additive slack for weak inequalities and set inclusions.
    pub weak_slack: f64,
    pub threshold_fd_step: f64,
    pub threshold_rel_tol: f64,
    /// Absolute tolerance where the analytic derivative vanishes.
    pub threshold_zero_tol: f64,
    pub threshold_mus: Vec<f64>,
    pub threshold_ks: Vec<f64>,
    pub threshold_rhos: Vec<f64>,
    pub k_grid: Vec<f64>,
    pub beliefs: BeliefDistribution,
    pub center_tol: f64,
    pub dip_fd_step: f64,
    pub dip_mus: Vec<f64>,
    pub dip_ks: Vec<f64>,
    pub shape_lambdas: Vec<f64>,
    pub slope_lambda: f64,
    pub decline_k: f64,
    pub decline_lambda: f64,
    pub sim_k: f64,
    pub sim_horizon: usize,
    pub sim_paths: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            weak_slack: 1e-6,
            threshold_fd_step: 1e-5,
            threshold_rel_tol: 1e-6,
            threshold_zero_tol: 1e-9,
            threshold_mus: uniform_grid(0.3, 0.7, 9),
            threshold_ks: uniform_grid(0.0, 1.0, 11),
            threshold_rhos: vec![0.5, 1.0, 2.0],
            k_grid: uniform_grid(0.0, 1.2, 13),
            beliefs: BeliefDistribution::default(),
            center_tol: 1e-8,
            dip_fd_step: 1e-3,
            dip_mus: vec![0.45, 0.48, 0.5, 0.52, 0.55],
            dip_ks: vec![0.0, 0.2, 0.4],
            shape_lambdas: vec![0.0, 0.5],
            slope_lambda: 1.0,
            decline_k: 2.0,
            decline_lambda: 0.0,
            sim_k: 0.4,
            sim_horizon: 100,
            sim_paths: 10_000,
            seed: 20_240_601,
        }
    }
}

pub fn check_threshold_sensitivity(config: &VerifyConfig) -> Result<CheckReport> {
    let started = Instant::now();
    let h = config.threshold_fd_step;
    let mut cells = Vec::new();
    for &mu in &config.threshold_mus {
        for &k in &config.threshold_ks {
            for &rho in &config.threshold_rhos {
                cells.push((mu, k, rho));
            }
        }
    }
    let per_cell: Vec<Vec<Violation>> = cells
        .par_iter()
        .map(|&(mu, k, rho)| -> Result<Vec<Violation>> {
            let belief = Belief::new(mu)?;
            let analytic = threshold_k_sensitivity(belief, k, rho)?;
            // Linear cutoff so the difference can straddle k = 0.
            let s = |k: f64| signal_threshold(belief, 0.5 + k * (mu - 0.5), rho);
            let numeric = (s(k + h)? - s(k - h)?) / (2.0 * h);
            let inputs = [("mu", mu), ("k", k), ("rho", rho)];
            let mut out = Vec::new();
            let scale = analytic.abs().max(config.threshold_zero_tol);
            if (analytic - numeric).abs() / scale > config.threshold_rel_tol
                && (analytic - numeric).abs() > config.threshold_zero_tol
            {
                out.push(Violation::new(&inputs, numeric, analytic));
            }
            let expected_sign = (mu - 0.5).signum();
            let sign_ok = if (mu - 0.5).abs() < 1e-12 {
                analytic.abs() <= config.threshold_zero_tol
            } else {
                analytic.signum() == expected_sign && analytic != 0.0
            };
            if !sign_ok {
                out.push(Violation::new(&inputs, analytic.signum(), expected_sign));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(CheckReport::finish(
        CheckId::ThresholdSensitivity,
        None,
        config.threshold_rel_tol,
        per_cell.into_iter().flatten().collect(),
        Vec::new(),
        started,
    ))
}

fn profiles(cal: &Calibration, ks: &[f64], mus: &[f64]) -> Result<Vec<Vec<EquilibriumPoint>>> {
    ks.iter().map(|&k| precision_profile(&cal.params(k)?, mus)).collect()
}

/// Investment at `k` must persist at every larger `k`.
pub fn check_investment_nesting(cal: &Calibration, config: &VerifyConfig) -> Result<CheckReport> {
    let started = Instant::now();
    let mut ks = config.k_grid.clone();
    ks.sort_by(f64::total_cmp);
    let mus = config.beliefs.validated()?.points();
    let profiles = profiles(cal, &ks, &mus)?;
    let margin = |p: &EquilibriumPoint| p.net_value_of_information - cal.cost_f;
    let mut violations = Vec::new();
    for (i, lower) in profiles.iter().enumerate() {
        for (j, upper) in profiles.iter().enumerate().skip(i + 1) {
            for (a, b) in lower.iter().zip(upper) {
                if margin(a) > config.weak_slack && margin(b) < -config.weak_slack {
                    violations.push(Violation::new(
                        &[("mu", a.mu), ("k", ks[i]), ("k_prime", ks[j])],
                        margin(b),
                        0.0,
                    ));
                }
            }
        }
    }
    Ok(CheckReport::finish(
        CheckId::InvestmentNesting,
        Some(*cal),
        config.weak_slack,
        violations,
        Vec::new(),
        started,
    ))
}

/// The net value of information at the central belief does not move with `k`.
pub fn check_center_invariance(cal: &Calibration, config: &VerifyConfig) -> Result<CheckReport> {
    let started = Instant::now();
    let center = Belief::new(0.5)?;
    let values: Vec<(f64, f64)> = config
        .k_grid
        .iter()
        .map(|&k| Ok((k, solve_precision(center, &cal.params(k)?).net_value_of_information)))
        .collect::<Result<_>>()?;
    let reference = values[0].1;
    let violations = values
        .iter()
        .filter(|(_, v)| (v - reference).abs() > config.center_tol)
        .map(|&(k, v)| Violation::new(&[("mu", 0.5), ("k", k)], v, reference))
        .collect();
    Ok(CheckReport::finish(
        CheckId::CenterInvariance,
        Some(*cal),
        config.center_tol,
        violations,
        Vec::new(),
        started,
    ))
}

/// Finite-difference slope of the chosen precision in `k` near the center:
/// nonpositive off center, zero at the center.
pub fn check_precision_dip(cal: &Calibration, config: &VerifyConfig) -> Result<CheckReport> {
    let started = Instant::now();
    let d = config.dip_fd_step;
    let mut violations = Vec::new();
    let mut skipped = Vec::new();
    for &mu in &config.dip_mus {
        let belief = Belief::new(mu)?;
        for &k in &config.dip_ks {
            let (lo, hi) = if k >= d { (k - d, k + d) } else { (k, k + d) };
            let a = solve_precision(belief, &cal.params(lo)?);
            let b = solve_precision(belief, &cal.params(hi)?);
            let inputs = [("mu", mu), ("k", k)];
            if !(a.invests && b.invests) {
                skipped.push(inputs.iter().map(|&(n, v)| (n.to_string(), v)).collect());
                continue;
            }
            let slope = (b.rho_star - a.rho_star) / (hi - lo);
            let bad = if (mu - 0.5).abs() < 1e-12 {
                slope.abs() > config.weak_slack
            } else {
                slope > config.weak_slack
            };
            if bad {
                violations.push(Violation::new(&inputs, slope, 0.0));
            }
        }
    }
    Ok(CheckReport::finish(
        CheckId::PrecisionDip,
        Some(*cal),
        config.weak_slack,
        violations,
        skipped,
        started,
    ))
}

/// Aggregate welfare is hump-shaped in `k` for partial evaluator weights, and
/// does not fall at `k = 0` under full weight.
pub fn check_welfare_shape(cal: &Calibration, config: &VerifyConfig) -> Result<CheckReport> {
    let started = Instant::now();
    let params = cal.params(0.0)?;
    let lambdas: Vec<EvaluatorWeight> = config
        .shape_lambdas
        .iter()
        .map(|&l| EvaluatorWeight::new(l))
        .collect::<Result<_>>()?;
    let curves = welfare_curves(&config.k_grid, &lambdas, &params, &config.beliefs)?;
    let mut violations = Vec::new();
    for (lambda, curve) in lambdas.iter().zip(&curves) {
        let series: Vec<f64> = curve.iter().map(|row| row.average).collect();
        let shape = detect_shape(&series)?;
        if shape != CurveShape::InvertedU {
            let peak = series.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
            );
            violations.push(Violation::new(
                &[
                    ("lambda", lambda.value()),
                    ("shape_code", shape_code(shape)),
                    ("peak_k", config.k_grid[peak.0]),
                ],
                shape_code(shape),
                shape_code(CurveShape::InvertedU),
            ));
        }
    }
    let slope = local_k_derivative(
        DerivativeTarget::Aggregate(config.beliefs),
        EvaluatorWeight::new(config.slope_lambda)?,
        &params,
    )?;
    if slope.estimate < -config.weak_slack {
        violations.push(Violation::new(
            &[("lambda", config.slope_lambda), ("k", 0.0)],
            slope.estimate,
            0.0,
        ));
    }
    Ok(CheckReport::finish(
        CheckId::WelfareShape,
        Some(*cal),
        config.weak_slack,
        violations,
        Vec::new(),
        started,
    ))
}

/// Numeric code for a shape in violation records.
pub fn shape_code(shape: CurveShape) -> f64 {
    match shape {
        CurveShape::Increasing => 1.0,
        CurveShape::Decreasing => 2.0,
        CurveShape::InvertedU => 3.0,
        CurveShape::Other => 0.0,
    }
}

/// Welfare at a large `k` sits strictly below the best value on the grid.
pub fn check_eventual_decline(cal: &Calibration, config: &VerifyConfig) -> Result<CheckReport> {
    let started = Instant::now();
    let params = cal.params(0.0)?;
    let lambda = EvaluatorWeight::new(config.decline_lambda)?;
    let mut ks = config.k_grid.clone();
    ks.retain(|&k| k < config.decline_k);
    ks.push(config.decline_k);
    let curve = welfare_curve(&ks, lambda, &params, &config.beliefs)?;
    let (far, grid) = curve.split_last().expect("grid holds the decline point");
    let best = grid.iter().map(|row| row.average).fold(f64::NEG_INFINITY, f64::max);
    let mut violations = Vec::new();
    if !(far.average < best) {
        violations.push(Violation::new(
            &[("lambda", lambda.value()), ("k", config.decline_k)],
            far.average,
            best,
        ));
    }
    Ok(CheckReport::finish(
        CheckId::EventualDecline,
        Some(*cal),
        0.0,
        violations,
        Vec::new(),
        started,
    ))
}

/// The proxy cutoff stays within its error bound and on the same side of 1/2
/// as the exact cutoff on every simulated step.
pub fn check_proxy_bound_on_paths(sim: &SimulationConfig, n_paths: usize, seed: u64) -> Result<CheckReport> {
    let started = Instant::now();
    if sim.params.bonus.kind != BonusKind::Proportional {
        return Err(ModelError::ProportionalOnly("the proxy error bound check"));
    }
    let summary = ensemble_statistics_with(sim, n_paths, seed)?;
    let inputs = [
        ("k", sim.params.k()),
        ("paths", n_paths as f64),
        ("horizon", sim.horizon as f64),
    ];
    let mut violations = Vec::new();
    if summary.proxy_bound_violations > 0 {
        violations.push(Violation::new(&inputs, summary.proxy_bound_violations as f64, 0.0));
    }
    if summary.cutoff_sign_disagreements > 0 {
        violations.push(Violation::new(&inputs, summary.cutoff_sign_disagreements as f64, 0.0));
    }
    // The proxy check is independent of cost calibration, but the simulated
    // paths are not.
    let calibration = Calibration {
        cost_c: sim.params.cost_c,
        cost_f: sim.params.cost_f,
    };
    Ok(CheckReport::finish(
        CheckId::ProxyBound,
        Some(calibration),
        crate::cascade::PROXY_BOUND_SLACK,
        violations,
        Vec::new(),
        started,
    ))
}

fn run_one(id: CheckId, cal: &Calibration, config: &VerifyConfig) -> Result<CheckReport> {
    match id {
        CheckId::ThresholdSensitivity => check_threshold_sensitivity(config),
        CheckId::InvestmentNesting => check_investment_nesting(cal, config),
        CheckId::CenterInvariance => check_center_invariance(cal, config),
        CheckId::PrecisionDip => check_precision_dip(cal, config),
        CheckId::WelfareShape => check_welfare_shape(cal, config),
        CheckId::EventualDecline => check_eventual_decline(cal, config),
        CheckId::ProxyBound => {
            let sim = SimulationConfig::new(cal.params(config.sim_k)?, config.sim_horizon);
            check_proxy_bound_on_paths(&sim, config.sim_paths, config.seed)
        }
    }
}

/// Parses check ids; `None` selects every check.
pub fn parse_check_ids(ids: Option<&[String]>) -> Result<Vec<CheckId>> {
    match ids {
        None => Ok(CheckId::ALL.to_vec()),
        Some(ids) => ids.iter().map(|s| s.parse()).collect(),
    }
}

/// Runs the selected checks under each calibration, in calibration then check
/// order. Calibration-free checks run once.
pub fn run_all(calibrations: &[Calibration], ids: &[CheckId], config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    if calibrations.is_empty() {
        return Ok(reports);
    }
    for &id in ids.iter().filter(|id| id.calibration_free()) {
        reports.push(run_one(id, &calibrations[0], config)?);
    }
    for cal in calibrations {
        for &id in ids.iter().filter(|id| !id.calibration_free()) {
            log::info!("running {id} at c={}, F={}", cal.cost_c, cal.cost_f);
            reports.push(run_one(id, cal, config)?);
        }
    }
    Ok(reports)
}

/// Reports with the wall-clock field zeroed, for reproducibility comparisons.
pub fn without_runtime(reports: &[CheckReport]) -> Vec<CheckReport> {
    reports
        .iter()
        .cloned()
        .map(|mut r| {
            r.runtime_secs = 0.0;
            r
        })
        .collect()
}
