//! Gross payoff `G(mu, rho, k)`, the net value `V` under fixed plus quadratic
//! precision costs, and the marginal value of precision.

use serde::{Deserialize, Serialize};

use crate::bonus::{bonus_value, posterior_cutoff, BonusSpec, Cutoff, Popularity, PopularitySource};
use crate::error::{check_non_negative, ModelError, Result};
use crate::gaussian::{
    action_probabilities, normal_pdf, signal_threshold, ActionProbabilities, Belief, PROBABILITY_CLIP,
};

pub const DEFAULT_RHO_MAX: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub bonus: BonusSpec,
    /// Quadratic precision cost coefficient: `C(rho) = c/2 rho^2`.
    pub cost_c: f64,
    /// Fixed cost paid whenever `rho > 0`.
    pub cost_f: f64,
    /// Upper end of the precision search.
    pub rho_max: f64,
    pub popularity_mode: PopularitySource,
}

impl ModelParams {
    pub fn new(bonus: BonusSpec, cost_c: f64, cost_f: f64) -> Result<Self> {
        Self {
            bonus,
            cost_c,
            cost_f,
            rho_max: DEFAULT_RHO_MAX,
            popularity_mode: PopularitySource::ProxyFromBelief,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        check_non_negative("k", self.bonus.k)?;
        if !(self.cost_c > 0.0) || !self.cost_c.is_finite() {
            return Err(ModelError::Domain {
                name: "cost_c",
                value: self.cost_c,
                domain: "(0, inf)",
            });
        }
        check_non_negative("cost_f", self.cost_f)?;
        if !(self.rho_max > 0.0) || !self.rho_max.is_finite() {
            return Err(ModelError::Domain {
                name: "rho_max",
                value: self.rho_max,
                domain: "(0, inf)",
            });
        }
        Ok(self)
    }

    pub fn k(&self) -> f64 {
        self.bonus.k
    }

    pub fn with_k(self, k: f64) -> Result<Self> {
        Ok(Self {
            bonus: self.bonus.with_k(k)?,
            ..self
        })
    }

    pub fn with_fixed_cost(self, cost_f: f64) -> Result<Self> {
        Self { cost_f, ..self }.validated()
    }

    pub fn precision_cost(&self, rho: f64) -> f64 {
        0.5 * self.cost_c * rho * rho
    }

    pub fn fixed_cost(&self, rho: f64) -> f64 {
        if rho > 0.0 {
            self.cost_f
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffBreakdown {
    pub correctness: f64,
    pub bonus_expectation: f64,
    pub gross: f64,
    pub cost_precision: f64,
    pub cost_fixed: f64,
    pub net: f64,
}

impl PayoffBreakdown {
    fn gross_only(correctness: f64, bonus_expectation: f64) -> Self {
        let gross = correctness + bonus_expectation;
        Self {
            correctness,
            bonus_expectation,
            gross,
            cost_precision: 0.0,
            cost_fixed: 0.0,
            net: gross,
        }
    }

    fn with_costs(self, cost_precision: f64, cost_fixed: f64) -> Self {
        Self {
            cost_precision,
            cost_fixed,
            net: self.gross - cost_precision - cost_fixed,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UninformedChoice {
    pub action: u8,
    pub correctness: f64,
    pub bonus: f64,
}

/// Action taken on the public belief alone: 1 iff `mu >= c`, ties to 1.
pub fn uninformed_action(mu: Belief, params: &ModelParams, pop: &Popularity) -> UninformedChoice {
    let cutoff = posterior_cutoff(&params.bonus, pop);
    let action = if mu.value() >= cutoff.raw { 1 } else { 0 };
    let correctness = if action == 1 { mu.value() } else { 1.0 - mu.value() };
    UninformedChoice {
        action,
        correctness,
        bonus: bonus_value(&params.bonus, pop.of_action(action)).unwrap_or(0.0),
    }
}

/// The optimal cutoff strategy at a given precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub cutoff: Cutoff,
    /// `+inf` / `-inf` when the action does not depend on the signal.
    pub s_star: f64,
    pub probs: ActionProbabilities,
}

pub fn strategy(mu: Belief, rho: f64, params: &ModelParams, pop: &Popularity) -> Strategy {
    let cutoff = posterior_cutoff(&params.bonus, pop);
    if rho > 0.0 {
        let s_star = signal_threshold(mu, cutoff.raw, rho).expect("rho > 0");
        Strategy {
            cutoff,
            s_star,
            probs: action_probabilities(mu, s_star, rho),
        }
    } else {
        let action = uninformed_action(mu, params, pop).action;
        Strategy {
            cutoff,
            s_star: if action == 1 { f64::NEG_INFINITY } else { f64::INFINITY },
            probs: ActionProbabilities::forced(action),
        }
    }
}

fn expected_bonus(params: &ModelParams, pop: &Popularity, probs: &ActionProbabilities) -> f64 {
    let b1 = bonus_value(&params.bonus, pop.p1()).unwrap_or(0.0);
    let b0 = bonus_value(&params.bonus, pop.p0()).unwrap_or(0.0);
    probs.p1_unconditional * b1 + probs.p0_unconditional() * b0
}

/// `G(mu, rho, k)` split into correctness and expected bonus; costs are zero.
pub fn gross_payoff(mu: Belief, rho: f64, params: &ModelParams, pop: &Popularity) -> PayoffBreakdown {
    let play = strategy(mu, rho, params, pop);
    let m = mu.value();
    let probs = &play.probs;
    let correctness = m * probs.p1_given_theta1 + (1.0 - m) * (1.0 - probs.p1_given_theta0);
    PayoffBreakdown::gross_only(correctness, expected_bonus(params, pop, probs))
}

/// `V = G - c/2 rho^2 - F 1{rho > 0}`.
pub fn value(mu: Belief, rho: f64, params: &ModelParams, pop: &Popularity) -> PayoffBreakdown {
    gross_payoff(mu, rho, params, pop).with_costs(params.precision_cost(rho), params.fixed_cost(rho))
}

/// `Psi = dG/drho - c rho`, with `dG/drho` from central differences combined
/// by one Richardson step.
pub fn marginal_value_psi(mu: Belief, rho: f64, params: &ModelParams, pop: &Popularity) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(ModelError::NoSignal(rho));
    }
    let h = (1e-5f64).max(1e-4 * rho).min(0.5 * rho);
    let g = |r: f64| gross_payoff(mu, r, params, pop).gross;
    let central = |h: f64| (g(rho + h) - g(rho - h)) / (2.0 * h);
    let coarse = central(h);
    let fine = central(0.5 * h);
    Ok((4.0 * fine - coarse) / 3.0 - params.cost_c * rho)
}

/// Closed-form `dG/drho` at `rho > 0`.
///
/// With `L = logit(c) - logit(mu)`, `z1 = sqrt(rho)/2 - L/sqrt(rho)` and
/// `z0 = -sqrt(rho)/2 - L/sqrt(rho)` give `P(a=1|theta=1) = Phi(z1)` and
/// `P(a=1|theta=0) = Phi(z0)`.
pub fn gross_rho_derivative(mu: Belief, rho: f64, params: &ModelParams, pop: &Popularity) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(ModelError::NoSignal(rho));
    }
    let cutoff = posterior_cutoff(&params.bonus, pop).raw;
    if cutoff >= 1.0 || cutoff <= 0.0 {
        return Ok(0.0);
    }
    let c = cutoff.clamp(PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP);
    let lr = (c / (1.0 - c)).ln() - mu.logit();
    let sr = rho.sqrt();
    let z1 = 0.5 * sr - lr / sr;
    let z0 = -0.5 * sr - lr / sr;
    let tail = lr / (2.0 * rho * sr);
    let dz1 = 0.25 / sr + tail;
    let dz0 = -0.25 / sr + tail;
    let m = mu.value();
    let d_p11 = normal_pdf(z1) * dz1;
    let d_p10 = normal_pdf(z0) * dz0;
    let b1 = bonus_value(&params.bonus, pop.p1()).unwrap_or(0.0);
    let b0 = bonus_value(&params.bonus, pop.p0()).unwrap_or(0.0);
    Ok(m * d_p11 - (1.0 - m) * d_p10 + (b1 - b0) * (m * d_p11 + (1.0 - m) * d_p10))
}
