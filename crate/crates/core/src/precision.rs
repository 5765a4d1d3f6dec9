//! Endogenous precision choice.
//!
//! The agent maximizes `V(rho) = G(rho) - c/2 rho^2 - F 1{rho > 0}` over
//! `[0, rho_max]`. `V` need not be concave in `rho` once `k > 0`, so the solver
//! scans a dense grid, refines the best cell by golden-section search, polishes
//! the first-order condition by bisection, and finally compares against
//! `rho = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bonus::Popularity;
use crate::error::Result;
use crate::gaussian::Belief;
use crate::payoff::{gross_payoff, gross_rho_derivative, strategy, ModelParams};
use crate::search::{bisect_decreasing, golden_maximize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Grid points evenly spaced on `(0, linear_upper]`.
    pub linear_points: usize,
    pub linear_upper: f64,
    /// Grid points log-spaced on `(linear_upper, rho_max]`.
    pub log_points: usize,
    /// Golden-section bracket width.
    pub tolerance: f64,
    /// Investment requires the net value of information to beat `F` by more
    /// than this.
    pub tie_epsilon: f64,
    /// Times `rho_max` is doubled when the grid optimum sits on the bound.
    pub max_doublings: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            linear_points: 500,
            linear_upper: 1.0,
            log_points: 1500,
            tolerance: 1e-7,
            tie_epsilon: 1e-12,
            max_doublings: 3,
        }
    }
}

impl SolverConfig {
    pub fn grid(&self, rho_max: f64) -> Vec<f64> {
        let upper = self.linear_upper.min(rho_max);
        let mut grid: Vec<f64> = (1..=self.linear_points)
            .map(|i| upper * i as f64 / self.linear_points as f64)
            .collect();
        if rho_max > upper && self.log_points > 0 {
            let ratio = (rho_max / upper).ln();
            grid.extend((1..=self.log_points).map(|i| upper * (ratio * i as f64 / self.log_points as f64).exp()));
        }
        grid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub mu: f64,
    pub k: f64,
    pub rho_star: f64,
    /// Signal threshold at `rho_star`; infinite when the agent does not invest.
    pub s_star: f64,
    pub invests: bool,
    /// `V(rho_star)`.
    pub value_at_optimum: f64,
    /// `max_rho {G - c/2 rho^2} - G(mu, 0, k)`.
    pub net_value_of_information: f64,
    /// Best positive precision, whether or not the agent buys it.
    pub interior_rho: f64,
    /// The optimum stayed on the search bound after all doublings.
    pub hit_bound: bool,
}

struct Interior {
    rho: f64,
    value: f64,
    hit_bound: bool,
}

fn interior_optimum(mu: Belief, params: &ModelParams, pop: &Popularity, config: &SolverConfig) -> Interior {
    let objective = |rho: f64| gross_payoff(mu, rho, params, pop).gross - params.precision_cost(rho);
    let mut rho_max = params.rho_max;
    let mut doublings = 0;
    loop {
        let grid = config.grid(rho_max);
        let (best, _) =
            grid.iter()
                .map(|&r| objective(r))
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) },
                );
        let last = grid.len() - 1;
        if best == last && doublings < config.max_doublings {
            doublings += 1;
            rho_max *= 2.0;
            log::warn!(
                "precision optimum at mu={} touches rho_max; retrying with {rho_max}",
                mu.value()
            );
            continue;
        }
        let hit_bound = best == last;
        if hit_bound {
            log::warn!(
                "precision optimum at mu={} remains on the search bound {rho_max}",
                mu.value()
            );
        }
        let lo = if best == 0 { 0.0 } else { grid[best - 1] };
        let hi = grid[best.min(last - 1) + 1].min(grid[last]);
        let golden = golden_maximize(objective, lo.max(f64::MIN_POSITIVE), hi, config.tolerance);

        let psi = |rho: f64| gross_rho_derivative(mu, rho, params, pop).unwrap_or(0.0) - params.cost_c * rho;
        let pad = 10.0 * config.tolerance;
        let polished = bisect_decreasing(
            psi,
            (golden.lo - pad).max(lo).max(f64::MIN_POSITIVE),
            (golden.hi + pad).min(hi),
        );
        let rho = match polished {
            Some(r) if objective(r) >= golden.fx - 1e-14 => r,
            _ => golden.x,
        };
        return Interior {
            rho,
            value: objective(rho),
            hit_bound,
        };
    }
}

pub fn solve_precision_with(
    mu: Belief,
    params: &ModelParams,
    pop: &Popularity,
    config: &SolverConfig,
) -> EquilibriumPoint {
    let interior = interior_optimum(mu, params, pop, config);
    let uninformed = gross_payoff(mu, 0.0, params, pop).gross;
    let net_value = (interior.value - uninformed).max(0.0);
    let invests = net_value - params.cost_f > config.tie_epsilon;
    let (rho_star, value_at_optimum) = if invests {
        (interior.rho, interior.value - params.cost_f)
    } else {
        (0.0, uninformed)
    };
    EquilibriumPoint {
        mu: mu.value(),
        k: params.k(),
        rho_star,
        s_star: strategy(mu, rho_star, params, pop).s_star,
        invests,
        value_at_optimum,
        net_value_of_information: net_value,
        interior_rho: interior.rho,
        hit_bound: interior.hit_bound,
    }
}

/// Solves `rho*(mu, k)` with popularity proxied by `mu`.
pub fn solve_precision(mu: Belief, params: &ModelParams) -> EquilibriumPoint {
    let pop = Popularity::proxy(mu.value()).expect("belief lies in (0, 1)");
    solve_precision_with(mu, params, &pop, &SolverConfig::default())
}

pub fn net_value_of_information(mu: Belief, params: &ModelParams) -> f64 {
    solve_precision(mu, params).net_value_of_information
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestmentRegion {
    pub k: f64,
    pub cost_f: f64,
    pub mus: Vec<f64>,
    pub mask: Vec<bool>,
    /// Contiguous investing runs as `[mu_lo, mu_hi]` grid endpoints.
    pub intervals: Vec<(f64, f64)>,
}

impl InvestmentRegion {
    pub fn from_mask(k: f64, cost_f: f64, mus: Vec<f64>, mask: Vec<bool>) -> Self {
        let mut intervals = Vec::new();
        let mut start: Option<usize> = None;
        for i in 0..=mask.len() {
            let on = i < mask.len() && mask[i];
            match (on, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    intervals.push((mus[s], mus[i - 1]));
                    start = None;
                }
                _ => {}
            }
        }
        Self {
            k,
            cost_f,
            mus,
            mask,
            intervals,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Grid beliefs in `self` that are missing from `other`.
    pub fn not_contained_in(&self, other: &InvestmentRegion) -> Vec<f64> {
        self.mus
            .iter()
            .zip(self.mask.iter().zip(&other.mask))
            .filter(|(_, (a, b))| **a && !**b)
            .map(|(mu, _)| *mu)
            .collect()
    }
}

pub fn validate_mu_grid(mu_grid: &[f64]) -> Result<Vec<Belief>> {
    mu_grid.iter().map(|&mu| Belief::new(mu)).collect()
}

/// Equilibrium points over a belief grid, in grid order.
pub fn precision_profile(params: &ModelParams, mu_grid: &[f64]) -> Result<Vec<EquilibriumPoint>> {
    let beliefs = validate_mu_grid(mu_grid)?;
    Ok(beliefs.par_iter().map(|&mu| solve_precision(mu, params)).collect())
}

pub fn investment_region(params: &ModelParams, mu_grid: &[f64]) -> Result<InvestmentRegion> {
    let profile = precision_profile(params, mu_grid)?;
    Ok(InvestmentRegion::from_mask(
        params.k(),
        params.cost_f,
        mu_grid.to_vec(),
        profile.iter().map(|p| p.invests).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bonus::BonusSpec;
    use crate::gaussian::normal_cdf;

    fn params(k: f64, f: f64) -> ModelParams {
        ModelParams::new(BonusSpec::proportional(k).unwrap(), 0.6, f).unwrap()
    }

    fn b(mu: f64) -> Belief {
        Belief::new(mu).unwrap()
    }

    /// Brute force over rho in [0, 5] with step 1e-4 at k = 0, where the
    /// gross payoff reduces to the Bayesian closed form.
    fn bayesian_grid_oracle(mu: f64, c: f64, f: f64) -> (f64, f64) {
        let gross = |rho: f64| {
            if rho == 0.0 {
                return mu.max(1.0 - mu);
            }
            let l = -(mu / (1.0 - mu)).ln();
            let s = 0.5 + l / rho;
            let sd = rho.sqrt();
            mu * normal_cdf((1.0 - s) * sd) + (1.0 - mu) * normal_cdf(s * sd)
        };
        let mut best = (0.0, gross(0.0));
        for i in 1..=50_000 {
            let rho = i as f64 * 1e-4;
            let v = gross(rho) - 0.5 * c * rho * rho - f;
            if v > best.1 {
                best = (rho, v);
            }
        }
        best
    }

    #[test]
    fn center_example() {
        let (rho, v) = bayesian_grid_oracle(0.5, 0.6, 0.06);
        let eq = solve_precision(b(0.5), &params(0.0, 0.06));
        assert!(eq.invests);
        assert!((0.29..0.30).contains(&eq.rho_star));
        assert!((eq.rho_star - rho).abs() < 1e-4);
        assert!((eq.value_at_optimum - v).abs() < 1e-8);
        assert!((eq.net_value_of_information - 0.0809).abs() < 1e-4);
        assert_eq!(eq.s_star, 0.5);
    }

    #[test]
    fn extreme_belief_does_not_invest() {
        let (rho, v) = bayesian_grid_oracle(0.98, 0.6, 0.06);
        assert_eq!(rho, 0.0);
        let eq = solve_precision(b(0.98), &params(0.0, 0.06));
        assert!(!eq.invests);
        assert_eq!(eq.rho_star, 0.0);
        assert_eq!(eq.value_at_optimum, v);
        assert!(eq.net_value_of_information < 1e-4);
        assert_eq!(eq.s_star, f64::NEG_INFINITY);
    }

    #[test]
    fn free_information_is_bought_at_the_center() {
        let eq = solve_precision(b(0.5), &params(0.0, 0.0));
        assert!(eq.invests);
        assert!(eq.net_value_of_information > 0.0);
    }

    #[test]
    fn center_value_is_independent_of_k() {
        let base = net_value_of_information(b(0.5), &params(0.0, 0.06));
        for ki in 1..=12 {
            let k = ki as f64 * 0.1;
            let nv = net_value_of_information(b(0.5), &params(k, 0.06));
            assert!((nv - base).abs() < 1e-8, "k={k}");
            assert_eq!(
                solve_precision(b(0.5), &params(k, 0.06)).rho_star,
                solve_precision(b(0.5), &params(0.0, 0.06)).rho_star
            );
        }
    }

    #[test]
    fn optimality_and_invest_invariants() {
        for mu in [0.1, 0.3, 0.47, 0.5, 0.52, 0.7, 0.95] {
            for k in [0.0, 0.5, 1.1] {
                let p = params(k, 0.06);
                let eq = solve_precision(b(mu), &p);
                let pop = Popularity::proxy(mu).unwrap();
                let v0 = gross_payoff(b(mu), 0.0, &p, &pop).gross;
                assert!(eq.value_at_optimum >= v0);
                assert!(eq.net_value_of_information >= 0.0);
                assert_eq!(eq.invests, eq.rho_star > 0.0);
                assert_eq!(eq.invests, eq.net_value_of_information > p.cost_f);
            }
        }
    }

    #[test]
    fn interior_optimum_satisfies_first_order_condition() {
        let p = params(0.3, 0.06);
        let eq = solve_precision(b(0.52), &p);
        assert!(eq.invests);
        let pop = Popularity::proxy(0.52).unwrap();
        let psi = crate::payoff::marginal_value_psi(b(0.52), eq.rho_star, &p, &pop).unwrap();
        assert!(psi.abs() < 1e-5);
    }

    #[test]
    fn huge_fixed_cost_empties_the_region() {
        let grid: Vec<f64> = (2..=98).map(|i| i as f64 / 100.0).collect();
        let region = investment_region(&params(0.5, 10.0), &grid).unwrap();
        assert!(region.is_empty());
        assert!(region.mask.iter().all(|m| !m));
    }

    #[test]
    fn free_information_region_contains_center() {
        let grid: Vec<f64> = (2..=98).map(|i| i as f64 / 100.0).collect();
        let region = investment_region(&params(0.0, 0.0), &grid).unwrap();
        assert!(region.mask[48]);
        assert!(region.intervals.iter().any(|&(lo, hi)| lo <= 0.5 && 0.5 <= hi));
    }

    #[test]
    fn region_intervals_from_mask() {
        let r = InvestmentRegion::from_mask(
            0.0,
            0.0,
            vec![0.1, 0.2, 0.3, 0.4, 0.5],
            vec![true, false, true, true, false],
        );
        assert_eq!(r.intervals, vec![(0.1, 0.1), (0.3, 0.4)]);
        let all = InvestmentRegion::from_mask(0.0, 0.0, vec![0.1, 0.2], vec![true, true]);
        assert_eq!(all.intervals, vec![(0.1, 0.2)]);
        assert_eq!(r.not_contained_in(&all), Vec::<f64>::new());
        assert_eq!(all.not_contained_in(&r), vec![0.2]);
    }

    #[test]
    fn profile_is_symmetric() {
        let grid: Vec<f64> = (2..=98).map(|i| i as f64 / 100.0).collect();
        for k in [0.0, 0.4, 0.9] {
            let profile = precision_profile(&params(k, 0.06), &grid).unwrap();
            for (lo, hi) in profile.iter().zip(profile.iter().rev()) {
                assert!((lo.rho_star - hi.rho_star).abs() < 1e-6, "k={k} mu={}", lo.mu);
            }
        }
    }

    #[test]
    fn rejects_grid_outside_unit_interval() {
        assert!(precision_profile(&params(0.1, 0.06), &[0.2, 1.0]).is_err());
    }

    #[test]
    fn small_search_bound_is_extended() {
        let mut p = params(0.0, 0.0);
        p.rho_max = 0.1;
        let eq = solve_precision(b(0.5), &p);
        assert!(!eq.hit_bound);
        assert!((eq.rho_star - 0.295).abs() < 1e-3);
    }
}
