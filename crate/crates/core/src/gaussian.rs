//! Gaussian signal technology.
//!
//! Signals are `s | theta ~ N(theta, 1/rho)` with state means 0 and 1, so the
//! log-likelihood ratio is `rho (s - 1/2)` and a posterior cutoff `c` at public
//! belief `mu` becomes the signal threshold
//! `s* = 1/2 + (logit(c) - logit(mu)) / rho`.

use serde::{Deserialize, Serialize};

use crate::bonus::proxy_cutoff;
use crate::error::{check_open_unit, ModelError, Result};

/// Default clip applied to probabilities entering `logit`.
pub const PROBABILITY_CLIP: f64 = 1e-9;

/// Public probability that the state is 1, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(f64);

impl Belief {
    pub fn new(mu: f64) -> Result<Self> {
        check_open_unit("mu", mu).map(Self)
    }

    /// Clamps `mu` into `[eps, 1 - eps]`. Rejects values outside `[0, 1]`.
    pub fn clipped(mu: f64, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(ModelError::Domain {
                name: "mu",
                value: mu,
                domain: "[0, 1]",
            });
        }
        Ok(Self(mu.clamp(eps, 1.0 - eps)))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn logit(self) -> f64 {
        (self.0 / (1.0 - self.0)).ln()
    }

    /// The mirrored belief `1 - mu`.
    pub fn mirror(self) -> Self {
        Self(1.0 - self.0)
    }
}

pub fn logit(p: f64) -> Result<f64> {
    check_open_unit("p", p)?;
    Ok((p / (1.0 - p)).ln())
}

pub fn inverse_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Standard normal cdf via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

fn clip_cutoff(c: f64) -> f64 {
    let clipped = c.clamp(PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP);
    if clipped != c {
        log::warn!("posterior cutoff {c:e} clipped to {clipped:e} before logit");
    }
    clipped
}

/// Signal threshold for a raw (unclamped) posterior cutoff.
///
/// A cutoff at or above 1 forces action 0 and yields `+inf`; at or below 0 it
/// forces action 1 and yields `-inf`.
pub fn signal_threshold(mu: Belief, cutoff: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(ModelError::NoSignal(rho));
    }
    if cutoff >= 1.0 {
        return Ok(f64::INFINITY);
    }
    if cutoff <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let c = clip_cutoff(cutoff);
    let tau = (c / (1.0 - c)).ln();
    Ok(0.5 + (tau - mu.logit()) / rho)
}

/// Analytic `d s* / d k` for the proportional bonus under the proxy cutoff.
pub fn threshold_k_sensitivity(mu: Belief, k: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(ModelError::NoSignal(rho));
    }
    let c = proxy_cutoff(k, mu.value())?;
    if !(c > 0.0 && c < 1.0) {
        return Err(ModelError::Domain {
            name: "proxy cutoff",
            value: c,
            domain: "(0, 1)",
        });
    }
    Ok((mu.value() - 0.5) / (rho * c * (1.0 - c)))
}

/// Choice probabilities of action 1 under a signal-threshold strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionProbabilities {
    pub p1_given_theta1: f64,
    pub p1_given_theta0: f64,
    pub p1_unconditional: f64,
}

impl ActionProbabilities {
    /// Strategy that plays `action` regardless of the signal.
    pub fn forced(action: u8) -> Self {
        let p = if action == 1 { 1.0 } else { 0.0 };
        Self {
            p1_given_theta1: p,
            p1_given_theta0: p,
            p1_unconditional: p,
        }
    }

    /// `(P(a | theta = 1), P(a | theta = 0))`.
    pub fn likelihoods(&self, action: u8) -> (f64, f64) {
        if action == 1 {
            (self.p1_given_theta1, self.p1_given_theta0)
        } else {
            (1.0 - self.p1_given_theta1, 1.0 - self.p1_given_theta0)
        }
    }

    pub fn p0_unconditional(&self) -> f64 {
        1.0 - self.p1_unconditional
    }
}

pub fn action_probabilities(mu: Belief, s_star: f64, rho: f64) -> ActionProbabilities {
    let (p11, p10) = if s_star == f64::INFINITY {
        (0.0, 0.0)
    } else if s_star == f64::NEG_INFINITY {
        (1.0, 1.0)
    } else {
        let sd = rho.sqrt();
        (normal_cdf((1.0 - s_star) * sd), normal_cdf(-s_star * sd))
    };
    let m = mu.value();
    ActionProbabilities {
        p1_given_theta1: p11,
        p1_given_theta0: p10,
        p1_unconditional: m * p11 + (1.0 - m) * p10,
    }
}

/// Posterior belief after observing `action` played under `probs`.
pub fn bayes_update(mu: Belief, action: u8, probs: &ActionProbabilities) -> Result<Belief> {
    let (l1, l0) = probs.likelihoods(action);
    let m = mu.value();
    let num = m * l1;
    let den = num + (1.0 - m) * l0;
    if !(den > 0.0) {
        return Err(ModelError::ZeroLikelihood);
    }
    if l1 == l0 {
        return Ok(mu);
    }
    Belief::clipped(num / den, PROBABILITY_CLIP)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn b(mu: f64) -> Belief {
        Belief::new(mu).unwrap()
    }

    #[test]
    fn logit_examples() {
        assert_eq!(logit(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(logit(0.6).unwrap(), 0.405_465_108_108_164_38, epsilon = 1e-15);
        assert_eq!(inverse_logit(0.0), 0.5);
        assert!(logit(0.0).is_err());
        assert!(logit(1.0).is_err());
        assert!(Belief::new(1.0).is_err());
        assert_eq!(Belief::clipped(1.0, 1e-9).unwrap().value(), 1.0 - 1e-9);
        assert!(Belief::clipped(1.5, 1e-9).is_err());
    }

    // Reference values from a 40-digit evaluation of the normal cdf.
    const CDF_REFERENCE: [(f64, f64); 12] = [
        (-8.0, 6.220_960_574_271_784e-16),
        (-5.0, 2.866_515_718_791_939_1e-7),
        (-3.0, 0.001_349_898_031_630_094_5),
        (-1.5, 0.066_807_201_268_858_066),
        (-0.5, 0.308_537_538_725_986_9),
        (0.0, 0.5),
        (0.5, 0.691_462_461_274_013_1),
        (0.905_465, 0.817_390_453_055_253_95),
        (1.0, 0.841_344_746_068_542_9),
        (2.0, 0.977_249_868_051_820_8),
        (3.5, 0.999_767_370_920_964_5),
        (6.0, 0.999_999_999_013_412_4),
    ];

    #[test]
    fn cdf_matches_high_precision_reference() {
        for (x, want) in CDF_REFERENCE {
            let got = normal_cdf(x);
            assert!((got - want).abs() <= 1e-10, "x={x} got={got} want={want}");
        }
        assert_eq!(normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(normal_cdf(f64::NEG_INFINITY), 0.0);
        assert_abs_diff_eq!(normal_pdf(0.0), 0.398_942_280_401_432_7, epsilon = 1e-15);
    }

    #[test]
    fn threshold_examples() {
        for rho in [0.5, 1.0, 2.0, 5.0] {
            assert_eq!(signal_threshold(b(0.5), 0.5, rho).unwrap(), 0.5);
        }
        assert_abs_diff_eq!(
            signal_threshold(b(0.6), 0.55, 2.0).unwrap(),
            0.397_602_793_676_993_4,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            signal_threshold(b(0.6), 0.5, 1.0).unwrap(),
            0.094_534_891_891_835_62,
            epsilon = 1e-12
        );
        assert_eq!(signal_threshold(b(0.6), 1.3, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(signal_threshold(b(0.6), -0.1, 1.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(signal_threshold(b(0.6), 0.5, 0.0), Err(ModelError::NoSignal(0.0)));
    }

    #[test]
    fn sensitivity_examples() {
        assert_eq!(threshold_k_sensitivity(b(0.5), 0.7, 3.0).unwrap(), 0.0);
        assert_abs_diff_eq!(threshold_k_sensitivity(b(0.6), 0.0, 1.0).unwrap(), 0.4, epsilon = 1e-12);
        // c~ = 0.48, so -0.1 / (2 * 0.48 * 0.52).
        assert_abs_diff_eq!(
            threshold_k_sensitivity(b(0.4), 0.2, 2.0).unwrap(),
            -0.200_320_512_820_512_84,
            epsilon = 1e-12
        );
        // c~ = 1/2 + 3 (0.9 - 1/2) leaves (0, 1).
        assert!(threshold_k_sensitivity(b(0.9), 3.0, 1.0).is_err());
    }

    #[test]
    fn sensitivity_matches_central_differences() {
        let h = 1e-5;
        for mi in 0..=8 {
            let mu = b(0.3 + 0.05 * mi as f64);
            for ki in 0..=5 {
                let k = 0.2 * ki as f64;
                for rho in [0.5, 1.0, 2.0] {
                    // The linear cutoff extends to k < 0, which the central stencil needs at k = 0.
                    let s = |k: f64| signal_threshold(mu, 0.5 + k * (mu.value() - 0.5), rho).unwrap();
                    let fd = (s(k + h) - s(k - h)) / (2.0 * h);
                    let exact = threshold_k_sensitivity(mu, k, rho).unwrap();
                    if exact == 0.0 {
                        assert!(fd.abs() < 1e-9);
                    } else {
                        assert_relative_eq!(fd, exact, max_relative = 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn action_probability_examples() {
        let p = action_probabilities(b(0.5), 0.5, 1.0);
        assert_abs_diff_eq!(p.p1_given_theta1, 0.691_462_461_274_013_1, epsilon = 1e-12);
        assert_abs_diff_eq!(p.p1_given_theta0, 0.308_537_538_725_986_9, epsilon = 1e-12);
        assert_abs_diff_eq!(p.p1_unconditional, 0.5, epsilon = 1e-15);

        let p = action_probabilities(b(0.3), f64::INFINITY, 2.0);
        assert_eq!(
            (p.p1_given_theta1, p.p1_given_theta0, p.p1_unconditional),
            (0.0, 0.0, 0.0)
        );

        let p = action_probabilities(b(0.6), 0.094_534_891_891_835_62, 1.0);
        assert_abs_diff_eq!(p.p1_given_theta1, 0.817_390_481_679_674_9, epsilon = 1e-10);
    }

    #[test]
    fn bayes_examples() {
        let mu = b(0.5);
        let probs = action_probabilities(mu, 0.5, 1.0);
        let up = bayes_update(mu, 1, &probs).unwrap();
        let down = bayes_update(mu, 0, &probs).unwrap();
        assert_abs_diff_eq!(up.value(), normal_cdf(0.5), epsilon = 1e-12);
        assert_abs_diff_eq!(down.value(), normal_cdf(-0.5), epsilon = 1e-12);

        let forced = ActionProbabilities::forced(1);
        let mu = b(0.731);
        assert_eq!(bayes_update(mu, 1, &forced).unwrap(), mu);
        assert_eq!(bayes_update(mu, 0, &forced), Err(ModelError::ZeroLikelihood));
    }

    proptest! {
        #[test]
        fn inverse_logit_round_trips(p in 1e-6..(1.0 - 1e-6)) {
            prop_assert!((inverse_logit(logit(p).unwrap()) - p).abs() <= 1e-12);
        }

        #[test]
        fn cdf_is_monotone(x in -10.0..10.0f64, dx in 0.0..3.0f64) {
            prop_assert!(normal_cdf(x + dx) >= normal_cdf(x));
            prop_assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
        }

        #[test]
        fn mlrp_ordering(mu in 0.01..0.99f64, s in -20.0..20.0f64, rho in 0.01..50.0f64) {
            let p = action_probabilities(b(mu), s, rho);
            prop_assert!(p.p1_given_theta1 >= p.p1_given_theta0);
            for v in [p.p1_given_theta1, p.p1_given_theta0, p.p1_unconditional] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn proxy_threshold_monotone_in_k(mu in 0.05..0.95f64, k in 0.0..0.9f64, dk in 0.001..0.1f64, rho in 0.1..5.0f64) {
            let mu = b(mu);
            let s = |k: f64| signal_threshold(mu, proxy_cutoff(k, mu.value()).unwrap(), rho).unwrap();
            let c = |k: f64| proxy_cutoff(k, mu.value()).unwrap();
            if mu.value() > 0.5 {
                prop_assert!(c(k + dk) > c(k));
                prop_assert!(s(k + dk) > s(k));
            } else if mu.value() < 0.5 {
                prop_assert!(c(k + dk) < c(k));
                prop_assert!(s(k + dk) < s(k));
            }
        }
    }
}
