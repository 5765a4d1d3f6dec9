//! Contrarian bonus families and the posterior cutoffs they induce.
//!
//! An agent choosing action `a` earns `b(p_a)` on top of the correctness
//! payoff, where `p_a` is the popularity of `a` among predecessors. Comparing
//! the two actions gives the posterior threshold `c = (1 - Δ) / 2` with
//! `Δ = b(p1) - b(p0)`. Cutoffs are returned unclamped; the decision layer
//! handles values outside `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_open_unit, check_unit, ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonusKind {
    /// `k` paid iff the chosen action is strictly less popular than one half.
    FixedIndicator,
    /// `k (1 - p)`.
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BonusSpec {
    pub kind: BonusKind,
    pub k: f64,
}

impl BonusSpec {
    pub fn new(kind: BonusKind, k: f64) -> Result<Self> {
        check_non_negative("k", k)?;
        Ok(Self { kind, k })
    }

    pub fn proportional(k: f64) -> Result<Self> {
        Self::new(BonusKind::Proportional, k)
    }

    pub fn fixed(k: f64) -> Result<Self> {
        Self::new(BonusKind::FixedIndicator, k)
    }

    pub fn with_k(self, k: f64) -> Result<Self> {
        Self::new(self.kind, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopularitySource {
    ProxyFromBelief,
    EmpiricalCounts,
}

/// Fraction of predecessors choosing action 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Popularity {
    p1: f64,
    source: PopularitySource,
}

impl Popularity {
    pub fn new(p1: f64, source: PopularitySource) -> Result<Self> {
        check_unit("p1", p1)?;
        Ok(Self { p1, source })
    }

    /// Popularity proxied by the public belief, `p1 = mu`.
    pub fn proxy(mu: f64) -> Result<Self> {
        Self::new(mu, PopularitySource::ProxyFromBelief)
    }

    /// Popularity from realized action counts; an empty history has no modal
    /// action and maps to one half.
    pub fn from_counts(ones: usize, total: usize) -> Result<Self> {
        if ones > total {
            return Err(ModelError::Config(format!("{ones} ones out of {total} actions")));
        }
        let p1 = if total == 0 { 0.5 } else { ones as f64 / total as f64 };
        Self::new(p1, PopularitySource::EmpiricalCounts)
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p0(&self) -> f64 {
        1.0 - self.p1
    }

    pub fn source(&self) -> PopularitySource {
        self.source
    }

    /// Popularity of `action` (0 or 1).
    pub fn of_action(&self, action: u8) -> f64 {
        if action == 1 {
            self.p1()
        } else {
            self.p0()
        }
    }
}

/// Bonus earned by choosing an action whose popularity is `p`.
pub fn bonus_value(spec: &BonusSpec, p: f64) -> Result<f64> {
    check_unit("popularity", p)?;
    Ok(match spec.kind {
        BonusKind::FixedIndicator => {
            if p < 0.5 {
                spec.k
            } else {
                0.0
            }
        }
        BonusKind::Proportional => spec.k * (1.0 - p),
    })
}

/// `Δ = b(p1) - b(p0)`.
pub fn bonus_differential(spec: &BonusSpec, pop: &Popularity) -> f64 {
    match spec.kind {
        BonusKind::Proportional => spec.k * (1.0 - 2.0 * pop.p1()),
        BonusKind::FixedIndicator => {
            // Popularity is validated at construction, so both lookups succeed.
            let b1 = bonus_value(spec, pop.p1()).unwrap_or(0.0);
            let b0 = bonus_value(spec, pop.p0()).unwrap_or(0.0);
            b1 - b0
        }
    }
}

/// Posterior threshold for choosing action 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    /// `(1 - Δ) / 2`; may leave `[0, 1]` when `k > 1`.
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub clamped: f64,
}

impl Cutoff {
    pub fn from_raw(raw: f64) -> Self {
        Self {
            raw,
            clamped: raw.clamp(0.0, 1.0),
        }
    }
}

pub fn posterior_cutoff(spec: &BonusSpec, pop: &Popularity) -> Cutoff {
    let raw = match spec.kind {
        // Written in the linear form so that c - 1/2 = k (p1 - 1/2) holds exactly.
        BonusKind::Proportional => 0.5 + spec.k * (pop.p1() - 0.5),
        BonusKind::FixedIndicator => (1.0 - bonus_differential(spec, pop)) / 2.0,
    };
    Cutoff::from_raw(raw)
}

/// Cutoff with popularity replaced by the public belief, `1/2 + k (mu - 1/2)`.
/// Unclamped.
pub fn proxy_cutoff(k: f64, mu: f64) -> Result<f64> {
    check_non_negative("k", k)?;
    check_open_unit("mu", mu)?;
    Ok(0.5 + k * (mu - 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyErrorBound {
    /// `k |p1 - mu|`.
    pub bound: f64,
    /// `|c(p1) - c~(mu)|`.
    pub exact_gap: f64,
}

impl ProxyErrorBound {
    pub fn holds(&self, slack: f64) -> bool {
        self.exact_gap <= self.bound + slack
    }
}

pub fn proxy_error_bound(spec: &BonusSpec, p1: f64, mu: f64) -> Result<ProxyErrorBound> {
    if spec.kind != BonusKind::Proportional {
        return Err(ModelError::ProportionalOnly("the proxy error bound"));
    }
    let pop = Popularity::new(p1, PopularitySource::EmpiricalCounts)?;
    let exact = posterior_cutoff(spec, &pop).raw;
    let proxy = proxy_cutoff(spec.k, mu)?;
    Ok(ProxyErrorBound {
        bound: spec.k * (p1 - mu).abs(),
        exact_gap: (exact - proxy).abs(),
    })
}
