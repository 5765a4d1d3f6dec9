//! Acceptance criteria, one verdict line each. Exits nonzero if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use contrarian::bonus::proxy_cutoff;
use contrarian::cascade::{ensemble_statistics_with, simulate_ensemble, SimulationConfig};
use contrarian::cli::output::PathWriter;
use contrarian::gaussian::{signal_threshold, threshold_k_sensitivity, Belief};
use contrarian::precision::solve_precision;
use contrarian::verify::{
    check_eventual_decline, check_investment_nesting, check_precision_dip, check_welfare_shape, Calibration,
    CheckReport, VerifyConfig,
};
use contrarian::welfare::{compare_published_table, uniform_grid, BeliefDistribution};

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn within(started: Instant, limit: Duration, mut v: Verdict) -> Verdict {
    let elapsed = started.elapsed();
    if elapsed > limit {
        v.passed = false;
        v.detail.push_str(&format!("; runtime {elapsed:?} exceeds {limit:?}"));
    } else {
        v.detail.push_str(&format!("; {:.2}s", elapsed.as_secs_f64()));
    }
    v
}

fn summarize(r: &CheckReport) -> String {
    let first = r
        .violations
        .first()
        .map(|v| {
            format!(
                ", first {:?} observed={:.6e} expected={:.6e}",
                v.inputs, v.observed, v.expected
            )
        })
        .unwrap_or_default();
    format!("{} violations, {} skipped{first}", r.violations.len(), r.skipped.len())
}

/// Closed-form proxy cutoff and signal threshold, written out independently
/// of the library.
fn oracle_threshold(mu: f64, k: f64, rho: f64) -> f64 {
    let c = 0.5 + k * (mu - 0.5);
    let logit = |p: f64| (p / (1.0 - p)).ln();
    0.5 + (logit(c) - logit(mu)) / rho
}

fn criterion_1() -> Verdict {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let center = Belief::new(0.5).unwrap();
    for k in uniform_grid(0.0, 2.0, 201) {
        worst = worst.max((proxy_cutoff(k, 0.5).unwrap() - 0.5).abs());
        for rho in [0.5, 1.0, 2.0, 5.0] {
            let c = proxy_cutoff(k, 0.5).unwrap();
            worst = worst.max((signal_threshold(center, c, rho).unwrap() - 0.5).abs());
        }
    }
    within(
        started,
        Duration::from_secs(1),
        Verdict::new(
            worst <= 1e-12,
            format!("max |s* - 1/2|, |c~ - 1/2| = {worst:.3e} (tol 1e-12)"),
        ),
    )
}

fn criterion_2() -> Verdict {
    let started = Instant::now();
    let h = 1e-5;
    let (mut worst_rel, mut sign_failures, mut cells) = (0.0f64, 0, 0);
    for mu in uniform_grid(0.3, 0.7, 41) {
        for k in uniform_grid(0.0, 1.0, 21) {
            for rho in [0.5, 1.0, 2.0] {
                cells += 1;
                let analytic = threshold_k_sensitivity(Belief::new(mu).unwrap(), k, rho).unwrap();
                let numeric = (oracle_threshold(mu, k + h, rho) - oracle_threshold(mu, k - h, rho)) / (2.0 * h);
                if (mu - 0.5).abs() < 1e-12 {
                    if analytic.abs() > 1e-9 || numeric.abs() > 1e-9 {
                        sign_failures += 1;
                    }
                    continue;
                }
                worst_rel = worst_rel.max((analytic - numeric).abs() / analytic.abs());
                if analytic.signum() != (mu - 0.5).signum() {
                    sign_failures += 1;
                }
            }
        }
    }
    within(
        started,
        Duration::from_secs(5),
        Verdict::new(
            worst_rel < 1e-6 && sign_failures == 0,
            format!("{cells} cells, max rel err {worst_rel:.3e} (tol 1e-6), {sign_failures} sign failures"),
        ),
    )
}

fn criterion_3() -> Verdict {
    let started = Instant::now();
    let config = VerifyConfig::default();
    let mut passed = true;
    let mut parts = Vec::new();
    for cal in [Calibration::LIGHT_COST, Calibration::HEAVY_COST] {
        let r = check_investment_nesting(&cal, &config).unwrap();
        passed &= r.passed;
        parts.push(format!("F={}: {}", cal.cost_f, summarize(&r)));
    }
    within(started, Duration::from_secs(60), Verdict::new(passed, parts.join("; ")))
}

fn criterion_4() -> Verdict {
    let center = Belief::new(0.5).unwrap();
    let values: Vec<f64> = uniform_grid(0.0, 1.2, 121)
        .into_iter()
        .map(|k| solve_precision(center, &Calibration::LIGHT_COST.params(k).unwrap()).net_value_of_information)
        .collect();
    let spread =
        values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - values.iter().cloned().fold(f64::INFINITY, f64::min);
    Verdict::new(
        spread <= 1e-8,
        format!(
            "net value at mu=1/2 = {:.10}, spread {spread:.3e} over 121 k (tol 1e-8)",
            values[0]
        ),
    )
}

fn criterion_5() -> Verdict {
    let r = check_precision_dip(&Calibration::LIGHT_COST, &VerifyConfig::default()).unwrap();
    Verdict::new(r.passed, summarize(&r))
}

fn criterion_6() -> Verdict {
    let started = Instant::now();
    let r = check_welfare_shape(&Calibration::HEAVY_COST, &VerifyConfig::default()).unwrap();
    within(started, Duration::from_secs(180), Verdict::new(r.passed, summarize(&r)))
}

fn criterion_7() -> Verdict {
    let r = check_eventual_decline(&Calibration::HEAVY_COST, &VerifyConfig::default()).unwrap();
    Verdict::new(r.passed, summarize(&r))
}

fn criterion_8() -> Verdict {
    let rows = compare_published_table(
        &Calibration::LIGHT_COST.params(0.0).unwrap(),
        &BeliefDistribution::default(),
    )
    .unwrap();
    for r in &rows {
        println!(
            "    k={:.1} avg={:.4} min={:.4} max={:.4} | published {:.4}/{:.4}/{:.4} | delta {:+.4}",
            r.k, r.avg, r.min, r.max, r.paper_avg, r.paper_min, r.paper_max, r.delta
        );
    }
    let in_range = rows.len() == 5 && rows.iter().all(|r| r.avg > 0.4 && r.avg < 1.0);
    let rising = rows[0].avg <= rows[1].avg && rows[1].avg <= rows[2].avg;
    Verdict::new(
        in_range && rising,
        format!("5 rows, averages in (0.4, 1.0): {in_range}, weakly increasing over k in {{0, 0.2, 0.4}}: {rising}"),
    )
}

fn criterion_9() -> Verdict {
    let started = Instant::now();
    let sim = SimulationConfig::new(Calibration::LIGHT_COST.params(0.4).unwrap(), 100);
    let s = ensemble_statistics_with(&sim, 10_000, 20_240_601).unwrap();
    let a = s.uninformative_moves == 0;
    let b = s.proxy_bound_violations == 0 && s.cutoff_sign_disagreements == 0;
    let c = s.martingale_residual <= 3.0 * s.martingale_standard_error;

    let csv = || {
        let paths = simulate_ensemble(&sim, 300, 77).unwrap();
        let mut buf = Vec::new();
        let mut w = PathWriter::new(&mut buf).unwrap();
        for (i, p) in paths.iter().enumerate() {
            w.write_path(i, p).unwrap();
        }
        w.finish().unwrap();
        buf
    };
    let d = csv() == csv();
    within(
        started,
        Duration::from_secs(180),
        Verdict::new(
            a && b && c && d,
            format!(
                "(a) {} moved uninformative steps; (b) {} bound violations, {} sign disagreements, max gap {:.4}; \
                 (c) residual {:.3e} vs 3 SE {:.3e}; (d) identical CSV bytes: {d}",
                s.uninformative_moves,
                s.proxy_bound_violations,
                s.cutoff_sign_disagreements,
                s.proxy_gap_max,
                s.martingale_residual,
                3.0 * s.martingale_standard_error
            ),
        ),
    )
}

fn phi(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Expected utility net of costs, built directly from the model primitives
/// under the proxy popularity.
fn oracle_value(mu: f64, k: f64, c: f64, f: f64, rho: f64) -> f64 {
    let cut = 0.5 + k * (mu - 0.5);
    let (bonus1, bonus0) = (k * (1.0 - mu), k * mu);
    if rho == 0.0 {
        let act_one = mu >= cut;
        return if act_one { mu + bonus1 } else { 1.0 - mu + bonus0 };
    }
    let (p1_if_1, p1_if_0) = if cut >= 1.0 {
        (0.0, 0.0)
    } else if cut <= 0.0 {
        (1.0, 1.0)
    } else {
        let s = oracle_threshold(mu, k, rho);
        (phi((1.0 - s) * rho.sqrt()), phi(-s * rho.sqrt()))
    };
    let correct = mu * p1_if_1 + (1.0 - mu) * (1.0 - p1_if_0);
    let p1 = mu * p1_if_1 + (1.0 - mu) * p1_if_0;
    correct + p1 * bonus1 + (1.0 - p1) * bonus0 - 0.5 * c * rho * rho - f
}

fn criterion_10() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (c, f) = (Calibration::LIGHT_COST.cost_c, Calibration::LIGHT_COST.cost_f);
    let mut worst_rho: f64 = 0.0;
    let mut worst_value: f64 = 0.0;
    for _ in 0..50 {
        let mu: f64 = rng.random_range(0.05..0.95);
        let k: f64 = rng.random_range(0.0..1.2);
        let params = Calibration::LIGHT_COST.params(k).unwrap();
        let eq = solve_precision(Belief::new(mu).unwrap(), &params);

        let mut best = (0.0, oracle_value(mu, k, c, f, 0.0));
        let n = (params.rho_max / 1e-4).round() as usize;
        for i in 1..=n {
            let rho = i as f64 * 1e-4;
            let v = oracle_value(mu, k, c, f, rho);
            if v > best.1 {
                best = (rho, v);
            }
        }
        worst_rho = worst_rho.max((eq.rho_star - best.0).abs());
        worst_value = worst_value.max((eq.value_at_optimum - best.1).abs());
    }
    Verdict::new(
        worst_rho < 1e-3 && worst_value < 1e-8,
        format!(
            "50 draws, max |d rho*| {worst_rho:.3e} (tol 1e-3), max |dV| {worst_value:.3e} (tol 1e-8); {:.2}s",
            started.elapsed().as_secs_f64()
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 threshold identities at the center", criterion_1),
        ("2 threshold sensitivity vs finite differences", criterion_2),
        ("3 investment-region nesting in k", criterion_3),
        ("4 center invariance of the value of information", criterion_4),
        ("5 precision dip near the center", criterion_5),
        ("6 welfare shape and slope at k = 0", criterion_6),
        ("7 eventual welfare decline", criterion_7),
        ("8 light-cost table comparison", criterion_8),
        ("9 simulator soundness", criterion_9),
        ("10 solver vs brute force", criterion_10),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let v = run();
        println!(
            "{} criterion {name}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.passed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
