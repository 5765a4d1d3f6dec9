//! One-dimensional bracketing searches used by the precision solver.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenResult {
    pub x: f64,
    pub fx: f64,
    /// Final bracket `[lo, hi]` containing the maximizer.
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`, stopping once
/// the bracket is narrower than `tol`.
pub fn golden_maximize<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> GoldenResult
where
    F: Fn(f64) -> f64,
{
    debug_assert!(lo <= hi && tol > 0.0);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evaluations = 2;
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        evaluations += 1;
        // Bracket stops shrinking once it reaches floating-point resolution.
        if x1 >= x2 {
            break;
        }
    }
    let (x, fx) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    GoldenResult {
        x,
        fx,
        lo,
        hi,
        evaluations,
    }
}

/// Bisection for a decreasing sign change: requires `g(lo) > 0 > g(hi)`.
/// Runs to floating-point resolution.
pub fn bisect_decreasing<G>(g: G, mut lo: f64, mut hi: f64) -> Option<f64>
where
    G: Fn(f64) -> f64,
{
    if !(g(lo) > 0.0 && g(hi) < 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm > 0.0 {
            lo = mid;
        } else if gm < 0.0 {
            hi = mid;
        } else {
            return Some(mid);
        }
    }
    Some(0.5 * (lo + hi))
}
