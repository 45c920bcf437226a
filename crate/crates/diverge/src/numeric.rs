//! Scalar bracketing and line-search primitives shared by the solvers.

/// Grid values `0, h, 2h, ...` up to and including `end`.
pub(crate) fn grid_axis(end: f64, h: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity((end / h) as usize + 2);
    let mut k = 0u64;
    loop {
        let x = k as f64 * h;
        if x >= end - 1e-12 * end.max(1.0) {
            break;
        }
        v.push(x);
        k += 1;
    }
    v.push(end);
    v
}

/// Bisects `[lo, hi]` assuming `f(lo) <= 0 <= f(hi)` until the bracket is
/// narrower than `tol`; returns the bracket midpoint.
pub(crate) fn bisect(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    debug_assert!(lo <= hi);
    // ~60 halvings reach f64 resolution on unit-scale intervals; the cap
    // guards degenerate tolerances.
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket at float resolution
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section minimization on `[a, b]`, shrinking the interval to `tol`.
/// Returns the best `(x, f(x))` among all evaluated points, including the
/// final bracket endpoints (so boundary minima are hit exactly).
pub(crate) fn golden_min(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    debug_assert!(a <= b);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let (mut best_x, mut best_f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for _ in 0..400 {
        if b - a <= tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
            if f1 < best_f {
                best_x = x1;
                best_f = f1;
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
            if f2 < best_f {
                best_x = x2;
                best_f = f2;
            }
        }
    }
    for x in [a, b] {
        let fx = f(x);
        if fx < best_f {
            best_x = x;
            best_f = fx;
        }
    }
    (best_x, best_f)
}
