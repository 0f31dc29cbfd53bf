//! Golden-section search for unimodal 1-D minimization.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimize `f` on `[lo, hi]`, shrinking the bracket until it is
/// narrower than `xtol`. Returns `(argmin, min)`. On a constant or flat
/// objective the bracket midpoint is returned; callers that need a
/// specific tie-break compare endpoint values themselves.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> (f64, f64) {
    assert!(lo.is_finite() && hi.is_finite() && lo <= hi);
    if hi - lo <= xtol {
        let x = 0.5 * (lo + hi);
        return (x, f(x));
    }
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > xtol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let (x, v) = golden_min(|x| (x - 0.3).powi(2) + 2.0, 0.0, 1.0, 1e-10);
        // function values near a smooth minimum flatten below f64
        // resolution, so the argmin is only sqrt(epsilon)-accurate
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_minimum() {
        let (x, _) = golden_min(|x| x, 0.25, 1.0, 1e-10);
        assert!((x - 0.25).abs() < 1e-8);
    }

    #[test]
    fn degenerate_bracket() {
        let (x, v) = golden_min(|x| x * x, 0.5, 0.5, 1e-9);
        assert_eq!(x, 0.5);
        assert_eq!(v, 0.25);
    }
}
