//! Composite Simpson integration with interval doubling.

/// Composite Simpson rule on `[lo, hi]` with `n` subintervals (`n` rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Doubles the Simpson subdivision until two successive estimates agree to `tol`
/// (absolute), then returns the Richardson-extrapolated value.
pub fn simpson_to_tolerance<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    if hi == lo {
        return 0.0;
    }
    let mut n = 8;
    let mut prev = simpson(&f, lo, hi, n);
    loop {
        n *= 2;
        let next = simpson(&f, lo, hi, n);
        let diff = next - prev;
        if diff.abs() < tol || n >= 1 << 20 {
            return next + diff / 15.0;
        }
        prev = next;
    }
}
