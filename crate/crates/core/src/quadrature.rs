//! Gauss–Legendre rules.

use crate::scalar::{abs, Real};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre_unit<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre(n);
    let half = T::lit(0.5);
    (x.iter().map(|&t| half * (t + T::one())).collect(), w.iter().map(|&v| half * v).collect())
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes ascending. Newton iteration on the Legendre recurrence, computed
/// in `f64` and converted.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes.into_iter().map(T::lit).collect(), weights.into_iter().map(T::lit).collect())
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `f` over `[a, b]` split at the given breakpoints, each piece with
/// an `order`-point rule.
pub fn integrate_piecewise<T: Real>(f: impl Fn(T) -> T, breaks: &[T], order: usize) -> T {
    let (x, w) = gauss_legendre::<T>(order);
    let half = T::lit(0.5);
    let mut total = T::zero();
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if abs(b - a) == T::zero() {
            continue;
        }
        let mid = half * (a + b);
        let rad = half * (b - a);
        let mut s = T::zero();
        for (xi, wi) in x.iter().zip(&w) {
            s += *wi * f(mid + rad * *xi);
        }
        total += s * rad;
    }
    total
}
