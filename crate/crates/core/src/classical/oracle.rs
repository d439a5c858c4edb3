//! Deterministic reference for constant interactions: `N = Σ_k |φ̂(k)|²` is a
//! sum of independent exponentials with rates `λ_k`, so
//! `z = ∫ e^{-cs²/2} f(s) p_N(s) ds` is a one-dimensional integral.

use crate::classical::{ClassicalError, CutoffFunction};
use crate::scalar::Real;
use crate::spectral::{ModeSet, OneBodySpectrum};

/// Density values `p(j h)` for `j = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid<T> {
    pub h: T,
    pub values: Vec<T>,
}

/// Density of `Σ E_i` with `E_i ~ Exp(rates[i])` independent, on
/// `[0, s_max]` with `n` steps. Each convolution with an exponential is
/// applied exactly to the piecewise-linear interpolant of the previous
/// density, so the error is `O(h²)`.
pub fn exponential_sum_density<T: Real>(rates: &[T], s_max: T, n: usize) -> DensityGrid<T> {
    assert!(!rates.is_empty() && n > 0);
    let mut sorted = rates.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = s_max / T::from_usize_lossy(n);
    let first = sorted[0];
    let mut p: Vec<T> = (0..=n).map(|j| first * (-first * h * T::from_usize_lossy(j)).exp()).collect();
    for &rate in &sorted[1..] {
        let a = rate * h;
        let e = (-a).exp();
        let one_minus_e = -(-a).exp_m1();
        // (1 - e - a e)/a, by series for small a
        let c = if a < T::lit(1e-3) {
            a * (T::lit(0.5) - a * (T::one() / T::lit(3.0) - a / T::lit(8.0)))
        } else {
            (one_minus_e - a * e) / a
        };
        let mut g = vec![T::zero(); n + 1];
        for j in 0..n {
            g[j + 1] = e * g[j] + p[j + 1] * one_minus_e - (p[j + 1] - p[j]) * c;
        }
        p = g;
    }
    DensityGrid { h, values: p }
}

fn trapezoid<T: Real>(grid: &DensityGrid<T>, g: &impl Fn(T) -> T) -> T {
    let n = grid.values.len() - 1;
    let mut s = T::zero();
    for (j, p) in grid.values.iter().enumerate() {
        let x = grid.h * T::from_usize_lossy(j);
        let wt = if j == 0 || j == n { T::lit(0.5) } else { T::one() };
        s += wt * g(x) * *p;
    }
    s * grid.h
}

/// `z = E_μ[e^{-cN²/2} f(N)]` for the constant interaction `w ≡ c`,
/// converged by grid doubling with Richardson extrapolation to relative
/// tolerance `tol`.
pub fn density_oracle_constant_w<T: Real>(
    c: T,
    cutoff: &CutoffFunction<T>,
    mode_set: ModeSet,
    kappa: T,
    tol: T,
) -> Result<T, ClassicalError> {
    let spec = OneBodySpectrum::new(mode_set, kappa)?;
    let s_max = match cutoff.radius() {
        Some(k) => k,
        None => {
            let mean = spec.trace_inverse();
            T::lit(60.0) / kappa + T::lit(20.0) * mean
        }
    };
    let g = |s: T| (-c * s * s * T::lit(0.5)).exp() * cutoff.eval(s);
    let mut n = 1usize << 10;
    let mut coarse = trapezoid(&exponential_sum_density(&spec.eigenvalues, s_max, n), &g);
    let mut prev: Option<T> = None;
    while n < (1 << 22) {
        n *= 2;
        let fine = trapezoid(&exponential_sum_density(&spec.eigenvalues, s_max, n), &g);
        let rich = (T::lit(4.0) * fine - coarse) / T::lit(3.0);
        if let Some(p) = prev {
            if crate::scalar::abs(rich - p) <= tol * crate::scalar::abs(rich).max(T::min_positive_value()) {
                return Ok(rich);
            }
        }
        prev = Some(rich);
        coarse = fine;
    }
    Err(ClassicalError::Oracle(format!("density quadrature did not reach relative tolerance {tol}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_piecewise;

    #[test]
    fn free_mass_is_normalized() {
        let z = density_oracle_constant_w(0.0f64, &CutoffFunction::Diagnostic, ModeSet::new(2), 1.0, 1e-9).unwrap();
        assert!((z - 1.0).abs() < 1e-8, "{z}");
    }

    #[test]
    fn single_mode_closed_form() {
        let (c, kappa) = (0.3, 0.7);
        let f = CutoffFunction::default();
        let z = density_oracle_constant_w(c, &f, ModeSet::new(0), kappa, 1e-11).unwrap();
        let breaks: Vec<f64> = (0..=64).map(|i| 4.0 * i as f64 / 64.0).collect();
        let direct = integrate_piecewise(|s: f64| (-c * s * s / 2.0).exp() * f.eval(s) * kappa * (-kappa * s).exp(), &breaks, 20);
        assert!((z - direct).abs() < 1e-9 * direct, "{z} vs {direct}");
    }

    #[test]
    fn two_rate_density_matches_hypoexponential() {
        let (a, b) = (1.0, 3.0);
        let grid = exponential_sum_density(&[a, b], 5.0f64, 1 << 14);
        for j in [100usize, 3000, 9000] {
            let s = grid.h * j as f64;
            let exact = a * b / (b - a) * ((-a * s).exp() - (-b * s).exp());
            assert!((grid.values[j] - exact).abs() < 1e-7, "s={s}");
        }
    }
}
