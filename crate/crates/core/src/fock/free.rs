//! The free thermal state on the Fock space of a mode set, summed over all
//! occupation vectors with at most `n_max` particles without enumerating
//! them: with `x_k = e^{-λ_k/τ}` the basis sum is `Σ_{n ≤ n_max} h_n(x)`
//! (complete homogeneous symmetric polynomials), built by a recursion over
//! modes.

use serde::{Deserialize, Serialize};

use crate::fock::thermal::free_partition_function;
use crate::scalar::Real;
use crate::spectral::OneBodySpectrum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeDiagnostic {
    pub tau: f64,
    pub n_max: usize,
    /// `Σ_{Σn_k ≤ n_max} e^{-Σ λ_k n_k / τ}`
    pub z_basis_sum: f64,
    /// `Π_k (1 - e^{-λ_k/τ})^{-1}`
    pub z_product: f64,
    /// `γ_{τ,1}(k, k) = ⟨n_k⟩ / τ` in the truncated state.
    pub gamma_diag: Vec<f64>,
    /// Bose factors `1/(τ(e^{λ_k/τ} - 1))`.
    pub bose: Vec<f64>,
}

/// `h_n` of the given variables for `n = 0..=n_max`.
fn homogeneous(xs: &[f64], n_max: usize) -> Vec<f64> {
    let mut h = vec![0.0; n_max + 1];
    h[0] = 1.0;
    for &x in xs {
        for n in 1..=n_max {
            h[n] += x * h[n - 1];
        }
    }
    h
}

/// Bose factor `1/(τ(e^{λ/τ} - 1))`.
pub fn bose_factor<T: Real>(lambda: T, tau: T) -> T {
    T::one() / (tau * (lambda / tau).exp_m1())
}

/// Smallest `n_max` for which the free Fock mass beyond `n_max` is below
/// `tol` relative to `Z_{τ,0}`.
pub fn free_n_max<T: Real>(spectrum: &OneBodySpectrum<T>, tau: T, tol: f64) -> usize {
    let xs: Vec<f64> = spectrum.eigenvalues.iter().map(|l| (-(*l / tau).to_f64_lossy()).exp()).collect();
    let z = free_partition_function(spectrum, tau).to_f64_lossy();
    let mut n_max = 16;
    loop {
        let h = homogeneous(&xs, n_max);
        let sum: f64 = h.iter().sum();
        if 1.0 - sum / z < tol || n_max > 1 << 20 {
            return n_max;
        }
        n_max *= 2;
    }
}

pub fn free_diagnostic<T: Real>(spectrum: &OneBodySpectrum<T>, tau: T, n_max: usize) -> FreeDiagnostic {
    let tau64 = tau.to_f64_lossy();
    let lambdas: Vec<f64> = spectrum.eigenvalues.iter().map(|l| l.to_f64_lossy()).collect();
    let xs: Vec<f64> = lambdas.iter().map(|l| (-l / tau64).exp()).collect();
    let z_basis_sum: f64 = homogeneous(&xs, n_max).iter().sum();
    let gamma_diag = (0..xs.len())
        .map(|k| {
            let others: Vec<f64> = xs.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, x)| *x).collect();
            let g = homogeneous(&others, n_max);
            let mut cum = vec![0.0; n_max + 1];
            let mut run = 0.0;
            for (r, v) in g.iter().enumerate() {
                run += v;
                cum[r] = run;
            }
            let mut s = 0.0;
            let mut xa = 1.0;
            for a in 1..=n_max {
                xa *= xs[k];
                if xa == 0.0 {
                    break;
                }
                s += a as f64 * xa * cum[n_max - a];
            }
            s / z_basis_sum / tau64
        })
        .collect();
    FreeDiagnostic {
        tau: tau64,
        n_max,
        z_basis_sum,
        z_product: free_partition_function(spectrum, tau).to_f64_lossy(),
        gamma_diag,
        bose: lambdas.iter().map(|l| bose_factor(*l, tau64)).collect(),
    }
}
