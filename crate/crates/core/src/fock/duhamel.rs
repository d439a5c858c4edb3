//! Duhamel expansion of `Tr(Θ_τ(ξ) e^{-(H_{τ,0} + ζW_τ)} f(N_τ)) / Z_{τ,0}`
//! in powers of `ζ`. The coefficients are simplex integrals evaluated by
//! product Gauss–Legendre quadrature; `H_{τ,0}` is diagonal in the
//! occupation basis, so every free semigroup is exact.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::ThetaSpec;
use crate::fock::operator::{build_operator, OperatorKind};
use crate::fock::{FockError, QuantumModel};
use crate::linalg::CMat;
use crate::quadrature::gauss_legendre_unit;
use crate::scalar::{czero, Cplx, Real};

pub const MAX_DUHAMEL_ORDER: usize = 2;

/// Quadrature for the simplex integrals: `order` Gauss–Legendre nodes on
/// each of `panels` equal panels per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuhamelQuadrature {
    pub order: usize,
    pub panels: usize,
}

impl Default for DuhamelQuadrature {
    fn default() -> Self {
        Self { order: 16, panels: 4 }
    }
}

impl DuhamelQuadrature {
    fn nodes<T: Real>(&self) -> Vec<(T, T)> {
        let (x, w) = gauss_legendre_unit::<T>(self.order.max(1));
        let p = self.panels.max(1);
        let h = T::one() / T::from_usize_lossy(p);
        (0..p)
            .flat_map(|i| {
                let a = h * T::from_usize_lossy(i);
                x.iter().zip(&w).map(move |(xi, wi)| (a + h * *xi, h * *wi)).collect::<Vec<_>>()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DuhamelTerm<T> {
    pub m: usize,
    pub value: Cplx<T>,
    /// `K^p ∥ξ∥ (K² ∥w∥_∞)^m / (2^m m!)`
    pub bound: Option<T>,
}

/// `a^ξ_{τ,m}` for `m ≤ 2`.
pub fn duhamel_coefficient_a_tau_m<T: Real>(
    model: &QuantumModel<T>,
    xi: &ThetaSpec<T>,
    m: usize,
    quad: DuhamelQuadrature,
) -> Result<DuhamelTerm<T>, FockError> {
    if m > MAX_DUHAMEL_ORDER {
        return Err(FockError::Size(format!("Duhamel order {m} exceeds {MAX_DUHAMEL_ORDER}")));
    }
    if quad.order < 16 {
        return Err(FockError::Domain(format!("quadrature order {} below 16", quad.order)));
    }
    let basis = model.basis();
    let theta = build_operator(&OperatorKind::Theta(xi.clone()), basis, model.kappa, model.tau, None)?;
    let h0 = model.h0();
    let w = model.w();
    let nodes = quad.nodes::<T>();
    let tau = model.tau;
    let sum: Cplx<T> = (0..basis.blocks().len())
        .into_par_iter()
        .map(|b| {
            let blk = basis.block(b);
            let f = model.cutoff.eval(T::from_usize_lossy(blk.n) / tau);
            if f == T::zero() {
                return czero();
            }
            let Some(th) = theta.get(b, b) else { return czero() };
            let e: Vec<T> = h0.diagonal_values(b).iter().map(|z| z.re).collect();
            let dim = e.len();
            let zero = CMat::zeros(dim, dim);
            let wb = w.get(b, b).unwrap_or(&zero);
            let val = match m {
                0 => (0..dim).map(|i| th[(i, i)] * (-e[i]).exp()).sum(),
                1 => {
                    let mut acc = czero();
                    for &(t, wt) in &nodes {
                        acc += trace_chain(th, &e, &[wb], &[T::one() - t, t]) * wt;
                    }
                    acc
                }
                _ => {
                    let mut acc = czero();
                    for &(t1, w1) in &nodes {
                        for &(u, w2) in &nodes {
                            let t2 = t1 * u;
                            acc += trace_chain(th, &e, &[wb, wb], &[T::one() - t1, t1 - t2, t2]) * (w1 * w2 * t1);
                        }
                    }
                    acc
                }
            };
            val * f
        })
        .sum();
    let sign = if m % 2 == 0 { T::one() } else { -T::one() };
    let value = sum * sign / model.z_tau_0();
    Ok(DuhamelTerm { m, value, bound: model.coefficient_bound(xi, m) })
}

/// `Tr(Θ D(s₀) W D(s₁) W … D(s_m))` with `D(s) = e^{-sE}` diagonal.
fn trace_chain<T: Real>(theta: &CMat<T>, e: &[T], ws: &[&CMat<T>], s: &[T]) -> Cplx<T> {
    let dim = e.len();
    // start from D(s_m) as a diagonal, multiply leftwards
    let last = s[s.len() - 1];
    let mut x = CMat::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex::new((-last * e[i]).exp(), T::zero())
        } else {
            czero()
        }
    });
    for (w, si) in ws.iter().rev().zip(s[..s.len() - 1].iter().rev()) {
        let wx = w.matmul(&x);
        x = CMat::from_fn(dim, dim, |i, j| wx[(i, j)] * (-*si * e[i]).exp());
    }
    let mut tr = czero();
    for i in 0..dim {
        for k in 0..dim {
            tr += theta[(i, k)] * x[(k, i)];
        }
    }
    tr
}

/// `A^ξ_τ(ζ) = Tr(Θ_τ(ξ) e^{-(H_{τ,0} + ζW_τ)} f(N_τ)) / Z_{τ,0}` by
/// diagonalization.
pub fn a_tau_of_zeta<T: Real>(model: &QuantumModel<T>, xi: &ThetaSpec<T>, zeta: T) -> Result<Cplx<T>, FockError> {
    let state = model.thermal_state(zeta)?;
    let theta = build_operator(&OperatorKind::Theta(xi.clone()), model.basis(), model.kappa, model.tau, None)?;
    Ok(state.expectation(&theta)? * state.z_tau() / state.z_tau_0())
}

/// Remainder `A(ζ) - Σ_{m<M} a_m ζ^m` against its bound
/// `e^{|ζ| K² ∥w∥_∞} K^p ∥ξ∥ (K² ∥w∥_∞)^M |ζ|^M / (2^M M!)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RemainderCheck<T> {
    pub order: usize,
    pub zeta: T,
    pub remainder: T,
    pub bound: Option<T>,
}

pub fn remainder_check<T: Real>(
    model: &QuantumModel<T>,
    xi: &ThetaSpec<T>,
    order: usize,
    zeta: T,
    quad: DuhamelQuadrature,
) -> Result<RemainderCheck<T>, FockError> {
    if order > MAX_DUHAMEL_ORDER + 1 {
        return Err(FockError::Size(format!("remainder order {order} needs coefficients beyond m = 2")));
    }
    let full = a_tau_of_zeta(model, xi, zeta)?;
    let mut partial = czero();
    for m in 0..order {
        partial += duhamel_coefficient_a_tau_m(model, xi, m, quad)?.value * zeta.powi(m as i32);
    }
    let bound = model.coefficient_bound(xi, order).and_then(|b| {
        let k = model.cutoff.radius()?;
        let w = model.interaction_sup_bound()?;
        let z = crate::scalar::abs(zeta);
        Some((z * k * k * w).exp() * b * z.powi(order as i32))
    });
    Ok(RemainderCheck { order, zeta, remainder: (full - partial).norm(), bound })
}
