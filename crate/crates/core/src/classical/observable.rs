//! Observables of the classical field: `Θ(ξ)` for `p`-particle operators
//! `ξ` given by their matrix on the `p`-fold mode basis, and scalar
//! functionals.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::linalg::{operator_norm, CMat};
use crate::scalar::{czero, Cplx, Real};
use crate::spectral::{ModeSet, SpectralField};

/// Largest supported `p` (matrices are `d^p × d^p`).
pub const MAX_P: usize = 2;

/// A `p`-particle operator `ξ` with entries `ξ_{k⃗,l⃗} = ⟨e_{k⃗}, ξ e_{l⃗}⟩`.
/// Multi-indices are ordered lexicographically by mode index, first
/// particle slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ThetaSpec<T> {
    mode_set: ModeSet,
    p: usize,
    xi: CMat<T>,
}

impl<T: Real> ThetaSpec<T> {
    pub fn new(mode_set: ModeSet, p: usize, xi: CMat<T>) -> Result<Self, String> {
        if p == 0 || p > MAX_P {
            return Err(format!("p = {p} unsupported (1 ≤ p ≤ {MAX_P})"));
        }
        let n = mode_set.dim().pow(p as u32);
        if xi.rows() != n || xi.cols() != n {
            return Err(format!("ξ must be {n}×{n}, got {}×{}", xi.rows(), xi.cols()));
        }
        Ok(Self { mode_set, p, xi })
    }

    /// `ξ = 1`, so that `Θ(1) = N^p`.
    pub fn identity(mode_set: ModeSet, p: usize) -> Result<Self, String> {
        Self::new(mode_set, p, CMat::identity(mode_set.dim().pow(p as u32)))
    }

    /// One-particle projector onto the normalized vector `v` (mode coefficients).
    pub fn projector(mode_set: ModeSet, v: &[Cplx<T>]) -> Result<Self, String> {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err("projector vector is zero".into());
        }
        let u: Vec<Cplx<T>> = v.iter().map(|z| *z / norm).collect();
        Self::new(mode_set, 1, CMat::from_fn(u.len(), u.len(), |i, j| u[i] * u[j].conj()))
    }

    /// `|e_k⟩⟨e_k|`, so that `Θ = |φ̂(k)|²`.
    pub fn mode_projector(mode_set: ModeSet, k: i64) -> Result<Self, String> {
        let i = mode_set.index_of(k).ok_or_else(|| format!("mode {k} outside the mode set"))?;
        let mut v = vec![czero(); mode_set.dim()];
        v[i] = Complex::new(T::one(), T::zero());
        Self::projector(mode_set, &v)
    }

    pub fn mode_set(&self) -> ModeSet {
        self.mode_set
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn matrix(&self) -> &CMat<T> {
        &self.xi
    }

    pub fn is_hermitian(&self) -> bool {
        self.xi.hermitian_defect() <= T::lit(1e-12) * self.xi.max_abs().max(T::one())
    }

    /// `∥ξ∥` on the symmetric subspace `𝔥^{(p)}`.
    pub fn operator_norm(&self) -> T {
        if self.p == 1 {
            return operator_norm(&self.xi);
        }
        let s = symmetrizer::<T>(self.mode_set.dim(), self.p);
        operator_norm(&s.matmul(&self.xi).matmul(&s))
    }

    /// `φ̂(l₁)…φ̂(l_p)` for every multi-index.
    pub fn tensor_power(&self, phi: &SpectralField<T>) -> Vec<Cplx<T>> {
        tensor_power(phi.coeffs(), self.p)
    }

    /// `Θ(ξ) = Σ ξ_{k⃗,l⃗} conj(φ̂(k⃗)) φ̂(l⃗)`.
    pub fn evaluate(&self, phi: &SpectralField<T>) -> Cplx<T> {
        let v = self.tensor_power(phi);
        let n = v.len();
        let data = self.xi.as_slice();
        let mut total = czero();
        for i in 0..n {
            if v[i].re == T::zero() && v[i].im == T::zero() {
                continue;
            }
            let row = &data[i * n..(i + 1) * n];
            let s: Cplx<T> = row.iter().zip(&v).map(|(a, b)| *a * *b).sum();
            total += v[i].conj() * s;
        }
        total
    }
}

pub(crate) fn tensor_power<T: Real>(c: &[Cplx<T>], p: usize) -> Vec<Cplx<T>> {
    let mut v = vec![Complex::new(T::one(), T::zero())];
    for _ in 0..p {
        v = v.iter().flat_map(|a| c.iter().map(move |b| *a * *b)).collect();
    }
    v
}

/// Orthogonal projector onto symmetric tensors of `p ≤ 2` factors.
pub(crate) fn symmetrizer<T: Real>(d: usize, p: usize) -> CMat<T> {
    match p {
        1 => CMat::identity(d),
        _ => {
            let half = T::lit(0.5);
            CMat::from_fn(d * d, d * d, |i, j| {
                let (a, b) = (i / d, i % d);
                let (c, e) = (j / d, j % d);
                let mut v = T::zero();
                if a == c && b == e {
                    v += half;
                }
                if a == e && b == c {
                    v += half;
                }
                Complex::new(v, T::zero())
            })
        }
    }
}

/// Observable evaluated on each sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", bound = "T: Real")]
pub enum Observable<T> {
    One,
    Mass,
    Interaction,
    Hamiltonian,
    /// `∥φ∥₄⁴`
    L4Pow4,
    Theta(ThetaSpec<T>),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gives_powers_of_mass() {
        let ms = ModeSet::new(1);
        let phi = SpectralField::<f64>::new(
            ms,
            vec![Complex::new(0.3, -0.1), Complex::new(1.0, 0.5), Complex::new(-0.2, 0.0)],
        )
        .unwrap();
        let n = phi.mass();
        let t1 = ThetaSpec::identity(ms, 1).unwrap().evaluate(&phi);
        let t2 = ThetaSpec::identity(ms, 2).unwrap().evaluate(&phi);
        assert!((t1.re - n).abs() < 1e-15 && t1.im == 0.0);
        assert!((t2.re - n * n).abs() < 1e-14);
        assert!((ThetaSpec::<f64>::identity(ms, 2).unwrap().operator_norm() - 1.0).abs() < 1e-12);
        assert!(ThetaSpec::<f64>::identity(ms, 3).is_err());
    }

    #[test]
    fn projector_is_nonnegative_with_unit_norm() {
        let ms = ModeSet::new(1);
        let v = [Complex::new(1.0f64, 1.0), Complex::new(0.0, -2.0), Complex::new(0.5, 0.0)];
        let xi = ThetaSpec::projector(ms, &v).unwrap();
        assert!((xi.operator_norm() - 1.0).abs() < 1e-12);
        assert!(xi.is_hermitian());
        let phi = SpectralField::new(ms, vec![Complex::new(0.2, 0.7), Complex::new(-1.0, 0.1), Complex::new(0.0, 0.3)]).unwrap();
        let t = xi.evaluate(&phi);
        assert!(t.re >= 0.0 && t.im.abs() < 1e-15);
    }
}
