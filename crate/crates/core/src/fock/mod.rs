//! Truncated bosonic Fock space over a mode set: second-quantized
//! operators, grand canonical thermal states, partition functions,
//! correlation functions, Duhamel coefficients and Heisenberg evolution.

mod basis;
mod duhamel;
mod free;
mod operator;
mod thermal;

pub use basis::{basis_size, Block, FockBasis, DEFAULT_BASIS_LIMIT};
pub use duhamel::{
    a_tau_of_zeta, duhamel_coefficient_a_tau_m, remainder_check, DuhamelQuadrature, DuhamelTerm, RemainderCheck,
    MAX_DUHAMEL_ORDER,
};
pub use free::{bose_factor, free_diagnostic, free_n_max, FreeDiagnostic};
pub use operator::{annihilation, build_operator, ccr_defect, creation, BlockOperator, OperatorKind};
pub use thermal::{
    free_partition_function, gamma_tau_p, heisenberg_evolve, BlockEigen, PartitionFunctions, ThermalDecomposition,
    ThermalState, DIAGNOSTIC_TAIL_TOL,
};

use std::sync::Arc;

use num_complex::Complex;
use thiserror::Error;

use crate::classical::{CutoffFunction, ThetaSpec};
use crate::potentials::{Potential, PotentialError};
use crate::scalar::{abs, Real};
use crate::spectral::{ModeSet, OneBodySpectrum, SpectralError};

#[derive(Debug, Error)]
pub enum FockError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("size guard: {0}")]
    Size(String),
    #[error("truncation unsound: {0}")]
    TruncationUnsound(String),
    #[error("internal consistency: {0}")]
    Consistency(String),
    #[error("thermal weights vanish")]
    Degenerate,
    #[error("operator I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// `⌈K τ⌉`, the particle cutoff at which `f(N_τ)`-weighted traces are exact.
pub fn exact_n_max<T: Real>(k_radius: T, tau: T) -> usize {
    (k_radius * tau - T::lit(1e-9)).ceil().to_f64_lossy().max(0.0) as usize
}

/// The quantum model at one value of `τ`: basis, `H_{τ,0}` and `W_τ`.
#[derive(Clone, Debug)]
pub struct QuantumModel<T> {
    pub kappa: T,
    pub tau: T,
    pub potential: Potential<T>,
    pub cutoff: CutoffFunction<T>,
    basis: Arc<FockBasis>,
    spectrum: OneBodySpectrum<T>,
    w_hat: Vec<T>,
    h0: BlockOperator<T>,
    w: BlockOperator<T>,
}

impl<T: Real> QuantumModel<T> {
    /// `n_max` defaults to `⌈K τ⌉` and is required for the diagnostic cutoff.
    pub fn new(
        mode_set: ModeSet,
        kappa: T,
        tau: T,
        potential: Potential<T>,
        cutoff: CutoffFunction<T>,
        n_max: Option<usize>,
    ) -> Result<Self, FockError> {
        cutoff.validate().map_err(FockError::Domain)?;
        potential.validate()?;
        if cutoff.is_diagnostic() && !potential.is_zero() {
            return Err(FockError::Domain("the cutoff f ≡ 1 is only admissible without interaction".into()));
        }
        let n_max = match (n_max, cutoff.radius()) {
            (Some(n), _) => n,
            (None, Some(k)) => exact_n_max(k, tau),
            (None, None) => return Err(FockError::Domain("diagnostic runs need an explicit n_max".into())),
        };
        let basis = Arc::new(FockBasis::new(mode_set, n_max)?);
        let spectrum = OneBodySpectrum::new(mode_set, kappa)?;
        let w_hat = potential.coefficient_table(2 * mode_set.k_max)?;
        let h0 = build_operator(&OperatorKind::H0, &basis, kappa, tau, None)?;
        let w = build_operator(&OperatorKind::W, &basis, kappa, tau, Some(&w_hat))?;
        Ok(Self { kappa, tau, potential, cutoff, basis, spectrum, w_hat, h0, w })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn spectrum(&self) -> &OneBodySpectrum<T> {
        &self.spectrum
    }

    pub fn w_hat(&self) -> &[T] {
        &self.w_hat
    }

    pub fn h0(&self) -> &BlockOperator<T> {
        &self.h0
    }

    pub fn w(&self) -> &BlockOperator<T> {
        &self.w
    }

    pub fn operator(&self, kind: &OperatorKind<T>) -> Result<BlockOperator<T>, FockError> {
        build_operator(kind, &self.basis, self.kappa, self.tau, Some(&self.w_hat))
    }

    /// `H_{τ,0} + ζ W_τ`.
    pub fn hamiltonian(&self, zeta: T) -> BlockOperator<T> {
        self.h0.add(&self.w.scale(Complex::new(zeta, T::zero())))
    }

    pub fn decomposition(&self, zeta: T) -> Result<Arc<ThermalDecomposition<T>>, FockError> {
        Ok(Arc::new(ThermalDecomposition::new(self.basis.clone(), &self.hamiltonian(zeta), self.tau)?))
    }

    pub fn thermal_state(&self, zeta: T) -> Result<ThermalState<T>, FockError> {
        let free = zeta == T::zero() || self.potential.is_zero();
        ThermalState::new(self.decomposition(zeta)?, &self.cutoff, &self.spectrum, free)
    }

    pub fn z_tau_0(&self) -> T {
        free_partition_function(&self.spectrum, self.tau)
    }

    /// Same bound on `sup |w|` as the classical model uses.
    pub fn interaction_sup_bound(&self) -> Option<T> {
        let band = abs(self.w_hat[0]) + T::lit(2.0) * self.w_hat.iter().skip(1).map(|c| abs(*c)).sum::<T>();
        match &self.potential {
            Potential::Constant { .. } | Potential::FourierCoeffs { .. } | Potential::DeltaApprox { .. } => {
                Some(self.potential.sup_norm().map_or(band, |s| s.min(band)))
            }
            Potential::ExactDelta => None,
            _ => Some(band),
        }
    }

    /// `K^p ∥ξ∥ (K² ∥w∥_∞)^m / (2^m m!)`.
    pub fn coefficient_bound(&self, xi: &ThetaSpec<T>, m: usize) -> Option<T> {
        let k = self.cutoff.radius()?;
        let w = self.interaction_sup_bound()?;
        Some(crate::classical::coefficient_bound(k, xi.operator_norm(), xi.p(), w, m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigenvalue;

    #[test]
    fn truncation_must_cover_the_cutoff() {
        let ms = ModeSet::new(1);
        let f = CutoffFunction::bump(4.0, 0.5).unwrap();
        let q = QuantumModel::new(ms, 1.0f64, 2.0, Potential::constant(0.2), f.clone(), Some(5)).unwrap();
        assert!(matches!(q.thermal_state(1.0), Err(FockError::TruncationUnsound(_))));
        let ok = QuantumModel::new(ms, 1.0f64, 2.0, Potential::constant(0.2), f, None).unwrap();
        assert_eq!(ok.basis().n_max(), 8);
        assert!(ok.thermal_state(1.0).is_ok());
    }

    #[test]
    fn free_diagnostic_state() {
        let ms = ModeSet::new(1);
        let tau = 1.0f64;
        let q = QuantumModel::new(ms, 1.0f64, tau, Potential::zero(), CutoffFunction::Diagnostic, Some(60)).unwrap();
        let st = q.thermal_state(1.0).unwrap();
        let pf = st.partition_functions();
        assert_eq!(pf.relative, 1.0);
        let one = st.expectation(&BlockOperator::identity(q.basis())).unwrap();
        assert!((one.re - 1.0).abs() < 1e-14);
        let g = gamma_tau_p(&st, 1).unwrap();
        for (i, k) in ms.modes().enumerate() {
            let lam = eigenvalue(k, 1.0).unwrap();
            assert!((g[(i, i)].re - bose_factor(lam, tau)).abs() < 1e-10);
        }
        // quantum Wick: ρ(a*_l a*_m a_k a_j) for the free state
        let g2 = gamma_tau_p(&st, 2).unwrap();
        let d = ms.dim();
        for a in 0..d {
            for b in 0..d {
                // γ₂(a,b; a,b) = G(a)G(b) (1 + δ_ab)
                let expect = g[(a, a)].re * g[(b, b)].re * if a == b { 2.0 } else { 1.0 };
                assert!((g2[(a * d + b, a * d + b)].re - expect).abs() < 1e-10);
                // exchange term γ₂(a,b; b,a)
                let expect_x = if a == b { expect } else { g[(a, a)].re * g[(b, b)].re };
                assert!((g2[(a * d + b, b * d + a)].re - expect_x).abs() < 1e-10);
            }
        }
        let small = QuantumModel::new(ms, 1.0f64, tau, Potential::zero(), CutoffFunction::Diagnostic, Some(3)).unwrap();
        assert!(matches!(small.thermal_state(1.0).unwrap().expectation(&BlockOperator::identity(small.basis())), Err(FockError::TruncationUnsound(_))));
    }

    #[test]
    fn interacting_state_properties() {
        let ms = ModeSet::new(1);
        let w = Potential::fourier(vec![0.1, 0.3, 0.5, 0.3, 0.1]).unwrap();
        let q = QuantumModel::new(ms, 1.0f64, 3.0, w, CutoffFunction::default(), None).unwrap();
        let st = q.thermal_state(1.0).unwrap();
        let n = q.operator(&OperatorKind::N).unwrap();
        let rho_n = st.expectation(&n).unwrap().re;
        assert!((0.0..=4.0).contains(&rho_n));
        let g = gamma_tau_p(&st, 1).unwrap();
        assert!((g.trace().re - rho_n).abs() < 1e-10);
        assert!(crate::linalg::hermitian_eigenvalues(&g)[0] >= -1e-10);
        let g2 = gamma_tau_p(&st, 2).unwrap();
        assert!(g2.hermitian_defect() < 1e-12);
        assert!(crate::linalg::hermitian_eigenvalues(&g2)[0] >= -1e-10);
        // Tr(ξγ) = ρ(Θ(ξ))
        let xi = ThetaSpec::mode_projector(ms, 1).unwrap();
        let theta = q.operator(&OperatorKind::Theta(xi.clone())).unwrap();
        assert!((st.expectation(&theta).unwrap().re - xi.matrix().matmul(&g).trace().re).abs() < 1e-12);
    }

    #[test]
    fn repulsion_lowers_the_partition_function() {
        let ms = ModeSet::new(1);
        let f = CutoffFunction::default();
        let mut prev = f64::INFINITY;
        for c in [0.0f64, 0.1, 0.3] {
            let w = Potential::fourier(vec![0.5 * c, c, 2.0 * c, c, 0.5 * c]).unwrap();
            let q = QuantumModel::new(ms, 1.0f64, 2.0, w, f.clone(), None).unwrap();
            let z = q.thermal_state(1.0).unwrap().z_tau();
            assert!(z < prev);
            prev = z;
        }
    }

    #[test]
    fn heisenberg_evolution() {
        let ms = ModeSet::new(1);
        let w = Potential::fourier(vec![0.1, 0.3, 0.5, 0.3, 0.1]).unwrap();
        let q = QuantumModel::new(ms, 1.0f64, 2.0, w, CutoffFunction::default(), None).unwrap();
        let dec = q.decomposition(1.0).unwrap();
        let h = q.hamiltonian(1.0);
        let n = q.operator(&OperatorKind::N).unwrap();
        let xi = ThetaSpec::projector(ms, &[Complex::new(1.0, 0.0), Complex::new(0.5, 0.5), Complex::new(0.0, 1.0)]).unwrap();
        let theta = q.operator(&OperatorKind::Theta(xi)).unwrap();
        assert!(heisenberg_evolve(&theta, &dec, 0.0).sub(&theta).max_abs() < 1e-12);
        for t in [0.3f64, 1.7] {
            assert!(heisenberg_evolve(&h, &dec, t).sub(&h).max_abs() < 1e-10);
            assert!(heisenberg_evolve(&n, &dec, t).sub(&n).max_abs() < 1e-12);
            let evolved = heisenberg_evolve(&theta, &dec, t);
            assert!(evolved.hermitian_defect() < 1e-12);
            // spectrum preserved on a block pair
            for ((r, c), m) in theta.entries().filter(|((r, c), _)| r == c) {
                let a = crate::linalg::hermitian_eigenvalues(m);
                let b = crate::linalg::hermitian_eigenvalues(evolved.get(*r, *c).unwrap());
                assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
            }
        }
    }
}
