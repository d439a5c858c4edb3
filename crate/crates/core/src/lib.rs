//! Gibbs states of the focusing nonlinear Schrödinger equation on the
//! one-dimensional torus and their bosonic mean-field approximation.
//!
//! The classical side samples the Gaussian free field, reweights it by
//! `e^{-W} f(N)` and evolves samples by the NLS flow. The quantum side
//! builds second-quantized operators on a truncated Fock space and computes
//! grand canonical thermal states exactly. Both sides share one Galerkin
//! truncation, so their τ → ∞ comparison is between consistent finite
//! models.
//!
//! Everything numerical is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix `f64`.

pub mod classical;
pub mod experiments;
pub mod flow;
pub mod fock;
pub mod free_field;
pub mod linalg;
pub mod potentials;
pub mod quadrature;
pub mod scalar;
pub mod spectral;
pub mod stats;

pub use spectral::ModeSet;

pub type Complex64 = num_complex::Complex<f64>;
pub type SpectralField = spectral::SpectralField<f64>;
pub type OneBodySpectrum = spectral::OneBodySpectrum<f64>;
pub type Potential = potentials::Potential<f64>;
pub type DeltaProfile = potentials::DeltaProfile<f64>;
pub type FreeEnsemble = free_field::FreeEnsemble<f64>;
pub type CutoffFunction = classical::CutoffFunction<f64>;
pub type ThetaSpec = classical::ThetaSpec<f64>;
pub type ClassicalModel = classical::ClassicalModel<f64>;
pub type GibbsEnsemble = classical::GibbsEnsemble<f64>;
pub type GammaEstimate = classical::GammaEstimate<f64>;
pub type QuantumModel = fock::QuantumModel<f64>;
pub type BlockOperator = fock::BlockOperator<f64>;
pub type ThermalDecomposition = fock::ThermalDecomposition<f64>;
pub type ThermalState = fock::ThermalState<f64>;
pub type FlowConfig = flow::FlowConfig<f64>;
pub type NlsFlow = flow::NlsFlow<f64>;
pub type Scenario = experiments::Scenario<f64>;
pub type Estimate = stats::Estimate<f64>;
pub type CMat = linalg::CMat<f64>;
pub type RMat = linalg::RMat<f64>;
