//! The truncated focusing Gibbs measure `dP = z⁻¹ e^{-W} f(N) dμ`, sampled
//! by importance weighting free-field draws.

mod cutoff;
mod observable;
mod oracle;
mod series;
mod tail;

pub use cutoff::CutoffFunction;
pub use observable::{Observable, ThetaSpec, MAX_P};
pub use oracle::{density_oracle_constant_w, exponential_sum_density, DensityGrid};
pub use series::{
    coefficient_bound, series_coefficient_a_m, series_partial_sum, series_remainder_samples, SeriesComparison, SeriesTerm,
    MAX_SERIES_ORDER,
};
pub use tail::{tail_moment_check, ExceedancePoint, TailLevel, TailReport};

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::free_field::{FreeEnsemble, FreeFieldError, RngStream};
use crate::linalg::{hermitian_eigenvalues, CMat, RMat};
use crate::potentials::{Potential, PotentialError};
use crate::scalar::{czero, Cplx, Real};
use crate::spectral::{density_coeffs, GridFft, GridField, ModeSet, OneBodySpectrum, SpectralError, SpectralField};
use crate::stats::{ratio_estimate, Estimate};

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    FreeField(#[from] FreeFieldError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite weight at sample {index}: W = {interaction}, N = {mass}")]
    NonFiniteWeight { index: usize, interaction: f64, mass: f64 },
    #[error("all ensemble weights vanish")]
    Degenerate,
    #[error("size guard: {0}")]
    Size(String),
    #[error("oracle failed: {0}")]
    Oracle(String),
}

/// Mode set, `κ`, interaction and cutoff, with `ŵ(m)` cached for
/// `|m| ≤ 2 k_max` (all the coefficients a band-limited density sees).
#[derive(Clone, Debug)]
pub struct ClassicalModel<T> {
    pub mode_set: ModeSet,
    pub kappa: T,
    pub potential: Potential<T>,
    pub cutoff: CutoffFunction<T>,
    spectrum: OneBodySpectrum<T>,
    w_hat: Vec<T>,
}

impl<T: Real> ClassicalModel<T> {
    pub fn new(
        mode_set: ModeSet,
        kappa: T,
        potential: Potential<T>,
        cutoff: CutoffFunction<T>,
    ) -> Result<Self, ClassicalError> {
        cutoff.validate().map_err(ClassicalError::Config)?;
        potential.validate()?;
        if cutoff.is_diagnostic() && !potential.is_zero() {
            return Err(ClassicalError::Config(
                "the cutoff f ≡ 1 is only admissible without interaction (w = 0)".into(),
            ));
        }
        let spectrum = OneBodySpectrum::new(mode_set, kappa)?;
        let w_hat = potential.coefficient_table(2 * mode_set.k_max)?;
        Ok(Self { mode_set, kappa, potential, cutoff, spectrum, w_hat })
    }

    /// Free field with the diagnostic cutoff.
    pub fn free(mode_set: ModeSet, kappa: T) -> Result<Self, ClassicalError> {
        Self::new(mode_set, kappa, Potential::zero(), CutoffFunction::Diagnostic)
    }

    pub fn spectrum(&self) -> &OneBodySpectrum<T> {
        &self.spectrum
    }

    /// `ŵ(m)` for `m = 0..=2 k_max`.
    pub fn w_hat(&self) -> &[T] {
        &self.w_hat
    }

    /// A bound on `sup |w|` valid for the kernel acting on band-limited
    /// densities.
    pub fn interaction_sup_bound(&self) -> Option<T> {
        let band: T = crate::scalar::abs(self.w_hat[0])
            + T::lit(2.0) * self.w_hat.iter().skip(1).map(|c| crate::scalar::abs(*c)).sum::<T>();
        match &self.potential {
            Potential::Constant { .. } | Potential::FourierCoeffs { .. } | Potential::DeltaApprox { .. } => {
                Some(self.potential.sup_norm().map_or(band, |s| s.min(band)))
            }
            Potential::ExactDelta => None,
            _ => Some(band),
        }
    }

    /// `e^{K² ∥w∥_∞ / 2}`, the largest possible weight on `supp f`.
    pub fn weight_bound(&self) -> Option<T> {
        let k = self.cutoff.radius()?;
        Some((k * k * self.interaction_sup_bound()? * T::lit(0.5)).exp())
    }

    pub fn interaction_energy(&self, phi: &SpectralField<T>) -> T {
        interaction_from_table(phi, &self.w_hat)
    }

    pub fn mass(&self, phi: &SpectralField<T>) -> T {
        phi.mass()
    }

    /// `Σ λ_k |φ̂(k)|² + W(φ)`.
    pub fn hamiltonian_energy(&self, phi: &SpectralField<T>) -> T {
        self.free_energy(phi) + self.interaction_energy(phi)
    }

    /// `Σ λ_k |φ̂(k)|² = ∫ |∇φ|² + κ|φ|²`.
    pub fn free_energy(&self, phi: &SpectralField<T>) -> T {
        phi.coeffs().iter().zip(&self.spectrum.eigenvalues).map(|(c, l)| *l * c.norm_sqr()).sum()
    }

    /// `(W, N, e^{-W} f(N))`.
    pub fn weight(&self, phi: &SpectralField<T>) -> (T, T, T) {
        let n = phi.mass();
        let f = self.cutoff.eval(n);
        let w = self.interaction_energy(phi);
        let weight = if f == T::zero() { T::zero() } else { (-w).exp() * f };
        (w, n, weight)
    }

    pub fn evaluate(&self, obs: &Observable<T>, phi: &SpectralField<T>) -> Cplx<T> {
        let re = |x: T| Complex::new(x, T::zero());
        match obs {
            Observable::One => re(T::one()),
            Observable::Mass => re(phi.mass()),
            Observable::Interaction => re(self.interaction_energy(phi)),
            Observable::Hamiltonian => re(self.hamiltonian_energy(phi)),
            Observable::L4Pow4 => re(crate::spectral::l4_pow4(phi)),
            Observable::Theta(spec) => spec.evaluate(phi),
        }
    }
}

/// `W = ½ Σ_{|m| ≤ 2k_max} ŵ(m) |n̂(m)|²` with `n̂` the exact density
/// coefficients; `w_hat[m]` holds `ŵ(m)` for `m ≥ 0`.
pub fn interaction_from_table<T: Real>(phi: &SpectralField<T>, w_hat: &[T]) -> T {
    let d = phi.mode_set().dim();
    assert!(w_hat.len() >= d, "need ŵ(m) up to |m| = 2 k_max");
    let n = density_coeffs(phi.coeffs());
    let mut total = w_hat[0] * n[d - 1].norm_sqr();
    for m in 1..d {
        total += T::lit(2.0) * w_hat[m] * n[d - 1 + m].norm_sqr();
    }
    T::lit(0.5) * total
}

/// Same quantity through an `n_x`-point grid: `|φ|²` is sampled and
/// transformed, which is exact when `n_x ≥ 4k_max + 1`.
pub fn interaction_on_grid<T: Real>(phi: &SpectralField<T>, w_hat: &[T], n_x: usize) -> Result<T, SpectralError> {
    let k = phi.mode_set().k_max;
    if n_x < 4 * k + 1 {
        return Err(SpectralError::Precision { n_x, required: 4 * k + 1 });
    }
    let fft = GridFft::new(n_x)?;
    let GridField { values } = crate::spectral::to_grid_with(&fft, phi)?;
    let mut dens: Vec<Cplx<T>> = values.iter().map(|v| Complex::new(v.norm_sqr(), T::zero())).collect();
    fft.analyze_in_place(&mut dens);
    let mut total = w_hat[0] * dens[0].norm_sqr();
    for m in 1..=2 * k {
        total += T::lit(2.0) * w_hat[m] * dens[fft.bin(m as i64)].norm_sqr();
    }
    Ok(T::lit(0.5) * total)
}

/// `W(φ)` for a potential, with coefficients computed on the fly.
pub fn interaction_energy<T: Real>(phi: &SpectralField<T>, w: &Potential<T>) -> Result<T, ClassicalError> {
    let table = w.coefficient_table(2 * phi.mode_set().k_max)?;
    Ok(interaction_from_table(phi, &table))
}

/// `N(φ) = ∥φ∥₂²`.
pub fn mass<T: Real>(phi: &SpectralField<T>) -> T {
    phi.mass()
}

/// `H(φ) = Σ λ_k |φ̂(k)|² + W(φ)`.
pub fn hamiltonian_energy<T: Real>(phi: &SpectralField<T>, w: &Potential<T>, kappa: T) -> Result<T, ClassicalError> {
    let spec = OneBodySpectrum::new(phi.mode_set(), kappa)?;
    let free: T = phi.coeffs().iter().zip(&spec.eigenvalues).map(|(c, l)| *l * c.norm_sqr()).sum();
    Ok(free + interaction_energy(phi, w)?)
}

/// Provenance of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EnsembleMeta<T> {
    pub potential: Potential<T>,
    pub cutoff: CutoffFunction<T>,
    pub kappa: T,
    pub k_max: usize,
    pub seed: u64,
    pub stream_id: u64,
    pub count: usize,
}

/// Free-field samples with their Gibbs weights `e^{-W} f(N)`.
#[derive(Clone, Debug)]
pub struct GibbsEnsemble<T> {
    pub fields: Vec<SpectralField<T>>,
    pub weights: Vec<T>,
    pub interaction: Vec<T>,
    pub mass: Vec<T>,
    pub meta: EnsembleMeta<T>,
}

impl<T: Real> GibbsEnsemble<T> {
    /// Draws `n_samples` free fields and weights them.
    pub fn build(model: &ClassicalModel<T>, n_samples: usize, stream: RngStream) -> Result<Self, ClassicalError> {
        if n_samples == 0 {
            return Err(ClassicalError::Config("n_samples must be at least 1".into()));
        }
        let free = FreeEnsemble::sample(model.mode_set, model.kappa, stream, n_samples)?;
        Self::from_free(model, free)
    }

    /// Weights an existing free ensemble (which must match the model).
    pub fn from_free(model: &ClassicalModel<T>, free: FreeEnsemble<T>) -> Result<Self, ClassicalError> {
        if free.mode_set != model.mode_set || free.kappa != model.kappa {
            return Err(ClassicalError::Config("free ensemble does not match the model".into()));
        }
        let triples: Vec<(T, T, T)> = free.fields.par_iter().map(|phi| model.weight(phi)).collect();
        if let Some(index) = triples.iter().position(|t| !t.2.is_finite()) {
            let (w, n, _) = triples[index];
            return Err(ClassicalError::NonFiniteWeight { index, interaction: w.to_f64_lossy(), mass: n.to_f64_lossy() });
        }
        let meta = EnsembleMeta {
            potential: model.potential.clone(),
            cutoff: model.cutoff.clone(),
            kappa: model.kappa,
            k_max: model.mode_set.k_max,
            seed: free.stream.seed,
            stream_id: free.stream.stream_id,
            count: free.fields.len(),
        };
        Ok(Self {
            fields: free.fields,
            weights: triples.iter().map(|t| t.2).collect(),
            interaction: triples.iter().map(|t| t.0).collect(),
            mass: triples.iter().map(|t| t.1).collect(),
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// `z = E_μ[e^{-W} f(N)]`.
    pub fn partition_function(&self) -> Estimate<T> {
        crate::stats::mean_with_error(&self.weights).expect("ensemble is nonempty")
    }

    /// `ρ(X)` for per-sample values `X_i`.
    pub fn expectation_values(&self, values: &[T]) -> Result<Estimate<T>, ClassicalError> {
        ratio_estimate(&self.weights, values).ok_or(ClassicalError::Degenerate)
    }

    /// `ρ(X)` for a real functional of the field.
    pub fn expectation_with(&self, x: impl Fn(&SpectralField<T>) -> T + Sync + Send) -> Result<Estimate<T>, ClassicalError> {
        let values: Vec<T> = self.fields.par_iter().map(x).collect();
        self.expectation_values(&values)
    }

    /// Effective sample size `(Σw)² / Σw²`.
    pub fn effective_sample_size(&self) -> T {
        let s: T = self.weights.iter().copied().sum();
        let s2: T = self.weights.iter().map(|w| *w * *w).sum();
        if s2 == T::zero() {
            T::zero()
        } else {
            s * s / s2
        }
    }
}

/// `ρ(X)`, real part of the observable (use [`expectation_rho_complex`] for
/// non-Hermitian `ξ`).
pub fn expectation_rho<T: Real>(
    model: &ClassicalModel<T>,
    ensemble: &GibbsEnsemble<T>,
    obs: &Observable<T>,
) -> Result<Estimate<T>, ClassicalError> {
    match obs {
        Observable::One => {
            ensemble.expectation_values(&vec![T::one(); ensemble.len()])?;
            Ok(Estimate { value: T::one(), std_error: T::zero(), n_samples: ensemble.len() })
        }
        Observable::Mass => ensemble.expectation_values(&ensemble.mass),
        Observable::Interaction => ensemble.expectation_values(&ensemble.interaction),
        _ => ensemble.expectation_with(|phi| model.evaluate(obs, phi).re),
    }
}

pub fn expectation_rho_complex<T: Real>(
    model: &ClassicalModel<T>,
    ensemble: &GibbsEnsemble<T>,
    obs: &Observable<T>,
) -> Result<(Estimate<T>, Estimate<T>), ClassicalError> {
    let values: Vec<Cplx<T>> = ensemble.fields.par_iter().map(|phi| model.evaluate(obs, phi)).collect();
    let re: Vec<T> = values.iter().map(|z| z.re).collect();
    let im: Vec<T> = values.iter().map(|z| z.im).collect();
    Ok((ensemble.expectation_values(&re)?, ensemble.expectation_values(&im)?))
}

/// Estimated `γ̂_p(k⃗; l⃗) = ρ(conj φ̂(l⃗) φ̂(k⃗))` with entrywise standard errors.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GammaEstimate<T> {
    pub p: usize,
    pub mode_set: ModeSet,
    pub matrix: CMat<T>,
    pub std_error: RMat<T>,
    pub n_samples: usize,
}

impl<T: Real> GammaEstimate<T> {
    pub fn trace(&self) -> T {
        self.matrix.trace().re
    }

    pub fn min_eigenvalue(&self) -> T {
        hermitian_eigenvalues(&self.hermitian_part())[0]
    }

    pub fn max_std_error(&self) -> T {
        self.std_error.max_abs()
    }

    /// `Tr(ξ γ_p) = ρ(Θ(ξ))`.
    pub fn pair_with(&self, xi: &ThetaSpec<T>) -> Cplx<T> {
        xi.matrix().matmul(&self.matrix).trace()
    }

    fn hermitian_part(&self) -> CMat<T> {
        self.matrix.add(&self.matrix.adjoint()).scale(Complex::new(T::lit(0.5), T::zero()))
    }
}

/// Weighted estimate of `γ_p` for `p ∈ {1, 2}`.
pub fn correlation_gamma_p<T: Real>(ensemble: &GibbsEnsemble<T>, p: usize) -> Result<GammaEstimate<T>, ClassicalError> {
    if p == 0 || p > MAX_P {
        return Err(ClassicalError::Size(format!("p = {p} exceeds the supported maximum {MAX_P}")));
    }
    let mode_set = ModeSet::new(ensemble.meta.k_max);
    let n = mode_set.dim().pow(p as u32);
    let sw: T = ensemble.weights.iter().copied().sum();
    if sw <= T::zero() {
        return Err(ClassicalError::Degenerate);
    }
    // accumulate Σ w x, Σ w² |x|², Σ w² x, Σ w² per entry x = conj v(l) v(k)
    let zero = || (vec![czero::<T>(); n * n], vec![T::zero(); n * n], vec![czero::<T>(); n * n], T::zero());
    let (s1, s2, s2x, sw2) = ensemble
        .fields
        .par_iter()
        .zip(ensemble.weights.par_iter())
        .fold(zero, |mut acc, (phi, w)| {
            if *w == T::zero() {
                return acc;
            }
            let v = observable::tensor_power(phi.coeffs(), p);
            let w2 = *w * *w;
            for k in 0..n {
                for l in 0..n {
                    let x = v[k] * v[l].conj();
                    let i = k * n + l;
                    acc.0[i] += x * *w;
                    acc.1[i] += x.norm_sqr() * w2;
                    acc.2[i] += x * w2;
                }
            }
            acc.3 += w2;
            acc
        })
        .reduce(zero, |mut a, b| {
            for i in 0..n * n {
                a.0[i] += b.0[i];
                a.1[i] += b.1[i];
                a.2[i] += b.2[i];
            }
            a.3 += b.3;
            a
        });
    let mut matrix = CMat::zeros(n, n);
    let mut std_error = RMat::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            let i = k * n + l;
            let r = s1[i] / sw;
            let var = s2[i] - T::lit(2.0) * (r.conj() * s2x[i]).re + r.norm_sqr() * sw2;
            matrix[(k, l)] = r;
            std_error[(k, l)] = var.max(T::zero()).sqrt() / sw;
        }
    }
    Ok(GammaEstimate { p, mode_set, matrix, std_error, n_samples: ensemble.len() })
}
