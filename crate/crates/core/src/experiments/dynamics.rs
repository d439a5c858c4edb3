use std::time::Instant;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{ClassicalModel, GibbsEnsemble, ThetaSpec};
use crate::experiments::{ExperimentError, ExperimentReport};
use crate::flow::{flow_difference, FlowConfig, FlowError, NlsFlow};
use crate::fock::{build_operator, heisenberg_evolve, BlockOperator, OperatorKind, QuantumModel, ThermalState};
use crate::potentials::Potential;
use crate::scalar::{Cplx, Real};
use crate::spectral::SpectralField;
use crate::stats::{ratio_estimate, Estimate};

/// One factor `Ψ^t Θ(ξ)` of a time-dependent correlation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TimedTheta<T> {
    pub xi: ThetaSpec<T>,
    pub t: T,
}

/// Distinct times of `factors` (sorted) and, per factor, the index of its time.
fn time_slots<T: Real>(factors: &[TimedTheta<T>]) -> (Vec<T>, Vec<usize>) {
    let mut times: Vec<T> = factors.iter().map(|f| f.t).collect();
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    times.dedup();
    let slots = factors.iter().map(|f| times.iter().position(|t| *t == f.t).unwrap()).collect();
    (times, slots)
}

/// `ρ(Ψ^{t₁}Θ(ξ¹) … Ψ^{t_m}Θ(ξ^m))`: every weighted sample is carried to
/// each required time by the flow, and the product of the observables is
/// averaged. Returns estimates of the real and imaginary parts.
pub fn classical_time_correlation<T: Real>(
    ensemble: &GibbsEnsemble<T>,
    factors: &[TimedTheta<T>],
    flow: &NlsFlow<T>,
) -> Result<(Estimate<T>, Estimate<T>), ExperimentError> {
    if factors.is_empty() {
        return Err(ExperimentError::Config("no observables".into()));
    }
    if factors.iter().any(|f| !f.t.is_finite()) {
        return Err(ExperimentError::Config("non-finite time".into()));
    }
    let (times, slots) = time_slots(factors);
    let values: Vec<Result<Cplx<T>, FlowError>> = ensemble
        .fields
        .par_iter()
        .zip(ensemble.weights.par_iter())
        .map(|(phi, w)| {
            if *w == T::zero() {
                return Ok(Complex::new(T::zero(), T::zero()));
            }
            let states = evolve_to(flow, phi, &times)?;
            Ok(factors
                .iter()
                .zip(&slots)
                .fold(Complex::new(T::one(), T::zero()), |acc, (f, s)| acc * f.xi.evaluate(&states[*s])))
        })
        .collect();
    let mut re = Vec::with_capacity(values.len());
    let mut im = Vec::with_capacity(values.len());
    for v in values {
        let v = v?;
        re.push(v.re);
        im.push(v.im);
    }
    let w = &ensemble.weights;
    let degenerate = || ExperimentError::Classical(crate::classical::ClassicalError::Degenerate);
    Ok((ratio_estimate(w, &re).ok_or_else(degenerate)?, ratio_estimate(w, &im).ok_or_else(degenerate)?))
}

/// `S_t φ` for every `t` in ascending `times`, reusing the positive and
/// negative branches.
fn evolve_to<T: Real>(flow: &NlsFlow<T>, phi: &SpectralField<T>, times: &[T]) -> Result<Vec<SpectralField<T>>, FlowError> {
    let mut out = vec![phi.clone(); times.len()];
    let (neg, pos): (Vec<usize>, Vec<usize>) = (0..times.len()).partition(|i| times[*i] < T::zero());
    let mut cur = phi.clone();
    let mut at = T::zero();
    for i in pos {
        if times[i] != at {
            cur = flow.evolve(&cur, times[i] - at)?;
            at = times[i];
        }
        out[i] = cur.clone();
    }
    let mut cur = phi.clone();
    let mut at = T::zero();
    for i in neg.into_iter().rev() {
        cur = flow.evolve(&cur, times[i] - at)?;
        at = times[i];
        out[i] = cur.clone();
    }
    Ok(out)
}

/// `ρ_τ(Ψ^{t₁}_τ Θ_τ(ξ¹) … Ψ^{t_m}_τ Θ_τ(ξ^m))` with `Ψ^t_τ A = e^{itτH} A e^{-itτH}`.
pub fn quantum_time_correlation<T: Real>(
    model: &QuantumModel<T>,
    factors: &[TimedTheta<T>],
) -> Result<Cplx<T>, ExperimentError> {
    if factors.is_empty() {
        return Err(ExperimentError::Config("no observables".into()));
    }
    let dec = model.decomposition(T::one())?;
    let state = ThermalState::new(dec.clone(), &model.cutoff, model.spectrum(), model.potential.is_zero())?;
    let mut product: Option<BlockOperator<T>> = None;
    for f in factors {
        let theta = build_operator(&OperatorKind::Theta(f.xi.clone()), model.basis(), model.kappa, model.tau, None)?;
        let op = if f.t == T::zero() { theta } else { heisenberg_evolve(&theta, &dec, f.t) };
        product = Some(match product {
            None => op,
            Some(p) => p.matmul(&op),
        });
    }
    Ok(state.expectation(&product.expect("nonempty"))?)
}

/// Observables whose Gibbs expectations the flow must preserve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InvarianceObservable {
    /// `|φ̂(k)|²`, a diagonal entry of `γ_1`
    GammaDiagonal(i64),
    /// `N^j`
    MassPower(u32),
    /// `W`
    Interaction,
}

impl InvarianceObservable {
    fn label(&self) -> String {
        match self {
            InvarianceObservable::GammaDiagonal(k) => format!("gamma_diag[{k}]"),
            InvarianceObservable::MassPower(j) => format!("mass^{j}"),
            InvarianceObservable::Interaction => "interaction".into(),
        }
    }

    fn evaluate<T: Real>(&self, model: &ClassicalModel<T>, phi: &SpectralField<T>) -> T {
        match self {
            InvarianceObservable::GammaDiagonal(k) => phi.coeff(*k).norm_sqr(),
            InvarianceObservable::MassPower(j) => phi.mass().powi(*j as i32),
            InvarianceObservable::Interaction => model.interaction_energy(phi),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct InvarianceEntry<T> {
    pub observable: String,
    pub t: T,
    pub q0: Estimate<T>,
    pub qt: Estimate<T>,
    /// `|Q(t) - Q(0)| / SE(Q(t))`
    pub ratio: T,
    /// Paired statistic: mean of `O(S_tφ) - O(φ)` over its own standard error.
    pub paired_z: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct InvarianceReport<T> {
    pub entries: Vec<InvarianceEntry<T>>,
    /// Weighted mean of `|H(S_tφ) - H(φ)|` at the largest time.
    pub mean_energy_drift: T,
    /// Standard error of `ρ(H)`.
    pub energy_std_error: T,
    pub runtime_s: f64,
}

impl<T: Real> InvarianceReport<T> {
    pub fn max_ratio(&self) -> T {
        self.entries.iter().fold(T::zero(), |m, e| m.max(e.ratio))
    }

    pub fn passes(&self, threshold: T) -> bool {
        self.entries.iter().all(|e| e.ratio <= threshold)
    }

    /// Integrator drift is not negligible against the statistical error.
    pub fn needs_dt_refinement(&self) -> bool {
        self.mean_energy_drift > self.energy_std_error
    }

    pub fn report<S: Serialize>(&self, scenario: &S) -> ExperimentReport {
        let mut r = ExperimentReport::new("invariance", scenario, "t");
        for e in &self.entries {
            let t = e.t.to_f64_lossy();
            r.push(t, &format!("{}:Q", e.observable), e.qt.value.to_f64_lossy(), e.qt.std_error.to_f64_lossy(), self.runtime_s);
            r.push(t, &format!("{}:ratio", e.observable), e.ratio.to_f64_lossy(), 0.0, self.runtime_s);
        }
        if !self.passes(T::lit(3.0)) {
            r.flags.push(format!("invariance ratio {} exceeds 3", self.max_ratio().to_f64_lossy()));
        }
        if self.needs_dt_refinement() {
            r.flags.push("integrator drift exceeds the statistical error; refine dt".into());
        }
        r
    }
}

/// `|Q(t) - Q(0)| / SE` for the battery `observables` under the Galerkin flow.
pub fn invariance_test<T: Real>(
    model: &ClassicalModel<T>,
    ensemble: &GibbsEnsemble<T>,
    flow: &NlsFlow<T>,
    observables: &[InvarianceObservable],
    t_list: &[T],
) -> Result<InvarianceReport<T>, ExperimentError> {
    if !flow.config().galerkin {
        return Err(ExperimentError::Config("invariance needs the Galerkin flow".into()));
    }
    if flow.config().potential != model.potential || flow.config().kappa != model.kappa {
        return Err(ExperimentError::Config("flow and ensemble use different models".into()));
    }
    let start = Instant::now();
    let mut times: Vec<T> = t_list.to_vec();
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let n_obs = observables.len();
    let n_t = times.len();
    // per sample: observables at t = 0 and at each time, plus the energy drift at the last time
    let rows: Vec<Result<(Vec<T>, Vec<Vec<T>>, T), FlowError>> = ensemble
        .fields
        .par_iter()
        .zip(ensemble.weights.par_iter())
        .map(|(phi, w)| {
            let at0: Vec<T> = observables.iter().map(|o| o.evaluate(model, phi)).collect();
            if *w == T::zero() {
                return Ok((at0.clone(), vec![at0; n_t], T::zero()));
            }
            let states = evolve_to(flow, phi, &times)?;
            let ats = states.iter().map(|s| observables.iter().map(|o| o.evaluate(model, s)).collect()).collect();
            let drift = match states.last() {
                Some(s) => crate::scalar::abs(model.hamiltonian_energy(s) - model.hamiltonian_energy(phi)),
                None => T::zero(),
            };
            Ok((at0, ats, drift))
        })
        .collect();
    let mut at0 = vec![Vec::with_capacity(ensemble.len()); n_obs];
    let mut ats = vec![vec![Vec::with_capacity(ensemble.len()); n_obs]; n_t];
    let mut drift = Vec::with_capacity(ensemble.len());
    for r in rows {
        let (a0, a, d) = r?;
        for o in 0..n_obs {
            at0[o].push(a0[o]);
            for ti in 0..n_t {
                ats[ti][o].push(a[ti][o]);
            }
        }
        drift.push(d);
    }
    let w = &ensemble.weights;
    let est = |v: &[T]| ratio_estimate(w, v).ok_or(ExperimentError::Classical(crate::classical::ClassicalError::Degenerate));
    let mut entries = Vec::new();
    for (o, obs) in observables.iter().enumerate() {
        let q0 = est(&at0[o])?;
        for (ti, t) in times.iter().enumerate() {
            let qt = est(&ats[ti][o])?;
            let diffs: Vec<T> = ats[ti][o].iter().zip(&at0[o]).map(|(a, b)| *a - *b).collect();
            let d = est(&diffs)?;
            let ratio = if qt.value == q0.value { T::zero() } else { crate::scalar::abs(qt.value - q0.value) / qt.std_error };
            let paired_z = if d.value == T::zero() { T::zero() } else { crate::scalar::abs(d.value) / d.std_error };
            entries.push(InvarianceEntry { observable: obs.label(), t: *t, q0, qt, ratio, paired_z });
        }
    }
    let energies: Vec<T> = ensemble.fields.par_iter().map(|phi| model.hamiltonian_energy(phi)).collect();
    Ok(InvarianceReport {
        entries,
        mean_energy_drift: est(&drift)?.value,
        energy_std_error: est(&energies)?.std_error,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FlowSweepPoint<T> {
    pub epsilon: T,
    /// `max_t ∥S_t φ₀ - S^ε_t φ₀∥₂`
    pub distance: T,
}

/// Flow distance between `w` and `w_eps(ε)` for each `ε`.
pub fn epsilon_flow_study<T: Real>(
    phi0: &SpectralField<T>,
    w: &Potential<T>,
    w_eps: impl Fn(T) -> Result<Potential<T>, ExperimentError>,
    eps_list: &[T],
    t_final: T,
    config: &FlowConfig<T>,
    stride: usize,
) -> Result<Vec<FlowSweepPoint<T>>, ExperimentError> {
    eps_list
        .iter()
        .map(|&epsilon| {
            let we = w_eps(epsilon)?;
            Ok(FlowSweepPoint { epsilon, distance: flow_difference(phi0, w, &we, t_final, config, stride)? })
        })
        .collect()
}
