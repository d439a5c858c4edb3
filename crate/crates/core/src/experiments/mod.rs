//! Theorem-level comparisons between the quantum and classical models:
//! τ-sweeps of partition functions and correlations, time-dependent
//! correlations, Gibbs-measure invariance under the truncated flow, and
//! flow-approximation sweeps in `ε`.

mod convergence;
mod dynamics;
mod series;

pub use convergence::{convergence_study_tau, ConvergencePoint, ConvergenceReport};
pub use dynamics::{
    classical_time_correlation, epsilon_flow_study, invariance_test, quantum_time_correlation, FlowSweepPoint,
    InvarianceObservable, InvarianceReport, TimedTheta,
};
pub use series::{series_study, QuantumSeriesPoint, SeriesReport};

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classical::{ClassicalError, ClassicalModel, CutoffFunction, GibbsEnsemble};
use crate::fock::{exact_n_max, FockError, QuantumModel};
use crate::flow::{FlowConfig, FlowError};
use crate::free_field::RngStream;
use crate::potentials::{build_delta_approx, DeltaProfile, Potential, PotentialError};
use crate::scalar::Real;
use crate::spectral::ModeSet;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// How the quantum side regularizes the interaction at a given `τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum Regularization<T> {
    /// `w · 1{|w| ≤ 1/ε_τ}`
    ClipL1,
    /// `ε_τ⁻¹ U(x/ε_τ)` in place of the exact delta
    DeltaApprox { profile: DeltaProfile<T> },
}

/// `ε_τ = τ^{-exponent}` together with the regularization it drives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EpsilonSchedule<T> {
    pub exponent: T,
    pub regularization: Regularization<T>,
}

/// `ε_τ = τ^{-exponent}`.
pub fn epsilon_schedule<T: Real>(tau: T, exponent: T) -> T {
    tau.powf(-exponent)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum NMaxPolicy {
    /// `⌈K τ⌉`
    Auto,
    Explicit { n_max: usize },
}

/// Flow discretization for dynamical experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FlowSettings<T> {
    pub dt: T,
    pub galerkin: bool,
    pub n_x: Option<usize>,
}

impl<T: Real> Default for FlowSettings<T> {
    fn default() -> Self {
        Self { dt: T::lit(1e-3), galerkin: true, n_x: None }
    }
}

/// A complete model description shared by the classical and quantum sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Scenario<T> {
    pub k_max: usize,
    pub kappa: T,
    pub potential: Potential<T>,
    pub cutoff: CutoffFunction<T>,
    pub n_samples: usize,
    pub seed: u64,
    pub n_max: NMaxPolicy,
    pub schedule: Option<EpsilonSchedule<T>>,
    pub flow: FlowSettings<T>,
}

impl<T: Real> Scenario<T> {
    pub fn new(k_max: usize, kappa: T, potential: Potential<T>, n_samples: usize, seed: u64) -> Self {
        Self {
            k_max,
            kappa,
            potential,
            cutoff: CutoffFunction::default(),
            n_samples,
            seed,
            n_max: NMaxPolicy::Auto,
            schedule: None,
            flow: FlowSettings::default(),
        }
    }

    pub fn mode_set(&self) -> ModeSet {
        ModeSet::new(self.k_max)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        crate::spectral::eigenvalue(0, self.kappa).map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.potential.validate()?;
        self.cutoff.validate().map_err(ExperimentError::Config)?;
        if self.n_samples == 0 {
            return Err(ExperimentError::Config("n_samples must be positive".into()));
        }
        if let Some(s) = &self.schedule {
            if !(s.exponent > T::zero()) {
                return Err(ExperimentError::Config("schedule exponent must be positive".into()));
            }
            if matches!(s.regularization, Regularization::DeltaApprox { .. }) && self.potential != Potential::ExactDelta {
                return Err(ExperimentError::Config("the delta schedule needs the exact delta potential".into()));
            }
        }
        if !(self.flow.dt > T::zero()) {
            return Err(ExperimentError::Config("flow dt must be positive".into()));
        }
        Ok(())
    }

    /// `ε_τ`, when a schedule is configured.
    pub fn epsilon(&self, tau: T) -> Option<T> {
        self.schedule.as_ref().map(|s| epsilon_schedule(tau, s.exponent))
    }

    /// The interaction used by the quantum model at `τ`.
    pub fn quantum_potential(&self, tau: T) -> Result<Potential<T>, ExperimentError> {
        Ok(match &self.schedule {
            None => self.potential.clone(),
            Some(s) => {
                let eps = epsilon_schedule(tau, s.exponent);
                match &s.regularization {
                    Regularization::ClipL1 => self.potential.clip_l1(eps)?,
                    Regularization::DeltaApprox { profile } => build_delta_approx(profile.clone(), eps)?,
                }
            }
        })
    }

    pub fn n_max(&self, tau: T) -> Result<usize, ExperimentError> {
        match (self.n_max, self.cutoff.radius()) {
            (NMaxPolicy::Explicit { n_max }, Some(k)) if k * tau > T::from_usize_lossy(n_max) => Err(
                ExperimentError::Config(format!("n_max = {n_max} below K·τ = {}", (k * tau).to_f64_lossy())),
            ),
            (NMaxPolicy::Explicit { n_max }, _) => Ok(n_max),
            (NMaxPolicy::Auto, Some(k)) => Ok(exact_n_max(k, tau)),
            (NMaxPolicy::Auto, None) => Err(ExperimentError::Config("the diagnostic cutoff needs an explicit n_max".into())),
        }
    }

    pub fn classical_model(&self) -> Result<ClassicalModel<T>, ExperimentError> {
        Ok(ClassicalModel::new(self.mode_set(), self.kappa, self.potential.clone(), self.cutoff.clone())?)
    }

    pub fn quantum_model(&self, tau: T) -> Result<QuantumModel<T>, ExperimentError> {
        Ok(QuantumModel::new(
            self.mode_set(),
            self.kappa,
            tau,
            self.quantum_potential(tau)?,
            self.cutoff.clone(),
            Some(self.n_max(tau)?),
        )?)
    }

    pub fn ensemble(&self, model: &ClassicalModel<T>) -> Result<GibbsEnsemble<T>, ExperimentError> {
        Ok(GibbsEnsemble::build(model, self.n_samples, RngStream::new(self.seed, 0))?)
    }

    pub fn flow_config(&self) -> FlowConfig<T> {
        let ms = self.mode_set();
        let n_x = self.flow.n_x.unwrap_or_else(|| if self.flow.galerkin { ms.quartic_grid() } else { 4 * ms.quartic_grid() });
        FlowConfig { dt: self.flow.dt, kappa: self.kappa, potential: self.potential.clone(), galerkin: self.flow.galerkin, n_x }
    }

    /// SHA-256 over the canonical JSON serialization.
    pub fn config_hash(&self) -> String {
        config_hash(self)
    }
}

/// SHA-256 (hex) of the canonical JSON form of `value`: object keys sorted,
/// no whitespace.
pub fn config_hash<S: Serialize>(value: &S) -> String {
    let v = serde_json::to_value(value).expect("serializable");
    let canonical = serde_json::to_string(&v).expect("serializable");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// One row of the flat CSV table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub sweep: f64,
    pub metric: String,
    pub estimate: f64,
    pub std_error: f64,
    pub runtime_s: f64,
}

/// Flat form shared by all studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub config_hash: String,
    pub scenario: serde_json::Value,
    pub sweep_variable: String,
    pub rows: Vec<ReportRow>,
    pub flags: Vec<String>,
}

impl ExperimentReport {
    pub fn new<S: Serialize>(kind: &str, scenario: &S, sweep_variable: &str) -> Self {
        Self {
            kind: kind.into(),
            config_hash: config_hash(scenario),
            scenario: serde_json::to_value(scenario).expect("serializable"),
            sweep_variable: sweep_variable.into(),
            rows: Vec::new(),
            flags: Vec::new(),
        }
    }

    pub fn push(&mut self, sweep: f64, metric: &str, estimate: f64, std_error: f64, runtime_s: f64) {
        self.rows.push(ReportRow { sweep, metric: metric.into(), estimate, std_error, runtime_s });
    }

    /// Header `config_hash,<sweep>,metric,estimate,std_error,runtime_s`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "config_hash,{},metric,estimate,std_error,runtime_s", self.sweep_variable)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:e},{:e},{}",
                self.config_hash, r.sweep, r.metric, r.estimate, r.std_error, r.runtime_s
            )?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(std::io::Error::other)
    }

    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }
}

/// `true` iff every entry is strictly smaller than the one before.
pub fn strictly_decreasing<T: PartialOrd + Copy>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        assert!((epsilon_schedule(16.0f64, 0.25) - 0.5).abs() < 1e-15);
        assert!((epsilon_schedule(256.0f64, 0.25) - 0.25).abs() < 1e-15);
        let e: Vec<f64> = [1.0, 2.0, 4.0, 8.0].iter().map(|t| epsilon_schedule(*t, 0.25)).collect();
        assert!(strictly_decreasing(&e));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = Scenario::new(1, 1.0f64, Potential::constant(0.2), 100, 7);
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
        b.seed = 8;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn n_max_policy() {
        let mut s = Scenario::new(1, 1.0f64, Potential::constant(0.2), 100, 7);
        assert_eq!(s.n_max(4.0).unwrap(), 16);
        assert_eq!(s.n_max(2.5).unwrap(), 10);
        s.n_max = NMaxPolicy::Explicit { n_max: 10 };
        assert!(s.n_max(4.0).is_err());
    }

    #[test]
    fn delta_schedule_builds_approximations() {
        let mut s = Scenario::new(1, 1.0f64, Potential::exact_delta(), 100, 7);
        s.schedule = Some(EpsilonSchedule {
            exponent: 0.25,
            regularization: Regularization::DeltaApprox { profile: DeltaProfile::default() },
        });
        s.validate().unwrap();
        match s.quantum_potential(16.0).unwrap() {
            Potential::DeltaApprox { eps, .. } => assert!((eps - 0.5).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }
}
