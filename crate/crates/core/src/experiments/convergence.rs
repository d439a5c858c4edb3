use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classical::{correlation_gamma_p, GammaEstimate};
use crate::experiments::{strictly_decreasing, ExperimentError, ExperimentReport, Scenario};
use crate::fock::gamma_tau_p;
use crate::linalg::trace_norm;
use crate::scalar::Real;
use crate::stats::Estimate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ConvergencePoint<T> {
    pub tau: T,
    pub epsilon: Option<T>,
    pub n_max: usize,
    pub z_quantum: T,
    /// `|𝒵_τ - ẑ|`
    pub e_z: T,
    /// `∥γ_{τ,1} - γ̂_1∥_tr`
    pub e_gamma: T,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ConvergenceReport<T> {
    pub scenario: Scenario<T>,
    pub config_hash: String,
    pub z_classical: Estimate<T>,
    pub gamma_classical: GammaEstimate<T>,
    /// Upper bound on the standard error of `e_γ`: `√d ∥SE(γ̂)∥_F`.
    pub gamma_std_error: T,
    pub points: Vec<ConvergencePoint<T>>,
    pub classical_runtime_s: f64,
}

impl<T: Real> ConvergenceReport<T> {
    pub fn e_z(&self) -> Vec<T> {
        self.points.iter().map(|p| p.e_z).collect()
    }

    pub fn e_gamma(&self) -> Vec<T> {
        self.points.iter().map(|p| p.e_gamma).collect()
    }

    pub fn e_z_decreasing(&self) -> bool {
        strictly_decreasing(&self.e_z())
    }

    pub fn e_gamma_decreasing(&self) -> bool {
        strictly_decreasing(&self.e_gamma())
    }

    fn min_of(xs: &[T]) -> T {
        xs.iter().fold(T::infinity(), |m, x| m.min(*x))
    }

    /// The classical uncertainty is not small against the smallest gap.
    pub fn z_inconclusive(&self) -> bool {
        !(self.z_classical.std_error < Self::min_of(&self.e_z()) / T::lit(2.0))
    }

    pub fn gamma_inconclusive(&self) -> bool {
        !(self.gamma_std_error < Self::min_of(&self.e_gamma()) / T::lit(2.0))
    }

    pub fn report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new("convergence", &self.scenario, "tau");
        for p in &self.points {
            let t = p.tau.to_f64_lossy();
            r.push(t, "z_quantum", p.z_quantum.to_f64_lossy(), 0.0, p.runtime_s);
            r.push(t, "e_z", p.e_z.to_f64_lossy(), self.z_classical.std_error.to_f64_lossy(), p.runtime_s);
            r.push(t, "e_gamma", p.e_gamma.to_f64_lossy(), self.gamma_std_error.to_f64_lossy(), p.runtime_s);
            if let Some(e) = p.epsilon {
                r.push(t, "epsilon", e.to_f64_lossy(), 0.0, 0.0);
            }
        }
        r.push(f64::NAN, "z_classical", self.z_classical.value.to_f64_lossy(), self.z_classical.std_error.to_f64_lossy(), self.classical_runtime_s);
        if self.z_inconclusive() {
            r.flags.push("inconclusive: classical SE of z not below half the smallest e_Z".into());
        }
        if self.gamma_inconclusive() {
            r.flags.push("inconclusive: classical SE of γ not below half the smallest e_γ".into());
        }
        r
    }
}

/// `e_Z(τ)` and `e_γ(τ)` along `taus`, against one classical reference on
/// the same truncated model.
pub fn convergence_study_tau<T: Real>(scenario: &Scenario<T>, taus: &[T]) -> Result<ConvergenceReport<T>, ExperimentError> {
    scenario.validate()?;
    if taus.is_empty() {
        return Err(ExperimentError::Config("empty τ list".into()));
    }
    let start = Instant::now();
    let model = scenario.classical_model()?;
    let ensemble = scenario.ensemble(&model)?;
    let z_classical = ensemble.partition_function();
    let gamma_classical = correlation_gamma_p(&ensemble, 1)?;
    let d = T::from_usize_lossy(gamma_classical.matrix.rows());
    let se = &gamma_classical.std_error;
    let fro = (0..se.rows()).flat_map(|i| se.row(i).iter().copied()).map(|x| x * x).sum::<T>().sqrt();
    let gamma_std_error = d.sqrt() * fro;
    let classical_runtime_s = start.elapsed().as_secs_f64();

    let mut points = Vec::with_capacity(taus.len());
    for &tau in taus {
        let t0 = Instant::now();
        let q = scenario.quantum_model(tau)?;
        let state = q.thermal_state(T::one())?;
        let z_quantum = state.z_tau() / state.z_tau_0();
        let g = gamma_tau_p(&state, 1)?;
        points.push(ConvergencePoint {
            tau,
            epsilon: scenario.epsilon(tau),
            n_max: q.basis().n_max(),
            z_quantum,
            e_z: crate::scalar::abs(z_quantum - z_classical.value),
            e_gamma: trace_norm(&g.sub(&gamma_classical.matrix)),
            runtime_s: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(ConvergenceReport {
        config_hash: scenario.config_hash(),
        scenario: scenario.clone(),
        z_classical,
        gamma_classical,
        gamma_std_error,
        points,
        classical_runtime_s,
    })
}
