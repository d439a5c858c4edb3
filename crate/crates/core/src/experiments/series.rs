use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classical::{series_coefficient_a_m, series_partial_sum, SeriesComparison, SeriesTerm, ThetaSpec, MAX_SERIES_ORDER};
use crate::experiments::{strictly_decreasing, ExperimentError, ExperimentReport, Scenario};
use crate::fock::{duhamel_coefficient_a_tau_m, DuhamelQuadrature, DuhamelTerm, MAX_DUHAMEL_ORDER};
use crate::scalar::{abs, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct QuantumSeriesPoint<T> {
    pub tau: T,
    pub terms: Vec<DuhamelTerm<T>>,
    /// `|a_{τ,m} - a_m|` for the computed quantum orders
    pub differences: Vec<T>,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SeriesReport<T> {
    pub scenario: Scenario<T>,
    pub xi: ThetaSpec<T>,
    pub classical: Vec<SeriesTerm<T>>,
    pub partial_sum: SeriesComparison<T>,
    pub quantum: Vec<QuantumSeriesPoint<T>>,
}

impl<T: Real> SeriesReport<T> {
    /// `|a_m| - 3 SE ≤ bound` for every classical term with a bound.
    pub fn classical_within_bounds(&self) -> bool {
        self.classical
            .iter()
            .all(|t| t.bound.is_none_or(|b| abs(t.estimate.value) - T::lit(3.0) * t.estimate.std_error <= b))
    }

    pub fn quantum_within_bounds(&self) -> bool {
        self.quantum.iter().flat_map(|p| &p.terms).all(|t| t.bound.is_none_or(|b| t.value.norm() <= b))
    }

    /// `|a_{τ,m} - a_m|` strictly decreasing in `τ` for order `m`.
    pub fn differences_decreasing(&self, m: usize) -> bool {
        let d: Vec<T> = self.quantum.iter().filter_map(|p| p.differences.get(m).copied()).collect();
        d.len() == self.quantum.len() && strictly_decreasing(&d)
    }

    /// `|partial sum - numerator| ≤ z · SE(numerator)`.
    pub fn partial_sum_agrees(&self, z: T) -> bool {
        let p = &self.partial_sum;
        abs(p.partial_sum.value - p.numerator.value) <= z * p.numerator.std_error
    }

    pub fn report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new("series", &(&self.scenario, &self.xi), "tau");
        for t in &self.classical {
            let m = format!("a_{}", t.m);
            r.push(f64::INFINITY, &m, t.estimate.value.to_f64_lossy(), t.estimate.std_error.to_f64_lossy(), 0.0);
            if let Some(b) = t.bound {
                r.push(f64::INFINITY, &format!("{m}_bound"), b.to_f64_lossy(), 0.0, 0.0);
            }
        }
        for p in &self.quantum {
            let tau = p.tau.to_f64_lossy();
            for t in &p.terms {
                r.push(tau, &format!("a_tau_{}", t.m), t.value.re.to_f64_lossy(), 0.0, p.runtime_s);
            }
            for (m, d) in p.differences.iter().enumerate() {
                let se = self.classical[m].estimate.std_error.to_f64_lossy();
                r.push(tau, &format!("diff_{m}"), d.to_f64_lossy(), se, p.runtime_s);
            }
        }
        let ps = &self.partial_sum;
        r.push(f64::INFINITY, "partial_sum", ps.partial_sum.value.to_f64_lossy(), ps.partial_sum.std_error.to_f64_lossy(), 0.0);
        r.push(f64::INFINITY, "numerator", ps.numerator.value.to_f64_lossy(), ps.numerator.std_error.to_f64_lossy(), 0.0);
        if !self.classical_within_bounds() || !self.quantum_within_bounds() {
            r.flags.push("series coefficient exceeds its bound".into());
        }
        r
    }
}

/// Classical `a_m` for `m ≤ 6`, the order-6 partial sum at `ζ = 1`, and
/// quantum `a_{τ,m}` for `m ≤ quantum_order` along `taus`.
pub fn series_study<T: Real>(
    scenario: &Scenario<T>,
    xi: &ThetaSpec<T>,
    taus: &[T],
    quantum_order: usize,
    quad: DuhamelQuadrature,
) -> Result<SeriesReport<T>, ExperimentError> {
    scenario.validate()?;
    if quantum_order > MAX_DUHAMEL_ORDER {
        return Err(ExperimentError::Config(format!("quantum order {quantum_order} exceeds {MAX_DUHAMEL_ORDER}")));
    }
    let model = scenario.classical_model()?;
    let ensemble = scenario.ensemble(&model)?;
    let classical = (0..=MAX_SERIES_ORDER)
        .map(|m| series_coefficient_a_m(&model, &ensemble, xi, m))
        .collect::<Result<Vec<_>, _>>()?;
    let partial_sum = series_partial_sum(&model, &ensemble, xi, MAX_SERIES_ORDER, T::one())?;
    let mut quantum = Vec::new();
    for &tau in taus {
        let start = Instant::now();
        let q = scenario.quantum_model(tau)?;
        let terms = (0..=quantum_order)
            .map(|m| duhamel_coefficient_a_tau_m(&q, xi, m, quad))
            .collect::<Result<Vec<_>, _>>()?;
        let differences = terms.iter().map(|t| (t.value - num_complex::Complex::new(classical[t.m].estimate.value, T::zero())).norm()).collect();
        quantum.push(QuantumSeriesPoint { tau, terms, differences, runtime_s: start.elapsed().as_secs_f64() });
    }
    Ok(SeriesReport { scenario: scenario.clone(), xi: xi.clone(), classical, partial_sum, quantum })
}
