//! Taylor coefficients of `ζ ↦ E_μ[Θ(ξ) e^{-ζW} f(N)]`:
//! `a_m = ((-1)^m / m!) E_μ[Θ(ξ) W^m f(N)]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{ClassicalError, ClassicalModel, GibbsEnsemble, ThetaSpec};
use crate::scalar::Real;
use crate::stats::{mean_with_error, Estimate};

pub const MAX_SERIES_ORDER: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SeriesTerm<T> {
    pub m: usize,
    pub estimate: Estimate<T>,
    /// `K^p ∥ξ∥ (K² ∥w∥_∞)^m / (2^m m!)` when `w` is bounded.
    pub bound: Option<T>,
}

fn factorial<T: Real>(m: usize) -> T {
    (1..=m).fold(T::one(), |a, k| a * T::from_usize_lossy(k))
}

/// Upper bound on `|a_m|` from the cutoff radius and `∥w∥_∞`.
pub fn coefficient_bound<T: Real>(k_radius: T, xi_norm: T, p: usize, w_sup: T, m: usize) -> T {
    let base = k_radius.powi(p as i32) * xi_norm;
    base * (k_radius * k_radius * w_sup).powi(m as i32) / (T::lit(2.0).powi(m as i32) * factorial::<T>(m))
}

/// `a_m`, estimated from the unweighted free draws of `ensemble`.
pub fn series_coefficient_a_m<T: Real>(
    model: &ClassicalModel<T>,
    ensemble: &GibbsEnsemble<T>,
    xi: &ThetaSpec<T>,
    m: usize,
) -> Result<SeriesTerm<T>, ClassicalError> {
    if m > MAX_SERIES_ORDER {
        return Err(ClassicalError::Size(format!("series order {m} exceeds {MAX_SERIES_ORDER}")));
    }
    let sign = if m % 2 == 0 { T::one() } else { -T::one() };
    let scale = sign / factorial::<T>(m);
    let xs: Vec<T> = (0..ensemble.len())
        .into_par_iter()
        .map(|i| {
            let f = model.cutoff.eval(ensemble.mass[i]);
            if f == T::zero() {
                return T::zero();
            }
            scale * xi.evaluate(&ensemble.fields[i]).re * ensemble.interaction[i].powi(m as i32) * f
        })
        .collect();
    let estimate = mean_with_error(&xs).ok_or(ClassicalError::Degenerate)?;
    let bound = match (model.cutoff.radius(), model.interaction_sup_bound()) {
        (Some(k), Some(w)) => Some(coefficient_bound(k, xi.operator_norm(), xi.p(), w, m)),
        _ => None,
    };
    Ok(SeriesTerm { m, estimate, bound })
}

/// Per-sample comparison of `Σ_{m ≤ M} a_m ζ^m` with `E_μ[Θ(ξ) e^{-ζW} f(N)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SeriesComparison<T> {
    pub order: usize,
    pub partial_sum: Estimate<T>,
    pub numerator: Estimate<T>,
    /// `numerator - partial_sum`, estimated samplewise.
    pub remainder: Estimate<T>,
}

pub fn series_partial_sum<T: Real>(
    model: &ClassicalModel<T>,
    ensemble: &GibbsEnsemble<T>,
    xi: &ThetaSpec<T>,
    order: usize,
    zeta: T,
) -> Result<SeriesComparison<T>, ClassicalError> {
    if order > MAX_SERIES_ORDER {
        return Err(ClassicalError::Size(format!("series order {order} exceeds {MAX_SERIES_ORDER}")));
    }
    let triples: Vec<(T, T)> = (0..ensemble.len())
        .into_par_iter()
        .map(|i| {
            let f = model.cutoff.eval(ensemble.mass[i]);
            if f == T::zero() {
                return (T::zero(), T::zero());
            }
            let theta = xi.evaluate(&ensemble.fields[i]).re * f;
            let x = -zeta * ensemble.interaction[i];
            let (mut term, mut partial) = (T::one(), T::one());
            for m in 1..=order {
                term = term * x / T::from_usize_lossy(m);
                partial += term;
            }
            (theta * partial, theta * x.exp())
        })
        .collect();
    let partial: Vec<T> = triples.iter().map(|t| t.0).collect();
    let full: Vec<T> = triples.iter().map(|t| t.1).collect();
    let diff: Vec<T> = triples.iter().map(|t| t.1 - t.0).collect();
    Ok(SeriesComparison {
        order,
        partial_sum: mean_with_error(&partial).ok_or(ClassicalError::Degenerate)?,
        numerator: mean_with_error(&full).ok_or(ClassicalError::Degenerate)?,
        remainder: mean_with_error(&diff).ok_or(ClassicalError::Degenerate)?,
    })
}

/// Samplewise remainders `Θ(ξ) f(N) (e^{-ζW} - Σ_{m≤M} (-ζW)^m/m!)`.
pub fn series_remainder_samples<T: Real>(
    model: &ClassicalModel<T>,
    ensemble: &GibbsEnsemble<T>,
    xi: &ThetaSpec<T>,
    order: usize,
    zeta: T,
) -> Vec<T> {
    (0..ensemble.len())
        .map(|i| {
            let f = model.cutoff.eval(ensemble.mass[i]);
            let x = -zeta * ensemble.interaction[i];
            let (mut term, mut partial) = (T::one(), T::one());
            for m in 1..=order {
                term = term * x / T::from_usize_lossy(m);
                partial += term;
            }
            xi.evaluate(&ensemble.fields[i]).re * f * (x.exp() - partial)
        })
        .collect()
}
