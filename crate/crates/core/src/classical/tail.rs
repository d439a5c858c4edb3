//! Integrability of `e^{c∥φ∥₄⁴}` on `{∥φ∥₂ ≤ B}` under the free field,
//! checked by Monte Carlo across mode cutoffs, together with the empirical
//! exceedance curve of `∥φ∥₄`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::free_field::{sample_free_field, RngStream};
use crate::spectral::{l4_pow4, ModeSet};
use crate::stats::{mean_with_error, Estimate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailLevel {
    pub k_max: usize,
    pub estimate: Estimate<f64>,
    /// `|E_k - E_prev| / |E_prev|` against the previous level.
    pub rel_change: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedancePoint {
    pub lambda: f64,
    pub lambda_sq: f64,
    pub count: usize,
    /// `log P(∥φ∥₄ > λ, ∥φ∥₂ ≤ B)`, absent when no sample exceeds `λ`.
    pub log_prob: Option<f64>,
    /// Delta-method standard error of `log_prob`.
    pub log_prob_se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub kappa: f64,
    pub b: f64,
    pub c: f64,
    pub n_samples: usize,
    pub levels: Vec<TailLevel>,
    /// Exceedance curve at the finest level.
    pub exceedance: Vec<ExceedancePoint>,
}

impl TailReport {
    /// Largest relative change between successive levels.
    pub fn max_rel_change(&self) -> Option<f64> {
        self.levels.iter().filter_map(|l| l.rel_change).reduce(f64::max)
    }

    pub fn is_decreasing(&self) -> bool {
        let lp: Vec<f64> = self.exceedance.iter().filter_map(|p| p.log_prob).collect();
        lp.windows(2).all(|w| w[1] <= w[0])
    }

    /// Second differences of `log P` against `λ²` (uniform grid), each
    /// paired with a standard error. Convexity means all are `≥ 0`.
    pub fn second_differences(&self) -> Vec<(f64, f64)> {
        let pts: Vec<&ExceedancePoint> = self.exceedance.iter().filter(|p| p.log_prob.is_some()).collect();
        pts.windows(3)
            .map(|w| {
                let v = w[0].log_prob.unwrap() - 2.0 * w[1].log_prob.unwrap() + w[2].log_prob.unwrap();
                let se = (w[0].log_prob_se.unwrap().powi(2)
                    + 4.0 * w[1].log_prob_se.unwrap().powi(2)
                    + w[2].log_prob_se.unwrap().powi(2))
                .sqrt();
                (v, se)
            })
            .collect()
    }

    /// Convex within `z` standard errors of each second difference.
    pub fn is_convex(&self, z: f64) -> bool {
        self.second_differences().iter().all(|(v, se)| *v >= -z * se)
    }
}

/// Estimates `E_μ[e^{c∥φ∥₄⁴} 1{∥φ∥₂ ≤ B}]` at each `k_max` in `levels`
/// (coupled: all levels see the same low modes) and the exceedance curve
/// at `n_lambda` points equally spaced in `λ²`.
pub fn tail_moment_check(
    kappa: f64,
    b: f64,
    c: f64,
    n_samples: usize,
    levels: &[usize],
    stream: RngStream,
    n_lambda: usize,
) -> Result<TailReport, String> {
    if !(b > 0.0) {
        return Err(format!("B must be positive, got {b}"));
    }
    if levels.is_empty() || n_samples == 0 {
        return Err("need at least one level and one sample".into());
    }
    let top = *levels.iter().max().unwrap();
    let b2 = b * b;
    // per sample: (moment integrand per level, ∥φ∥₄ at the top level if inside the ball)
    let rows: Vec<(Vec<f64>, Option<f64>)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let phi = sample_free_field::<f64, _>(ModeSet::new(top), kappa, &mut stream.sample_rng(i)).expect("kappa > 0");
            let vals = levels
                .iter()
                .map(|&k| {
                    let f = phi.resized(ModeSet::new(k));
                    if f.mass() <= b2 {
                        (c * l4_pow4(&f)).exp()
                    } else {
                        0.0
                    }
                })
                .collect();
            let l4 = (phi.mass() <= b2).then(|| l4_pow4(&phi).powf(0.25));
            (vals, l4)
        })
        .collect();
    let mut out_levels = Vec::with_capacity(levels.len());
    let mut prev: Option<f64> = None;
    for (j, &k) in levels.iter().enumerate() {
        let xs: Vec<f64> = rows.iter().map(|r| r.0[j]).collect();
        let estimate = mean_with_error(&xs).unwrap();
        let rel_change = prev.map(|p| if p == 0.0 { 0.0 } else { (estimate.value - p).abs() / p.abs() });
        prev = Some(estimate.value);
        out_levels.push(TailLevel { k_max: k, estimate, rel_change });
    }
    let mut inside: Vec<f64> = rows.iter().filter_map(|r| r.1).collect();
    inside.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let exceedance = exceedance_curve(&inside, n_samples, n_lambda);
    Ok(TailReport { kappa, b, c, n_samples, levels: out_levels, exceedance })
}

/// Grid from the median of the conditioned `∥φ∥₄` to the value exceeded
/// by 30 samples, uniform in `λ²`.
fn exceedance_curve(sorted: &[f64], total: usize, n_lambda: usize) -> Vec<ExceedancePoint> {
    if sorted.len() < 60 || n_lambda < 2 {
        return Vec::new();
    }
    let lo = sorted[sorted.len() / 2];
    let hi = sorted[sorted.len() - 30];
    let (lo2, hi2) = (lo * lo, hi * hi);
    (0..n_lambda)
        .map(|i| {
            let l2 = lo2 + (hi2 - lo2) * i as f64 / (n_lambda - 1) as f64;
            let lambda = l2.sqrt();
            let count = sorted.len() - sorted.partition_point(|v| *v <= lambda);
            let p = count as f64 / total as f64;
            let (log_prob, log_prob_se) = if count > 0 {
                (Some(p.ln()), Some(((1.0 - p) / count as f64).sqrt()))
            } else {
                (None, None)
            };
            ExceedancePoint { lambda, lambda_sq: l2, count, log_prob, log_prob_se }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_limits() {
        let s = RngStream::new(1, 0);
        let tiny = tail_moment_check(1.0, 1e-6, 0.5, 2000, &[2, 4], s, 8).unwrap();
        assert!(tiny.levels.iter().all(|l| l.estimate.value == 0.0));
        let free = tail_moment_check(1.0, 1.0, 0.0, 2000, &[2, 4], s, 8).unwrap();
        for l in &free.levels {
            assert!((0.0..=1.0).contains(&l.estimate.value));
        }
        assert!(tail_moment_check(1.0, 0.0, 0.5, 10, &[2], s, 8).is_err());
    }
}
