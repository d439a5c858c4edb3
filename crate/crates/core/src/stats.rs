//! Monte Carlo estimators.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Estimate<T> {
    pub value: T,
    pub std_error: T,
    pub n_samples: usize,
}

impl<T: Real> Estimate<T> {
    pub fn exact(value: T) -> Self {
        Self { value, std_error: T::zero(), n_samples: 0 }
    }

    /// |value - target| in units of the standard error (infinite when the
    /// error is zero and the values differ).
    pub fn z_score(&self, target: T) -> T {
        let d = num_traits::Float::abs(self.value - target);
        if d == T::zero() {
            T::zero()
        } else {
            d / self.std_error
        }
    }
}

/// Sample mean with the standard error of the mean. For i.i.d. samples this
/// coincides with the delete-one jackknife error of the mean.
pub fn mean_with_error<T: Real>(xs: &[T]) -> Option<Estimate<T>> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let nf = T::from_usize_lossy(n);
    let mean = xs.iter().copied().sum::<T>() / nf;
    let se = if n > 1 {
        let var = xs.iter().map(|x| (*x - mean) * (*x - mean)).sum::<T>() / T::from_usize_lossy(n - 1);
        (var / nf).sqrt()
    } else {
        T::zero()
    };
    Some(Estimate { value: mean, std_error: se, n_samples: n })
}

/// Self-normalised importance-sampling ratio `Σ wᵢxᵢ / Σ wᵢ` with the
/// delta-method standard error `sqrt(Σ wᵢ²(xᵢ - r)²) / Σ wᵢ`.
///
/// Returns `None` when the weights sum to zero.
pub fn ratio_estimate<T: Real>(weights: &[T], values: &[T]) -> Option<Estimate<T>> {
    assert_eq!(weights.len(), values.len());
    let sw: T = weights.iter().copied().sum();
    if sw <= T::zero() {
        return None;
    }
    let r = weights.iter().zip(values).map(|(w, x)| *w * *x).sum::<T>() / sw;
    let var = weights
        .iter()
        .zip(values)
        .map(|(w, x)| {
            let d = *w * (*x - r);
            d * d
        })
        .sum::<T>();
    Some(Estimate { value: r, std_error: var.sqrt() / sw, n_samples: weights.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_observable_has_zero_error() {
        let e = mean_with_error(&[1.0f64; 10]).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert!(mean_with_error::<f64>(&[]).is_none());
    }

    #[test]
    fn ratio_of_constant_is_exact() {
        let w = [0.5f64, 2.0, 0.0, 1.5];
        let e = ratio_estimate(&w, &[1.0; 4]).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert!(ratio_estimate(&[0.0f64; 3], &[1.0; 3]).is_none());
    }

    #[test]
    fn ratio_with_unit_weights_matches_plain_mean() {
        let xs = [1.0f64, 4.0, 2.0, 7.0];
        let plain = mean_with_error(&xs).unwrap();
        let ratio = ratio_estimate(&[1.0; 4], &xs).unwrap();
        assert!((plain.value - ratio.value).abs() < 1e-15);
        // delta method omits the n/(n-1) correction
        let corr = (3.0f64 / 4.0).sqrt();
        assert!((plain.std_error * corr - ratio.std_error).abs() < 1e-14);
    }
}
