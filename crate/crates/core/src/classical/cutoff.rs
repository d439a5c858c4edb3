//! Mass cutoff `f` with `0 ≤ f ≤ 1` and `supp f ⊂ [-K, K]`.

use serde::{Deserialize, Serialize};

use crate::scalar::{abs, Real};

/// Cutoff function of the mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", bound = "T: Real")]
pub enum CutoffFunction<T> {
    /// `f = 1` on `[0, plateau·K]`, a C^∞ step down to `0` at `K`.
    Bump { k_radius: T, plateau: T },
    /// `f ≡ 1`; admissible only without interaction.
    Diagnostic,
}

impl<T: Real> Default for CutoffFunction<T> {
    fn default() -> Self {
        CutoffFunction::Bump { k_radius: T::lit(4.0), plateau: T::lit(0.5) }
    }
}

impl<T: Real> CutoffFunction<T> {
    pub fn bump(k_radius: T, plateau: T) -> Result<Self, String> {
        let f = CutoffFunction::Bump { k_radius, plateau };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), String> {
        if let CutoffFunction::Bump { k_radius, plateau } = self {
            if !(*k_radius > T::zero() && k_radius.is_finite()) {
                return Err(format!("cutoff radius must be positive, got {k_radius}"));
            }
            if !(*plateau > T::zero() && *plateau < T::one()) {
                return Err(format!("cutoff plateau must lie in (0, 1), got {plateau}"));
            }
        }
        Ok(())
    }

    /// `K`, or `None` for the diagnostic cutoff.
    pub fn radius(&self) -> Option<T> {
        match self {
            CutoffFunction::Bump { k_radius, .. } => Some(*k_radius),
            CutoffFunction::Diagnostic => None,
        }
    }

    pub fn is_diagnostic(&self) -> bool {
        matches!(self, CutoffFunction::Diagnostic)
    }

    pub fn eval(&self, x: T) -> T {
        match self {
            CutoffFunction::Diagnostic => T::one(),
            CutoffFunction::Bump { k_radius, plateau } => {
                let ax = abs(x);
                let start = *plateau * *k_radius;
                if ax <= start {
                    T::one()
                } else if ax >= *k_radius {
                    T::zero()
                } else {
                    let s = (ax - start) / (*k_radius - start);
                    let (a, b) = (psi(T::one() - s), psi(s));
                    a / (a + b)
                }
            }
        }
    }

    /// `f^{1/q}` (used by the Duhamel bounds).
    pub fn eval_pow(&self, x: T, q: T) -> T {
        self.eval(x).powf(q)
    }
}

#[inline]
fn psi<T: Real>(t: T) -> T {
    if t <= T::zero() {
        T::zero()
    } else {
        (-T::one() / t).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_shape() {
        let f = CutoffFunction::<f64>::default();
        assert_eq!(f.eval(0.0), 1.0);
        assert_eq!(f.eval(2.0), 1.0);
        assert_eq!(f.eval(4.0), 0.0);
        assert_eq!(f.eval(-5.0), 0.0);
        assert!((f.eval(3.0) - 0.5).abs() < 1e-15);
        assert!(CutoffFunction::bump(4.0, 1.0).is_err());
        assert!(CutoffFunction::bump(-1.0, 0.5).is_err());
    }

    #[test]
    fn flat_at_both_junctions() {
        // every finite-difference derivative vanishes to high order at the joins
        let f = CutoffFunction::<f64>::default();
        for x in [2.0, 4.0] {
            for h in [1e-2, 2e-2] {
                assert!((f.eval(x + h) - f.eval(x - h)).abs() < 1e-20);
            }
        }
    }

    proptest! {
        #[test]
        fn bounded_monotone_and_compactly_supported(k in 0.5f64..10.0, p in 0.05f64..0.95, a in 0.0f64..1.2, b in 0.0f64..1.2) {
            let f = CutoffFunction::bump(k, p).unwrap();
            let (x, y) = (a.min(b) * k, a.max(b) * k);
            prop_assert!((0.0..=1.0).contains(&f.eval(x)));
            prop_assert!(f.eval(x) >= f.eval(y));
            prop_assert_eq!(f.eval(x), f.eval(-x));
            if y >= k {
                prop_assert_eq!(f.eval(y), 0.0);
            }
        }
    }
}
