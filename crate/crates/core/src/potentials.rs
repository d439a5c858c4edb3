//! Pair interaction potentials `w` on the torus and their bounded
//! approximations: L¹ clipping and the scaled-profile delta approximation
//! `w^ε(x) = ε⁻¹ U([x]/ε)`.
//!
//! Every variant is real and even, so `ŵ(m) = ŵ(-m)` is real.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::integrate_piecewise;
use crate::scalar::{abs, Real};
use crate::spectral::grid_point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("potential is not even: {0}")]
    NotEven(String),
    #[error("delta profile integrates to {integral}, expected -1")]
    Normalization { integral: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("grid of {n} samples resolves |m| < {}, requested {requested}", n / 2)]
    Resolution { n: usize, requested: usize },
    #[error("potential has no pointwise samples (exact delta)")]
    NoSamples,
}

/// Profiles `U` for the delta approximation. Each is even, supported in
/// `[-half_width, half_width] ⊂ Λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", bound = "T: Real")]
pub enum DeltaProfile<T> {
    /// `U(y) = -(1/a)(1 - |y|/a)` on `|y| ≤ a`.
    Triangle { half_width: T },
    /// `U(y) = -1/(2a)` on `-a ≤ y < a`.
    Box { half_width: T },
    /// Piecewise-linear even profile through `(y, U(y))` knots with
    /// `0 = y_0 < y_1 < …`, zero beyond the last knot. Need not be nonpositive.
    PiecewiseLinear { knots: Vec<[T; 2]> },
}

impl<T: Real> Default for DeltaProfile<T> {
    fn default() -> Self {
        DeltaProfile::Triangle { half_width: T::lit(0.5) }
    }
}

impl<T: Real> DeltaProfile<T> {
    fn validate(&self) -> Result<(), PotentialError> {
        let half = T::lit(0.5);
        match self {
            DeltaProfile::Triangle { half_width } | DeltaProfile::Box { half_width } => {
                if !(*half_width > T::zero() && *half_width <= half) {
                    return Err(PotentialError::Parameter(format!("half_width must lie in (0, 1/2], got {half_width}")));
                }
            }
            DeltaProfile::PiecewiseLinear { knots } => {
                if knots.len() < 2 || knots[0][0] != T::zero() {
                    return Err(PotentialError::Parameter("piecewise profile needs >= 2 knots starting at y = 0".into()));
                }
                if knots.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    return Err(PotentialError::Parameter("profile knots must be strictly increasing".into()));
                }
                if knots.last().unwrap()[0] > half {
                    return Err(PotentialError::Parameter("profile support must lie in [-1/2, 1/2]".into()));
                }
                if knots.iter().any(|k| !k[1].is_finite()) {
                    return Err(PotentialError::Parameter("profile values must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Right edge of the support.
    pub fn support(&self) -> T {
        match self {
            DeltaProfile::Triangle { half_width } | DeltaProfile::Box { half_width } => *half_width,
            DeltaProfile::PiecewiseLinear { knots } => knots.last().map_or(T::zero(), |k| k[0]),
        }
    }

    /// Nonnegative breakpoints where the profile is not smooth.
    fn kinks(&self) -> Vec<T> {
        match self {
            DeltaProfile::Triangle { half_width } | DeltaProfile::Box { half_width } => vec![T::zero(), *half_width],
            DeltaProfile::PiecewiseLinear { knots } => knots.iter().map(|k| k[0]).collect(),
        }
    }

    pub fn value(&self, y: T) -> T {
        let ay = abs(y);
        match self {
            DeltaProfile::Triangle { half_width: a } => {
                if ay <= *a {
                    -(T::one() / *a) * (T::one() - ay / *a)
                } else {
                    T::zero()
                }
            }
            DeltaProfile::Box { half_width: a } => {
                if y >= -*a && y < *a {
                    -T::one() / (T::lit(2.0) * *a)
                } else {
                    T::zero()
                }
            }
            DeltaProfile::PiecewiseLinear { knots } => {
                for w in knots.windows(2) {
                    let ([y0, u0], [y1, u1]) = (w[0], w[1]);
                    if ay >= y0 && ay <= y1 {
                        return u0 + (u1 - u0) * (ay - y0) / (y1 - y0);
                    }
                }
                T::zero()
            }
        }
    }

    fn sup_abs(&self) -> T {
        match self {
            DeltaProfile::Triangle { half_width: a } => T::one() / *a,
            DeltaProfile::Box { half_width: a } => T::one() / (T::lit(2.0) * *a),
            DeltaProfile::PiecewiseLinear { knots } => knots.iter().fold(T::zero(), |m, k| m.max(abs(k[1]))),
        }
    }

    fn symmetric_breaks(&self) -> Vec<T> {
        let mut b: Vec<T> = self.kinks().into_iter().flat_map(|y| [-y, y]).collect();
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        b.dedup();
        b
    }

    /// `∫ g(U(y), y) dy` by Gauss–Legendre on each linear piece.
    fn integrate(&self, g: impl Fn(T, T) -> T) -> T {
        integrate_piecewise(|y| g(self.value(y), y), &self.symmetric_breaks(), 24)
    }

    pub fn integral(&self) -> T {
        self.integrate(|u, _| u)
    }
}

/// Interaction potential `w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", bound = "T: Real")]
pub enum Potential<T> {
    Constant { c: T },
    /// `ŵ(m)` for `m = -M..=M`; zero beyond.
    FourierCoeffs { coeffs: Vec<T> },
    /// Values on the grid `x_j = -1/2 + j/n`; coefficients by the trapezoid rule.
    GridSamples { values: Vec<T> },
    /// `w^ε(x) = ε⁻¹ U([x]/ε)`.
    DeltaApprox { profile: DeltaProfile<T>, eps: T },
    /// `w = -δ`, i.e. `ŵ(m) = -1` for every `m`.
    ExactDelta,
    /// `w · 1{|w| ≤ 1/ε}` evaluated on the base potential's samples.
    L1Clip { base: Box<Potential<T>>, eps: T },
}

const EVEN_TOL: f64 = 1e-12;
const MIN_POINTS_ACROSS_SUPPORT: usize = 32;

impl<T: Real> Potential<T> {
    pub fn constant(c: T) -> Self {
        Potential::Constant { c }
    }

    pub fn exact_delta() -> Self {
        Potential::ExactDelta
    }

    pub fn zero() -> Self {
        Potential::Constant { c: T::zero() }
    }

    /// From a symmetric coefficient list `ŵ(-M), …, ŵ(M)`.
    pub fn fourier(coeffs: Vec<T>) -> Result<Self, PotentialError> {
        let p = Potential::FourierCoeffs { coeffs };
        p.validate()?;
        Ok(p)
    }

    pub fn grid(values: Vec<T>) -> Result<Self, PotentialError> {
        let p = Potential::GridSamples { values };
        p.validate()?;
        Ok(p)
    }

    /// Samples `g` on an `n`-point grid (evenness is still checked).
    pub fn grid_from_fn(n: usize, g: impl Fn(T) -> T) -> Result<Self, PotentialError> {
        Self::grid((0..n).map(|j| g(grid_point(j, n))).collect())
    }

    /// Grid potential whose samples are cell averages of `g`, computed by
    /// Gauss–Legendre per cell. Handles integrable point singularities
    /// away from quadrature nodes.
    pub fn grid_from_cell_averages(n: usize, g: impl Fn(T) -> T) -> Result<Self, PotentialError> {
        let h = T::one() / T::from_usize_lossy(n);
        let half = T::lit(0.5) * h;
        let values = (0..n)
            .map(|j| {
                let x = grid_point::<T>(j, n);
                integrate_piecewise(&g, &[x - half, x, x + half], 32) / h
            })
            .collect();
        Self::grid(values)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Potential::Constant { c } => *c == T::zero(),
            Potential::FourierCoeffs { coeffs } => coeffs.iter().all(|c| *c == T::zero()),
            Potential::GridSamples { values } => values.iter().all(|c| *c == T::zero()),
            _ => false,
        }
    }

    /// Whether the potential is essentially bounded.
    pub fn is_bounded(&self) -> bool {
        !matches!(self, Potential::ExactDelta)
    }

    /// Re-checks construction invariants (used after deserialization).
    pub fn validate(&self) -> Result<(), PotentialError> {
        match self {
            Potential::Constant { c } => {
                if !c.is_finite() {
                    return Err(PotentialError::Parameter("constant must be finite".into()));
                }
            }
            Potential::FourierCoeffs { coeffs } => {
                if coeffs.len() % 2 == 0 {
                    return Err(PotentialError::Parameter("coefficient list must have odd length 2M+1".into()));
                }
                let n = coeffs.len();
                let scale = coeffs.iter().fold(T::one(), |m, c| m.max(abs(*c)));
                for i in 0..n / 2 {
                    if abs(coeffs[i] - coeffs[n - 1 - i]) > T::lit(EVEN_TOL) * scale {
                        return Err(PotentialError::NotEven(format!("ŵ({}) != ŵ({})", i as i64 - (n / 2) as i64, n / 2 - i)));
                    }
                }
            }
            Potential::GridSamples { values } => {
                let n = values.len();
                if n < 2 || n % 2 != 0 {
                    return Err(PotentialError::Parameter(format!("grid needs an even number of samples, got {n}")));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(PotentialError::Parameter("grid samples must be finite".into()));
                }
                let scale = values.iter().fold(T::one(), |m, c| m.max(abs(*c)));
                for j in 1..n {
                    if abs(values[j] - values[n - j]) > T::lit(EVEN_TOL) * scale {
                        return Err(PotentialError::NotEven(format!("w(x_{j}) != w(-x_{j})")));
                    }
                }
            }
            Potential::DeltaApprox { profile, eps } => {
                profile.validate()?;
                if !(*eps > T::zero() && *eps <= T::one()) {
                    return Err(PotentialError::Parameter(format!("eps must lie in (0, 1], got {eps}")));
                }
                let integral = profile.integral();
                if abs(integral + T::one()) > T::lit(1e-10) {
                    return Err(PotentialError::Normalization { integral: integral.to_f64_lossy() });
                }
            }
            Potential::ExactDelta => {}
            Potential::L1Clip { base, eps } => {
                if !(*eps > T::zero()) {
                    return Err(PotentialError::Parameter(format!("clip eps must be positive, got {eps}")));
                }
                base.validate()?;
                if !base.is_bounded() {
                    return Err(PotentialError::NoSamples);
                }
            }
        }
        Ok(())
    }

    /// `ŵ(m)` for `m = 0..=up_to` (the potential is even).
    pub fn coefficient_table(&self, up_to: usize) -> Result<Vec<T>, PotentialError> {
        match self {
            Potential::Constant { c } => {
                let mut v = vec![T::zero(); up_to + 1];
                v[0] = *c;
                Ok(v)
            }
            Potential::FourierCoeffs { coeffs } => {
                let mid = coeffs.len() / 2;
                Ok((0..=up_to).map(|m| coeffs.get(mid + m).copied().unwrap_or_else(T::zero)).collect())
            }
            Potential::GridSamples { values } => grid_coefficients(values, up_to),
            Potential::DeltaApprox { profile, eps } => {
                let two_pi = T::lit(2.0) * T::PI();
                Ok((0..=up_to)
                    .map(|m| {
                        let freq = two_pi * T::from_usize_lossy(m) * *eps;
                        profile.integrate(|u, y| u * (freq * y).cos())
                    })
                    .collect())
            }
            Potential::ExactDelta => Ok(vec![-T::one(); up_to + 1]),
            Potential::L1Clip { .. } => grid_coefficients(&self.grid_samples()?, up_to),
        }
    }

    /// `ŵ(m)` for `|m| ≤ up_to`, in order `m = -up_to..=up_to`.
    pub fn fourier_coefficients(&self, up_to: usize) -> Result<Vec<T>, PotentialError> {
        let half = self.coefficient_table(up_to)?;
        Ok((0..=2 * up_to).map(|i| half[(i as i64 - up_to as i64).unsigned_abs() as usize]).collect())
    }

    /// Pointwise value; `None` for the exact delta.
    pub fn value_at(&self, x: T) -> Option<T> {
        let xr = wrap(x);
        match self {
            Potential::Constant { c } => Some(*c),
            Potential::FourierCoeffs { coeffs } => {
                let mid = coeffs.len() / 2;
                let two_pi = T::lit(2.0) * T::PI();
                let mut s = coeffs[mid];
                for m in 1..=mid {
                    s += T::lit(2.0) * coeffs[mid + m] * (two_pi * T::from_usize_lossy(m) * xr).cos();
                }
                Some(s)
            }
            Potential::GridSamples { values } => {
                let n = values.len();
                let j = ((xr + T::lit(0.5)) * T::from_usize_lossy(n)).round().to_f64_lossy() as usize % n;
                Some(values[j])
            }
            Potential::DeltaApprox { profile, eps } => Some(profile.value(xr / *eps) / *eps),
            Potential::ExactDelta => None,
            Potential::L1Clip { base, eps } => base.value_at(x).map(|v| clip(v, *eps)),
        }
    }

    /// Declared sampling resolution for potentials that carry samples.
    pub fn native_resolution(&self) -> Option<usize> {
        match self {
            Potential::GridSamples { values } => Some(values.len()),
            Potential::DeltaApprox { profile, eps } => {
                let width = T::lit(2.0) * profile.support() * *eps;
                let need = (T::from_usize_lossy(MIN_POINTS_ACROSS_SUPPORT) / width).ceil().to_f64_lossy() as usize;
                Some(need.max(64).next_power_of_two())
            }
            Potential::L1Clip { base, .. } => base.native_resolution(),
            _ => None,
        }
    }

    /// Samples at the native resolution (cell averages for the delta
    /// approximation, so that their mean equals `∫ w`).
    pub fn grid_samples(&self) -> Result<Vec<T>, PotentialError> {
        match self {
            Potential::GridSamples { values } => Ok(values.clone()),
            Potential::Constant { c } => Ok(vec![*c; 64]),
            Potential::FourierCoeffs { coeffs } => {
                let n = (8 * (coeffs.len() / 2 + 1)).next_power_of_two().max(64);
                Ok((0..n).map(|j| self.value_at(grid_point(j, n)).unwrap()).collect())
            }
            Potential::DeltaApprox { profile, eps } => {
                let n = self.native_resolution().unwrap();
                Ok(delta_cell_averages(profile, *eps, n))
            }
            Potential::ExactDelta => Err(PotentialError::NoSamples),
            Potential::L1Clip { base, eps } => Ok(base.grid_samples()?.into_iter().map(|v| clip(v, *eps)).collect()),
        }
    }

    /// `∥w∥_∞`, or an upper bound `Σ|ŵ(m)|` for coefficient-defined
    /// potentials. `None` for the exact delta.
    pub fn sup_norm(&self) -> Option<T> {
        match self {
            Potential::Constant { c } => Some(abs(*c)),
            Potential::FourierCoeffs { coeffs } => Some(coeffs.iter().map(|c| abs(*c)).sum()),
            Potential::GridSamples { values } => Some(values.iter().fold(T::zero(), |m, v| m.max(abs(*v)))),
            Potential::DeltaApprox { profile, eps } => Some(profile.sup_abs() / *eps),
            Potential::ExactDelta => None,
            Potential::L1Clip { .. } => self.grid_samples().ok().map(|s| s.iter().fold(T::zero(), |m, v| m.max(abs(*v)))),
        }
    }

    /// `∥w∥_{L¹}` (total mass of `|w|`; 1 for the delta).
    pub fn l1_norm(&self) -> T {
        match self {
            Potential::Constant { c } => abs(*c),
            Potential::DeltaApprox { profile, .. } => profile.integrate(|u, _| abs(u)),
            Potential::ExactDelta => T::one(),
            _ => {
                let s = self.grid_samples().unwrap_or_default();
                s.iter().map(|v| abs(*v)).sum::<T>() / T::from_usize_lossy(s.len().max(1))
            }
        }
    }

    /// `Σ_{|m| ≤ band} |ŵ(m)|`: bounds the sup norm of the interaction kernel
    /// seen by fields whose density is band-limited to `band`.
    pub fn band_sup_bound(&self, band: usize) -> Result<T, PotentialError> {
        let t = self.coefficient_table(band)?;
        Ok(abs(t[0]) + T::lit(2.0) * t.iter().skip(1).map(|c| abs(*c)).sum::<T>())
    }

    /// Returns the L¹-clipped potential `w · 1{|w| ≤ 1/ε}`.
    pub fn clip_l1(&self, eps: T) -> Result<Self, PotentialError> {
        let p = Potential::L1Clip { base: Box::new(self.clone()), eps };
        p.validate()?;
        Ok(p)
    }
}

/// Builds `w^ε(x) = ε⁻¹ U([x]/ε)`, rejecting profiles with `∫U ≠ -1`.
pub fn build_delta_approx<T: Real>(profile: DeltaProfile<T>, eps: T) -> Result<Potential<T>, PotentialError> {
    let p = Potential::DeltaApprox { profile, eps };
    p.validate()?;
    Ok(p)
}

/// `w · 1{|w| ≤ 1/ε}`.
pub fn clip_l1<T: Real>(w: &Potential<T>, eps: T) -> Result<Potential<T>, PotentialError> {
    w.clip_l1(eps)
}

/// `true` iff `ŵ(m) ≥ -1e-12` for all `|m| ≤ up_to`.
pub fn positive_type_check<T: Real>(w: &Potential<T>, up_to: usize) -> Result<bool, PotentialError> {
    Ok(w.coefficient_table(up_to)?.iter().all(|c| *c >= T::lit(-1e-12)))
}

#[inline]
fn clip<T: Real>(v: T, eps: T) -> T {
    if abs(v) <= T::one() / eps {
        v
    } else {
        T::zero()
    }
}

/// Representative of `x` in `[-1/2, 1/2)`.
fn wrap<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    x - (x + half).floor()
}

fn grid_coefficients<T: Real>(values: &[T], up_to: usize) -> Result<Vec<T>, PotentialError> {
    let n = values.len();
    if up_to >= n / 2 {
        return Err(PotentialError::Resolution { n, requested: up_to });
    }
    let two_pi = T::lit(2.0) * T::PI();
    let nf = T::from_usize_lossy(n);
    Ok((0..=up_to)
        .map(|m| {
            let mf = T::from_usize_lossy(m);
            values
                .iter()
                .enumerate()
                .map(|(j, v)| *v * (two_pi * mf * grid_point::<T>(j, n)).cos())
                .sum::<T>()
                / nf
        })
        .collect())
}

fn delta_cell_averages<T: Real>(profile: &DeltaProfile<T>, eps: T, n: usize) -> Vec<T> {
    let h = T::one() / T::from_usize_lossy(n);
    let half_h = T::lit(0.5) * h;
    let kinks: Vec<T> = profile
        .kinks()
        .into_iter()
        .flat_map(|y| {
            let s = y * eps;
            [-s, s, -s - T::one(), s - T::one(), -s + T::one(), s + T::one()]
        })
        .collect();
    let value = |x: T| profile.value(wrap(x) / eps) / eps;
    (0..n)
        .map(|j| {
            let x = grid_point::<T>(j, n);
            let (a, b) = (x - half_h, x + half_h);
            let mut breaks: Vec<T> = vec![a, b];
            breaks.extend(kinks.iter().copied().filter(|k| *k > a && *k < b));
            breaks.extend([-T::lit(0.5), T::lit(0.5)]);
            breaks.retain(|k| *k >= a && *k <= b);
            breaks.sort_by(|p, q| p.partial_cmp(q).unwrap());
            breaks.dedup();
            integrate_piecewise(value, &breaks, 8) / h
        })
        .collect()
}
