//! Fourier analysis on the unit torus `[-1/2, 1/2)`: symmetric mode sets,
//! the spectrum of `-Δ + κ`, band-limited fields, uniform-grid transforms,
//! norms and the damped heat semigroup.
//!
//! Conventions: `ĝ(k) = ∫ g(x) e^{-2πikx} dx`, grid points
//! `x_j = -1/2 + j/n`, eigenfunctions `e^{2πikx}` with `k ∈ ℤ`.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{cis, czero, Cplx, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid of {n_x} points cannot represent {d} modes without aliasing")]
    Aliasing { n_x: usize, d: usize },
    #[error("grid of {n_x} points is too coarse for an exact quartic quantity (need at least {required})")]
    Precision { n_x: usize, required: usize },
    #[error("grid size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("expected {expected} coefficients, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite coefficient at mode {0}")]
    NonFinite(i64),
}

/// The symmetric index set `{-k_max, …, k_max}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeSet {
    pub k_max: usize,
}

impl ModeSet {
    pub const fn new(k_max: usize) -> Self {
        Self { k_max }
    }

    /// Number of modes, `2 k_max + 1`.
    pub const fn dim(&self) -> usize {
        2 * self.k_max + 1
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> + Clone {
        let k = self.k_max as i64;
        -k..=k
    }

    #[inline]
    pub fn mode(&self, index: usize) -> i64 {
        index as i64 - self.k_max as i64
    }

    #[inline]
    pub fn index_of(&self, k: i64) -> Option<usize> {
        let kk = self.k_max as i64;
        (-kk..=kk).contains(&k).then(|| (k + kk) as usize)
    }

    /// Smallest power-of-two grid on which quartic quantities are alias-free.
    pub fn quartic_grid(&self) -> usize {
        (4 * self.k_max + 1).next_power_of_two().max(4)
    }
}

/// `λ_k = 4π²k² + κ`.
pub fn eigenvalue<T: Real>(k: i64, kappa: T) -> Result<T, SpectralError> {
    if !(kappa > T::zero()) {
        return Err(SpectralError::Domain(format!("kappa must be positive, got {kappa}")));
    }
    let kf = T::from_i64_lossy(k);
    Ok(T::lit(4.0) * T::PI() * T::PI() * kf * kf + kappa)
}

/// Eigenvalues of `h = -Δ + κ` on a mode set.
#[derive(Clone, Debug, PartialEq)]
pub struct OneBodySpectrum<T> {
    pub mode_set: ModeSet,
    pub kappa: T,
    pub eigenvalues: Vec<T>,
}

impl<T: Real> OneBodySpectrum<T> {
    pub fn new(mode_set: ModeSet, kappa: T) -> Result<Self, SpectralError> {
        let eigenvalues = mode_set.modes().map(|k| eigenvalue(k, kappa)).collect::<Result<_, _>>()?;
        Ok(Self { mode_set, kappa, eigenvalues })
    }

    #[inline]
    pub fn lambda(&self, k: i64) -> T {
        self.eigenvalues[self.mode_set.index_of(k).expect("mode in set")]
    }

    /// Truncated `Tr(h⁻¹) = Σ_k 1/λ_k`.
    pub fn trace_inverse(&self) -> T {
        self.eigenvalues.iter().map(|l| T::one() / *l).sum()
    }
}

/// `Σ_{k ∈ ℤ} 1/(4π²k² + κ) = coth(√κ/2) / (2√κ)`.
pub fn trace_inverse_full<T: Real>(kappa: T) -> T {
    let s = kappa.sqrt();
    let half = s * T::lit(0.5);
    (half.cosh() / half.sinh()) / (T::lit(2.0) * s)
}

/// Fourier coefficients of a band-limited field, one per mode of `mode_set`,
/// stored in mode order `-k_max..=k_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<T> {
    mode_set: ModeSet,
    coeffs: Vec<Cplx<T>>,
}

impl<T: Real> SpectralField<T> {
    pub fn new(mode_set: ModeSet, coeffs: Vec<Cplx<T>>) -> Result<Self, SpectralError> {
        if coeffs.len() != mode_set.dim() {
            return Err(SpectralError::Length { expected: mode_set.dim(), got: coeffs.len() });
        }
        if let Some(i) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(SpectralError::NonFinite(mode_set.mode(i)));
        }
        Ok(Self { mode_set, coeffs })
    }

    pub fn zeros(mode_set: ModeSet) -> Self {
        Self { mode_set, coeffs: vec![czero(); mode_set.dim()] }
    }

    /// `amplitude · e^{2πikx}`.
    pub fn plane_wave(mode_set: ModeSet, k: i64, amplitude: Cplx<T>) -> Result<Self, SpectralError> {
        let i = mode_set
            .index_of(k)
            .ok_or_else(|| SpectralError::Domain(format!("mode {k} outside k_max {}", mode_set.k_max)))?;
        let mut f = Self::zeros(mode_set);
        f.coeffs[i] = amplitude;
        Ok(f)
    }

    pub fn mode_set(&self) -> ModeSet {
        self.mode_set
    }

    pub fn coeffs(&self) -> &[Cplx<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Cplx<T>] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Cplx<T>> {
        self.coeffs
    }

    /// `φ̂(k)`, zero outside the mode set.
    pub fn coeff(&self, k: i64) -> Cplx<T> {
        self.mode_set.index_of(k).map_or_else(czero, |i| self.coeffs[i])
    }

    /// `N = ∥φ∥₂² = Σ |φ̂(k)|²`.
    pub fn mass(&self) -> T {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Fourier coefficients of the density `|φ|²` for `m = -2k_max..=2k_max`,
    /// `n̂(m) = Σ_a conj(φ̂(a)) φ̂(a+m)`. Exact (no grid).
    pub fn density_coeffs(&self) -> Vec<Cplx<T>> {
        density_coeffs(&self.coeffs)
    }

    /// Projects onto a (possibly different) mode set, zero-filling new modes.
    pub fn resized(&self, mode_set: ModeSet) -> Self {
        let coeffs = mode_set.modes().map(|k| self.coeff(k)).collect();
        Self { mode_set, coeffs }
    }

    /// ∥self - other∥₂ over the union of both mode sets.
    pub fn l2_distance(&self, other: &Self) -> T {
        let k = self.mode_set.k_max.max(other.mode_set.k_max) as i64;
        (-k..=k).map(|m| (self.coeff(m) - other.coeff(m)).norm_sqr()).sum::<T>().sqrt()
    }
}

pub(crate) fn density_coeffs<T: Real>(c: &[Cplx<T>]) -> Vec<Cplx<T>> {
    let d = c.len();
    let mut out = vec![czero(); 2 * d - 1];
    // out[m + d - 1] for m in -(d-1)..=(d-1)
    for a in 0..d {
        let ca = c[a].conj();
        if ca.re == T::zero() && ca.im == T::zero() {
            continue;
        }
        for b in 0..d {
            out[b + d - 1 - a] += ca * c[b];
        }
    }
    out
}

/// Values of a field on the uniform grid `x_j = -1/2 + j/n_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField<T> {
    pub values: Vec<Cplx<T>>,
}

impl<T: Real> GridField<T> {
    pub fn n_x(&self) -> usize {
        self.values.len()
    }

    pub fn point(&self, j: usize) -> T {
        grid_point(j, self.values.len())
    }

    /// Trapezoid rule `(1/n) Σ |g_j|^p`.
    pub fn mean_abs_pow(&self, p: i32) -> T {
        let n = T::from_usize_lossy(self.values.len());
        self.values.iter().map(|v| v.norm().powi(p)).sum::<T>() / n
    }
}

#[inline]
pub fn grid_point<T: Real>(j: usize, n_x: usize) -> T {
    T::from_usize_lossy(j) / T::from_usize_lossy(n_x) - T::lit(0.5)
}

fn check_grid(n_x: usize) -> Result<(), SpectralError> {
    if n_x == 0 || !n_x.is_power_of_two() {
        return Err(SpectralError::NotPowerOfTwo(n_x));
    }
    Ok(())
}

/// Planned FFT pair for one grid size. Coefficients are exchanged by *bin*:
/// bin `b` carries wavenumber `b` for `b < n/2` and `b - n` otherwise.
#[derive(Clone)]
pub struct GridFft<T: Real> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for GridFft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridFft").field("n", &self.n).finish()
    }
}

impl<T: Real> GridFft<T> {
    pub fn new(n: usize) -> Result<Self, SpectralError> {
        check_grid(n)?;
        let mut planner = FftPlanner::new();
        Ok(Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Signed wavenumber of a bin.
    #[inline]
    pub fn wavenumber(&self, bin: usize) -> i64 {
        if bin < self.n / 2 {
            bin as i64
        } else {
            bin as i64 - self.n as i64
        }
    }

    #[inline]
    pub fn bin(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Grid values → `ĝ` per bin, by the trapezoid rule.
    pub fn analyze_in_place(&self, buf: &mut [Cplx<T>]) {
        self.forward.process(buf);
        let inv_n = T::one() / T::from_usize_lossy(self.n);
        for (b, v) in buf.iter_mut().enumerate() {
            let s = if b % 2 == 0 { inv_n } else { -inv_n };
            *v = *v * s;
        }
    }

    /// `ĝ` per bin → grid values.
    pub fn synthesize_in_place(&self, buf: &mut [Cplx<T>]) {
        for (b, v) in buf.iter_mut().enumerate() {
            if b % 2 == 1 {
                *v = -*v;
            }
        }
        self.inverse.process(buf);
    }
}

/// Evaluates a band-limited field on `n_x` grid points.
pub fn to_grid<T: Real>(field: &SpectralField<T>, n_x: usize) -> Result<GridField<T>, SpectralError> {
    let fft = GridFft::new(n_x)?;
    to_grid_with(&fft, field)
}

pub fn to_grid_with<T: Real>(fft: &GridFft<T>, field: &SpectralField<T>) -> Result<GridField<T>, SpectralError> {
    let ms = field.mode_set();
    if fft.len() < ms.dim() {
        return Err(SpectralError::Aliasing { n_x: fft.len(), d: ms.dim() });
    }
    let mut buf = vec![czero(); fft.len()];
    for (i, c) in field.coeffs().iter().enumerate() {
        buf[fft.bin(ms.mode(i))] = *c;
    }
    fft.synthesize_in_place(&mut buf);
    Ok(GridField { values: buf })
}

/// Discrete Fourier coefficients of grid values on `mode_set`.
pub fn from_grid<T: Real>(grid: &GridField<T>, mode_set: ModeSet) -> Result<SpectralField<T>, SpectralError> {
    let fft = GridFft::new(grid.n_x())?;
    from_grid_with(&fft, grid, mode_set)
}

pub fn from_grid_with<T: Real>(
    fft: &GridFft<T>,
    grid: &GridField<T>,
    mode_set: ModeSet,
) -> Result<SpectralField<T>, SpectralError> {
    if grid.n_x() != fft.len() {
        return Err(SpectralError::Length { expected: fft.len(), got: grid.n_x() });
    }
    if grid.n_x() < mode_set.dim() {
        return Err(SpectralError::Aliasing { n_x: grid.n_x(), d: mode_set.dim() });
    }
    let mut buf = grid.values.clone();
    fft.analyze_in_place(&mut buf);
    let coeffs = mode_set.modes().map(|k| buf[fft.bin(k)]).collect();
    Ok(SpectralField { mode_set, coeffs })
}

/// Norms of band-limited fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub enum Norm<T> {
    L2,
    L4,
    /// `(Σ (1+|k|)^{2s} |ĝ(k)|²)^{1/2}`
    Hs(T),
}

/// Exact norm, with `L4` evaluated on the smallest alias-free grid.
pub fn norm<T: Real>(field: &SpectralField<T>, kind: Norm<T>) -> T {
    match kind {
        Norm::L4 => norm_on_grid(field, kind, field.mode_set().quartic_grid()).expect("quartic grid is alias-free"),
        _ => norm_on_grid(field, kind, 0).expect("grid-free norm"),
    }
}

/// Norm computed with an explicit evaluation grid for `L4`
/// (the grid is ignored by `L2` and `Hs`).
pub fn norm_on_grid<T: Real>(field: &SpectralField<T>, kind: Norm<T>, n_x: usize) -> Result<T, SpectralError> {
    match kind {
        Norm::L2 => Ok(field.mass().sqrt()),
        Norm::Hs(s) => {
            let ms = field.mode_set();
            let sum: T = field
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let k = T::from_i64_lossy(ms.mode(i).abs());
                    (T::one() + k).powf(T::lit(2.0) * s) * c.norm_sqr()
                })
                .sum();
            Ok(sum.sqrt())
        }
        Norm::L4 => {
            let required = 4 * field.mode_set().k_max + 1;
            if n_x < required {
                return Err(SpectralError::Precision { n_x, required });
            }
            let g = to_grid(field, n_x)?;
            Ok(g.mean_abs_pow(4).sqrt().sqrt())
        }
    }
}

/// `∥φ∥₄⁴ = Σ_m |n̂(m)|²`, exact from the coefficients.
pub fn l4_pow4<T: Real>(field: &SpectralField<T>) -> T {
    field.density_coeffs().iter().map(|c| c.norm_sqr()).sum()
}

/// `e^{-t h}` acting on a band-limited field.
pub fn heat_propagator<T: Real>(t: T, field: &SpectralField<T>, kappa: T) -> Result<SpectralField<T>, SpectralError> {
    if !(t > T::zero()) {
        return Err(SpectralError::Domain(format!("heat time must be positive, got {t}")));
    }
    let ms = field.mode_set();
    let coeffs = field
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| eigenvalue(ms.mode(i), kappa).map(|l| *c * (-t * l).exp()))
        .collect::<Result<_, _>>()?;
    Ok(SpectralField { mode_set: ms, coeffs })
}

/// Serialized form `{k_max, kappa, coeffs: [[re, im], …]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub k_max: usize,
    pub kappa: f64,
    pub coeffs: Vec<[f64; 2]>,
}

impl FieldRecord {
    pub fn from_field<T: Real>(field: &SpectralField<T>, kappa: T) -> Self {
        Self {
            k_max: field.mode_set().k_max,
            kappa: kappa.to_f64_lossy(),
            coeffs: field.coeffs().iter().map(|c| [c.re.to_f64_lossy(), c.im.to_f64_lossy()]).collect(),
        }
    }

    pub fn to_field<T: Real>(&self) -> Result<SpectralField<T>, SpectralError> {
        SpectralField::new(
            ModeSet::new(self.k_max),
            self.coeffs.iter().map(|[re, im]| Complex::new(T::lit(*re), T::lit(*im))).collect(),
        )
    }
}

pub fn field_to_json<T: Real>(field: &SpectralField<T>, kappa: T) -> String {
    serde_json::to_string(&FieldRecord::from_field(field, kappa)).expect("field record serializes")
}

/// Parses a field record; returns the field and its `kappa`.
pub fn field_from_json<T: Real>(s: &str) -> Result<(SpectralField<T>, T), SpectralError> {
    let rec: FieldRecord =
        serde_json::from_str(s).map_err(|e| SpectralError::Domain(format!("invalid field record: {e}")))?;
    Ok((rec.to_field()?, T::lit(rec.kappa)))
}

/// `e^{iθ}` phase for the half-period grid shift, used by oracle-style checks.
pub fn plane_wave_value<T: Real>(k: i64, x: T) -> Cplx<T> {
    cis(T::lit(2.0) * T::PI() * T::from_i64_lossy(k) * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Cplx<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(eigenvalue(0, 1.0).unwrap(), 1.0);
        assert!((eigenvalue(1, 1.0f64).unwrap() - 40.47841760435743).abs() < 1e-12);
        assert_eq!(eigenvalue(-2, 0.5).unwrap(), eigenvalue(2, 0.5).unwrap());
        assert!(matches!(eigenvalue(1, 0.0), Err(SpectralError::Domain(_))));
        assert!(matches!(eigenvalue(1, -1.0), Err(SpectralError::Domain(_))));
    }

    #[test]
    fn mode_set_indexing() {
        let ms = ModeSet::new(2);
        assert_eq!(ms.dim(), 5);
        assert_eq!(ms.modes().collect::<Vec<_>>(), vec![-2, -1, 0, 1, 2]);
        assert_eq!(ms.index_of(-2), Some(0));
        assert_eq!(ms.index_of(3), None);
        assert_eq!(ms.quartic_grid(), 16);
        assert_eq!(ModeSet::new(0).quartic_grid(), 4);
    }

    #[test]
    fn constant_and_single_mode_transforms() {
        let ms = ModeSet::new(3);
        let grid = GridField { values: vec![c(2.5, -1.0); 16] };
        let f = from_grid(&grid, ms).unwrap();
        for k in ms.modes() {
            let expect = if k == 0 { c(2.5, -1.0) } else { c(0.0, 0.0) };
            assert!((f.coeff(k) - expect).norm() < 1e-14);
        }
        let values = (0..16).map(|j| plane_wave_value(1, grid_point::<f64>(j, 16))).collect();
        let f = from_grid(&GridField { values }, ms).unwrap();
        for k in ms.modes() {
            let expect = if k == 1 { 1.0 } else { 0.0 };
            assert!((f.coeff(k) - c(expect, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn aliasing_and_grid_errors() {
        let ms = ModeSet::new(4);
        let f = SpectralField::<f64>::zeros(ms);
        assert!(matches!(to_grid(&f, 8), Err(SpectralError::Aliasing { .. })));
        assert!(matches!(to_grid(&f, 12), Err(SpectralError::NotPowerOfTwo(12))));
        let g = GridField { values: vec![c(0.0, 0.0); 8] };
        assert!(matches!(from_grid(&g, ms), Err(SpectralError::Aliasing { .. })));
        assert!(matches!(norm_on_grid(&f, Norm::L4, 16), Err(SpectralError::Precision { .. })));
    }

    #[test]
    fn norm_examples() {
        let ms = ModeSet::new(2);
        let one = SpectralField::plane_wave(ms, 0, c(1.0, 0.0)).unwrap();
        assert!((norm(&one, Norm::L2) - 1.0).abs() < 1e-15);
        assert!((norm(&one, Norm::L4) - 1.0).abs() < 1e-14);
        let mut two = SpectralField::zeros(ms);
        two.coeffs_mut()[2] = c(1.0, 0.0);
        two.coeffs_mut()[3] = c(1.0, 0.0);
        assert!((norm(&two, Norm::L2) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(norm(&two, Norm::Hs(0.0)), norm(&two, Norm::L2));
        // grid and density-coefficient routes to ∥φ∥₄⁴
        assert!((norm(&two, Norm::L4).powi(4) - l4_pow4(&two)).abs() < 1e-13);
    }

    #[test]
    fn heat_propagator_examples() {
        let ms = ModeSet::new(2);
        let f = SpectralField::plane_wave(ms, 1, c(1.0, 0.0)).unwrap();
        let g = heat_propagator(1.0, &f, 1.0).unwrap();
        assert!((g.coeff(1).re - (-eigenvalue(1, 1.0f64).unwrap()).exp()).abs() < 1e-30);
        let tiny = heat_propagator(1e-14, &f, 1.0).unwrap();
        assert!((tiny.coeff(1) - f.coeff(1)).norm() < 1e-12);
        assert!(heat_propagator(0.0, &f, 1.0).is_err());
    }

    #[test]
    fn trace_inverse_partial_sums_approach_closed_form() {
        let full = trace_inverse_full(1.0f64);
        let mut prev = 0.0;
        for k_max in [0usize, 1, 4, 16, 256] {
            let t = OneBodySpectrum::new(ModeSet::new(k_max), 1.0).unwrap().trace_inverse();
            assert!(t > prev && t < full);
            prev = t;
        }
        assert!(full - prev < 1e-3);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let ms = ModeSet::new(2);
        let f = SpectralField::new(
            ms,
            vec![c(0.1, 1.0 / 3.0), c(-2.5e-17, 7.0), c(std::f64::consts::PI, 0.0), c(1e300, -1e-300), c(0.0, -0.0)],
        )
        .unwrap();
        let s = field_to_json(&f, 0.7);
        let (g, kappa) = field_from_json::<f64>(&s).unwrap();
        assert_eq!(kappa, 0.7);
        for (a, b) in f.coeffs().iter().zip(g.coeffs()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    fn field_strategy(k_max: usize) -> impl Strategy<Value = SpectralField<f64>> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * k_max + 1).prop_map(move |v| {
            SpectralField::new(ModeSet::new(k_max), v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn transform_round_trip_and_parseval(f in field_strategy(5), log_n in 4u32..8) {
            let n = 1usize << log_n;
            let g = to_grid(&f, n).unwrap();
            let back = from_grid(&g, f.mode_set()).unwrap();
            let scale = f.mass().sqrt().max(1e-300);
            prop_assert!(back.l2_distance(&f) <= 1e-12 * scale);
            prop_assert!((g.mean_abs_pow(2) - f.mass()).abs() <= 1e-12 * f.mass().max(1e-300));
        }

        #[test]
        fn heat_is_a_damped_contraction(f in field_strategy(3), t in 0.001f64..2.0, kappa in 0.1f64..5.0) {
            let g = heat_propagator(t, &f, kappa).unwrap();
            prop_assert!(g.mass().sqrt() <= (-t * kappa).exp() * f.mass().sqrt() * (1.0 + 1e-14));
        }

        #[test]
        fn eigenvalues_are_even_and_positive(k in -1000i64..1000, kappa in 1e-6f64..100.0) {
            let a = eigenvalue(k, kappa).unwrap();
            prop_assert_eq!(a, eigenvalue(-k, kappa).unwrap());
            prop_assert!(a > 0.0);
        }
    }
}
