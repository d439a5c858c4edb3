//! Strang-split integrator for the Hartree / local cubic NLS
//! `i∂ₜu = (-Δ + κ)u + (w * |u|²)u` on the torus.
//!
//! Two nonlinear substeps are available. The pseudospectral one multiplies
//! grid values by `e^{-i dt V}` with `V = w * |u|²` (exact, since `|u|` is
//! conserved pointwise). The Galerkin one integrates the projected equation
//! `i u̇ = P((w * |u|²)u)` on the mode set by two-stage Gauss collocation; the
//! composition is then the symmetric, mass-conserving flow of the truncated
//! Hamiltonian.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potentials::{Potential, PotentialError};
use crate::scalar::{cis, czero, Cplx, Real};
use crate::spectral::{eigenvalue, density_coeffs, GridFft, GridField, ModeSet, SpectralError, SpectralField};

pub const MAX_STEPS: f64 = 1e8;
const COLLOCATION_MAX_ITER: usize = 100;
/// Mode sets up to this size use direct convolutions in the Galerkin substep.
const DIRECT_CONVOLUTION_DIM: usize = 24;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("invalid flow configuration: {0}")]
    Config(String),
    #[error("non-finite state at t = {time}")]
    BlowUp { time: f64, last: Box<SpectralField<f64>> },
    #[error("collocation iteration did not converge at t = {time}")]
    NonConvergence { time: f64 },
}

/// Time step, dispersion shift, interaction and discretization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FlowConfig<T> {
    pub dt: T,
    pub kappa: T,
    pub potential: Potential<T>,
    pub galerkin: bool,
    pub n_x: usize,
}

impl<T: Real> FlowConfig<T> {
    pub fn galerkin(mode_set: ModeSet, kappa: T, potential: Potential<T>, dt: T) -> Self {
        Self { dt, kappa, potential, galerkin: true, n_x: mode_set.quartic_grid() }
    }

    pub fn pseudospectral(n_x: usize, kappa: T, potential: Potential<T>, dt: T) -> Self {
        Self { dt, kappa, potential, galerkin: false, n_x }
    }
}

/// A prepared flow: validated configuration with its FFT plan and `ŵ` table.
#[derive(Clone, Debug)]
pub struct NlsFlow<T: Real> {
    config: FlowConfig<T>,
    fft: GridFft<T>,
    /// `ŵ(|m|)` up to `n_x / 2`
    w_table: Vec<T>,
}

impl<T: Real> NlsFlow<T> {
    pub fn new(config: FlowConfig<T>) -> Result<Self, FlowError> {
        if !(config.dt > T::zero()) || !config.dt.is_finite() {
            return Err(FlowError::Config(format!("dt must be positive, got {}", config.dt)));
        }
        if config.n_x < 4 || !config.n_x.is_power_of_two() {
            return Err(FlowError::Config(format!("n_x must be a power of two ≥ 4, got {}", config.n_x)));
        }
        eigenvalue(0, config.kappa)?;
        config.potential.validate()?;
        let fft = GridFft::new(config.n_x)?;
        let w_table = config.potential.coefficient_table(config.n_x / 2)?;
        Ok(Self { config, fft, w_table })
    }

    pub fn config(&self) -> &FlowConfig<T> {
        &self.config
    }

    fn check_modes(&self, ms: ModeSet) -> Result<(), FlowError> {
        let need = if self.config.galerkin { 4 * ms.k_max + 1 } else { ms.dim() };
        if self.config.n_x < need {
            return Err(FlowError::Config(format!("n_x = {} below {need} for k_max = {}", self.config.n_x, ms.k_max)));
        }
        Ok(())
    }

    /// Mode set of the fields returned by [`NlsFlow::evolve`]: the input
    /// mode set in Galerkin mode, all grid modes but the Nyquist bin
    /// otherwise.
    pub fn output_modes(&self, input: ModeSet) -> ModeSet {
        if self.config.galerkin {
            input
        } else {
            ModeSet::new(self.config.n_x / 2 - 1)
        }
    }

    /// `S_t φ₀`. The step is shrunk so that an integer number of steps
    /// reaches `t`; negative `t` runs the flow backwards.
    pub fn evolve(&self, phi0: &SpectralField<T>, t: T) -> Result<SpectralField<T>, FlowError> {
        Ok(self.trajectory(phi0, t, usize::MAX)?.pop().expect("trajectory holds the final state").1)
    }

    /// States at every `stride` steps, always including `t = 0` and the final time.
    pub fn trajectory(
        &self,
        phi0: &SpectralField<T>,
        t: T,
        stride: usize,
    ) -> Result<Vec<(T, SpectralField<T>)>, FlowError> {
        let ms = phi0.mode_set();
        self.check_modes(ms)?;
        let steps = (crate::scalar::abs(t) / self.config.dt).ceil().to_f64_lossy();
        if steps > MAX_STEPS {
            return Err(FlowError::Config(format!("{steps} steps exceed the guard {MAX_STEPS}")));
        }
        let steps = steps as usize;
        let h = if steps == 0 { T::zero() } else { t / T::from_usize_lossy(steps) };
        let stride = stride.max(1);
        let mut out = Vec::new();
        if self.config.galerkin {
            let stepper = GalerkinStepper::new(self, ms, h)?;
            let mut u = phi0.coeffs().to_vec();
            out.push((T::zero(), phi0.clone()));
            for s in 1..=steps {
                stepper.step(&mut u).map_err(|_| FlowError::NonConvergence { time: (h * T::from_usize_lossy(s)).to_f64_lossy() })?;
                if u.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                    return Err(blow_up(&out, h * T::from_usize_lossy(s)));
                }
                if s % stride == 0 || s == steps {
                    out.push((h * T::from_usize_lossy(s), SpectralField::new(ms, u.clone())?));
                }
            }
        } else {
            let out_ms = self.output_modes(ms);
            let stepper = GridStepper::new(self, h)?;
            let mut g = load_grid(&self.fft, phi0);
            out.push((T::zero(), phi0.resized(out_ms)));
            for s in 1..=steps {
                stepper.step(&mut g);
                if g.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                    return Err(blow_up(&out, h * T::from_usize_lossy(s)));
                }
                if s % stride == 0 || s == steps {
                    out.push((h * T::from_usize_lossy(s), unload_grid(&self.fft, &g, out_ms)?));
                }
            }
        }
        Ok(out)
    }

    /// The Hamiltonian conserved (up to `O(dt²)`) by this discretization:
    /// the truncated `H` in Galerkin mode, the grid energy otherwise.
    pub fn energy(&self, phi: &SpectralField<T>) -> Result<T, FlowError> {
        let ms = phi.mode_set();
        self.check_modes(ms)?;
        let kinetic = |ms: ModeSet, c: &[Cplx<T>]| -> Result<T, FlowError> {
            let mut e = T::zero();
            for (i, z) in c.iter().enumerate() {
                e += eigenvalue(ms.mode(i), self.config.kappa)? * z.norm_sqr();
            }
            Ok(e)
        };
        if self.config.galerkin {
            let table = self.config.potential.coefficient_table(2 * ms.k_max)?;
            Ok(kinetic(ms, phi.coeffs())? + crate::classical::interaction_from_table(phi, &table))
        } else {
            let g = load_grid(&self.fft, phi);
            let n = self.fft.len();
            let mut dens: Vec<Cplx<T>> = g.iter().map(|v| Complex::new(v.norm_sqr(), T::zero())).collect();
            self.fft.analyze_in_place(&mut dens);
            let mut w = T::zero();
            for (b, d) in dens.iter().enumerate() {
                w += self.w_table[self.fft.wavenumber(b).unsigned_abs() as usize] * d.norm_sqr();
            }
            let mut coeffs = g.clone();
            self.fft.analyze_in_place(&mut coeffs);
            let mut e = T::zero();
            for (b, c) in coeffs.iter().enumerate() {
                e += eigenvalue(bin_mode(b, n), self.config.kappa)? * c.norm_sqr();
            }
            Ok(e + T::lit(0.5) * w)
        }
    }
}

fn blow_up<T: Real>(out: &[(T, SpectralField<T>)], time: T) -> FlowError {
    let last = out.last().map(|(_, f)| f).expect("initial state recorded");
    let coeffs = last.coeffs().iter().map(|c| Complex::new(c.re.to_f64_lossy(), c.im.to_f64_lossy())).collect();
    let last = SpectralField::new(last.mode_set(), coeffs).unwrap_or_else(|_| SpectralField::zeros(last.mode_set()));
    FlowError::BlowUp { time: time.to_f64_lossy(), last: Box::new(last) }
}

/// Wavenumber of a bin with the Nyquist bin taken as `+n/2`.
fn bin_mode(b: usize, n: usize) -> i64 {
    if b <= n / 2 {
        b as i64
    } else {
        b as i64 - n as i64
    }
}

fn load_grid<T: Real>(fft: &GridFft<T>, phi: &SpectralField<T>) -> Vec<Cplx<T>> {
    let mut buf = vec![czero(); fft.len()];
    let ms = phi.mode_set();
    for (i, c) in phi.coeffs().iter().enumerate() {
        buf[fft.bin(ms.mode(i))] += *c;
    }
    fft.synthesize_in_place(&mut buf);
    buf
}

fn unload_grid<T: Real>(fft: &GridFft<T>, g: &[Cplx<T>], ms: ModeSet) -> Result<SpectralField<T>, SpectralError> {
    crate::spectral::from_grid_with(fft, &GridField { values: g.to_vec() }, ms)
}

/// `e^{iθ}` with modulus one to well below rounding. The linear phases are
/// reused every step, so the `O(ε)` excess in `|cis θ|` would otherwise
/// accumulate linearly in the mass. The larger component is kept (up to a
/// few ulps) and the smaller one solved from `1 - big²`.
fn unit_phase<T: Real>(theta: T) -> Cplx<T> {
    let p = cis(theta);
    let swap = p.im.abs() > p.re.abs();
    let (big, small) = if swap { (p.im, p.re) } else { (p.re, p.im) };
    let ulp = big.abs().log2().floor().exp2() * T::epsilon();
    let mut best: Option<(T, T, T)> = None;
    for i in -3i32..=3 {
        let b = big + T::lit(i as f64) * ulp;
        let sq = b * b;
        let rest = (T::one() - sq) - b.mul_add(b, -sq);
        if rest < T::zero() {
            continue;
        }
        let sm = rest.sqrt().copysign(small);
        let e = modulus_defect(b, sm);
        if best.is_none_or(|(be, ..)| e < be) {
            best = Some((e, b, sm));
        }
    }
    match best {
        Some((_, b, sm)) if swap => Complex::new(sm, b),
        Some((_, b, sm)) => Complex::new(b, sm),
        None => p,
    }
}

/// `|re² + im² - 1|`, evaluated with error-free products.
fn modulus_defect<T: Real>(re: T, im: T) -> T {
    let (a, b) = (re * re, im * im);
    let (la, lb) = (re.mul_add(re, -a), im.mul_add(im, -b));
    let s = a + b;
    let bv = s - a;
    let err = (a - (s - bv)) + (b - bv);
    ((s - T::one()) + err + la + lb).abs()
}

struct GridStepper<'a, T: Real> {
    flow: &'a NlsFlow<T>,
    half_phase: Vec<Cplx<T>>,
    w_bins: Vec<T>,
    h: T,
}

impl<'a, T: Real> GridStepper<'a, T> {
    fn new(flow: &'a NlsFlow<T>, h: T) -> Result<Self, FlowError> {
        let n = flow.fft.len();
        let mut half_phase = Vec::with_capacity(n);
        for b in 0..n {
            let lam = eigenvalue(bin_mode(b, n), flow.config.kappa)?;
            half_phase.push(if b == n / 2 { czero() } else { unit_phase(-T::lit(0.5) * h * lam) });
        }
        let w_bins = (0..n).map(|b| flow.w_table[bin_mode(b, n).unsigned_abs() as usize]).collect();
        Ok(Self { flow, half_phase, w_bins, h })
    }

    fn linear(&self, g: &mut [Cplx<T>]) {
        let fft = &self.flow.fft;
        fft.analyze_in_place(g);
        for (v, p) in g.iter_mut().zip(&self.half_phase) {
            *v = *v * *p;
        }
        fft.synthesize_in_place(g);
    }

    fn step(&self, g: &mut [Cplx<T>]) {
        let fft = &self.flow.fft;
        self.linear(g);
        let mut v: Vec<Cplx<T>> = g.iter().map(|z| Complex::new(z.norm_sqr(), T::zero())).collect();
        fft.analyze_in_place(&mut v);
        for (x, w) in v.iter_mut().zip(&self.w_bins) {
            *x = *x * *w;
        }
        fft.synthesize_in_place(&mut v);
        for (z, pot) in g.iter_mut().zip(&v) {
            *z = *z * cis(-self.h * pot.re);
        }
        self.linear(g);
    }
}

struct GalerkinStepper<'a, T: Real> {
    flow: &'a NlsFlow<T>,
    ms: ModeSet,
    half_phase: Vec<Cplx<T>>,
    /// `ŵ(m)` for `m = -2k..=2k`
    w_full: Vec<T>,
    h: T,
}

impl<'a, T: Real> GalerkinStepper<'a, T> {
    fn new(flow: &'a NlsFlow<T>, ms: ModeSet, h: T) -> Result<Self, FlowError> {
        let half_phase = ms
            .modes()
            .map(|k| eigenvalue(k, flow.config.kappa).map(|l| unit_phase(-T::lit(0.5) * h * l)))
            .collect::<Result<_, _>>()?;
        let w_full = flow.config.potential.fourier_coefficients(2 * ms.k_max)?;
        Ok(Self { flow, ms, half_phase, w_full, h })
    }

    /// `P((w * |u|²)u)` on the mode set.
    fn nonlinearity(&self, u: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let d = u.len();
        if d <= DIRECT_CONVOLUTION_DIM {
            let mut v = density_coeffs(u);
            for (x, w) in v.iter_mut().zip(&self.w_full) {
                *x = *x * *w;
            }
            // out(k) = Σ_m V̂(m) û(k - m), indices shifted by k_max and 2k_max
            let mut out = vec![czero(); d];
            for (k, o) in out.iter_mut().enumerate() {
                for (j, uj) in u.iter().enumerate() {
                    *o += v[k + d - 1 - j] * *uj;
                }
            }
            out
        } else {
            let fft = &self.flow.fft;
            let field = SpectralField::new(self.ms, u.to_vec()).expect("finite state");
            let g = load_grid(fft, &field);
            let mut v: Vec<Cplx<T>> = g.iter().map(|z| Complex::new(z.norm_sqr(), T::zero())).collect();
            fft.analyze_in_place(&mut v);
            let k2 = 2 * self.ms.k_max as i64;
            for (b, x) in v.iter_mut().enumerate() {
                let m = fft.wavenumber(b);
                *x = if m.abs() <= k2 { *x * self.w_full[(m + k2) as usize] } else { czero() };
            }
            fft.synthesize_in_place(&mut v);
            let prod: Vec<Cplx<T>> = g.iter().zip(&v).map(|(a, b)| *a * b.re).collect();
            unload_grid(fft, &prod, self.ms).expect("grid holds the mode set").into_coeffs()
        }
    }

    fn step(&self, u: &mut [Cplx<T>]) -> Result<(), ()> {
        for (c, p) in u.iter_mut().zip(&self.half_phase) {
            *c = *c * *p;
        }
        let u0 = u.to_vec();
        let scale = u0.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt().max(T::min_positive_value());
        // two-stage Gauss collocation for u' = -i h P((w * |u|²)u), solved by fixed-point iteration
        let r = T::lit(3.0).sqrt() / T::lit(6.0);
        let q = T::lit(0.25);
        let a = [[q, q - r], [q + r, q]];
        let mih = Complex::new(T::zero(), -self.h);
        let mut k = [self.nonlinearity(&u0), self.nonlinearity(&u0)];
        for v in k.iter_mut().flatten() {
            *v = *v * mih;
        }
        let mut converged = false;
        let mut prev_change = T::infinity();
        for _ in 0..COLLOCATION_MAX_ITER {
            let mut change = T::zero();
            let mut next = [Vec::new(), Vec::new()];
            for (i, row) in a.iter().enumerate() {
                let stage: Vec<Cplx<T>> =
                    (0..u0.len()).map(|j| u0[j] + k[0][j] * row[0] + k[1][j] * row[1]).collect();
                next[i] = self.nonlinearity(&stage).into_iter().map(|v| v * mih).collect();
                change += next[i].iter().zip(&k[i]).map(|(x, y)| (*x - *y).norm_sqr()).sum::<T>();
            }
            let change = change.sqrt();
            k = next;
            if change <= T::lit(4.0) * T::eps() * scale || (change >= prev_change && change <= T::lit(1e3) * T::eps() * scale) {
                converged = true;
                break;
            }
            prev_change = change;
        }
        if !converged {
            return Err(());
        }
        for (j, c) in u.iter_mut().enumerate() {
            *c = u0[j] + (k[0][j] + k[1][j]) * T::lit(0.5);
        }
        for (c, p) in u.iter_mut().zip(&self.half_phase) {
            *c = *c * *p;
        }
        Ok(())
    }
}

/// `max_{t ∈ grid} ∥S_t φ₀ - S^ε_t φ₀∥₂` for two potentials sharing
/// discretization, sampled every `stride` steps.
pub fn flow_difference<T: Real>(
    phi0: &SpectralField<T>,
    w: &Potential<T>,
    w_eps: &Potential<T>,
    t_final: T,
    config: &FlowConfig<T>,
    stride: usize,
) -> Result<T, FlowError> {
    let a = NlsFlow::new(FlowConfig { potential: w.clone(), ..config.clone() })?;
    let b = NlsFlow::new(FlowConfig { potential: w_eps.clone(), ..config.clone() })?;
    let ta = a.trajectory(phi0, t_final, stride)?;
    let tb = b.trajectory(phi0, t_final, stride)?;
    Ok(ta.iter().zip(&tb).map(|((_, x), (_, y))| x.l2_distance(y)).fold(T::zero(), |m, d| m.max(d)))
}
