//! The Gaussian free field `φ = Σ_k ω_k/√λ_k e^{2πikx}` with `ω_k` i.i.d.
//! standard complex Gaussians, plus Wick-theorem oracles for its moments.

use std::io::{BufRead, Write};

use num_complex::Complex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{czero, Cplx, Real};
use crate::spectral::{eigenvalue, FieldRecord, ModeSet, SpectralError, SpectralField};
use crate::stats::{mean_with_error, Estimate};

#[derive(Debug, Error)]
pub enum FreeFieldError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("Wick oracle supports at most {max} factors, got {got}")]
    TooManyFactors { max: usize, got: usize },
    #[error("empty ensemble")]
    Empty,
    #[error("ensembles are incompatible: {0}")]
    Incompatible(String),
    #[error("ensemble I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed ensemble stream: {0}")]
    Format(String),
}

/// Seed plus stream id. Sample `i` of a stream is drawn from its own
/// generator, so ensembles do not depend on evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Generator for sample `index`.
    pub fn sample_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ splitmix64(self.stream_id)));
        rng.set_stream(index);
        rng
    }

    /// A derived stream, for sub-experiments that need independent draws.
    pub fn child(&self, tag: u64) -> Self {
        Self { seed: self.seed, stream_id: splitmix64(self.stream_id.wrapping_add(tag.wrapping_mul(0x9E37_79B9))) }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Modes in the order they are drawn: `0, 1, -1, 2, -2, …`. Fields with
/// different `k_max` built from the same generator share their low modes.
fn draw_order(k_max: usize) -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=k_max as i64).flat_map(|k| [k, -k]))
}

/// One standard complex Gaussian (density `π⁻¹e^{-|z|²}`).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re * s, im * s)
}

/// Draws `φ̂(k) = ω_k/√λ_k` on `mode_set`.
pub fn sample_free_field<T: Real, R: Rng + ?Sized>(
    mode_set: ModeSet,
    kappa: T,
    rng: &mut R,
) -> Result<SpectralField<T>, SpectralError> {
    let kappa64 = kappa.to_f64_lossy();
    eigenvalue(0, kappa64)?;
    let mut coeffs = vec![czero::<T>(); mode_set.dim()];
    for k in draw_order(mode_set.k_max) {
        let w = complex_gaussian(rng) / eigenvalue(k, kappa64)?.sqrt();
        coeffs[mode_set.index_of(k).unwrap()] = Complex::new(T::lit(w.re), T::lit(w.im));
    }
    SpectralField::new(mode_set, coeffs)
}

/// Free-field samples with their stream indices.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeEnsemble<T> {
    pub stream: RngStream,
    pub mode_set: ModeSet,
    pub kappa: T,
    pub indices: Vec<u64>,
    pub fields: Vec<SpectralField<T>>,
}

impl<T: Real> FreeEnsemble<T> {
    /// Samples with stream indices `range`, in parallel.
    pub fn sample_range(
        mode_set: ModeSet,
        kappa: T,
        stream: RngStream,
        range: std::ops::Range<u64>,
    ) -> Result<Self, SpectralError> {
        let fields = range
            .clone()
            .into_par_iter()
            .map(|i| sample_free_field(mode_set, kappa, &mut stream.sample_rng(i)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { stream, mode_set, kappa, indices: range.collect(), fields })
    }

    pub fn sample(mode_set: ModeSet, kappa: T, stream: RngStream, count: usize) -> Result<Self, SpectralError> {
        Self::sample_range(mode_set, kappa, stream, 0..count as u64)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Union of two ensembles from the same stream, ordered by index.
    /// Associative and commutative; shared indices must hold equal samples.
    pub fn merge(mut self, other: Self) -> Result<Self, FreeFieldError> {
        if self.stream != other.stream || self.mode_set != other.mode_set || self.kappa != other.kappa {
            return Err(FreeFieldError::Incompatible("stream, mode set and kappa must agree".into()));
        }
        let mut pairs: Vec<(u64, SpectralField<T>)> =
            self.indices.drain(..).zip(self.fields.drain(..)).chain(other.indices.into_iter().zip(other.fields)).collect();
        pairs.sort_by_key(|p| p.0);
        let mut out: Vec<(u64, SpectralField<T>)> = Vec::with_capacity(pairs.len());
        for (i, f) in pairs {
            match out.last() {
                Some((j, g)) if *j == i => {
                    if *g != f {
                        return Err(FreeFieldError::Incompatible(format!("conflicting samples at index {i}")));
                    }
                }
                _ => out.push((i, f)),
            }
        }
        let (indices, fields) = out.into_iter().unzip();
        Ok(Self { indices, fields, ..self })
    }

    /// JSON lines: a header `{seed, stream_id, k_max, kappa, count}`, then one
    /// field record per sample.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), FreeFieldError> {
        let header = EnsembleHeader {
            seed: self.stream.seed,
            stream_id: self.stream.stream_id,
            k_max: self.mode_set.k_max,
            kappa: self.kappa.to_f64_lossy(),
            count: self.fields.len(),
            first_index: self.indices.first().copied().unwrap_or(0),
        };
        writeln!(out, "{}", serde_json::to_string(&header).map_err(|e| FreeFieldError::Format(e.to_string()))?)?;
        for f in &self.fields {
            let rec = FieldRecord::from_field(f, self.kappa);
            writeln!(out, "{}", serde_json::to_string(&rec).map_err(|e| FreeFieldError::Format(e.to_string()))?)?;
        }
        Ok(())
    }

    /// Reads what [`write_jsonl`](Self::write_jsonl) wrote. Indices are
    /// assumed contiguous from the header's `first_index`.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, FreeFieldError> {
        let mut lines = input.lines();
        let head = lines.next().ok_or_else(|| FreeFieldError::Format("missing header".into()))??;
        let header: EnsembleHeader = serde_json::from_str(&head).map_err(|e| FreeFieldError::Format(e.to_string()))?;
        let mut fields = Vec::with_capacity(header.count);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FieldRecord = serde_json::from_str(&line).map_err(|e| FreeFieldError::Format(e.to_string()))?;
            if rec.k_max != header.k_max {
                return Err(FreeFieldError::Format("record k_max differs from header".into()));
            }
            fields.push(rec.to_field()?);
        }
        if fields.len() != header.count {
            return Err(FreeFieldError::Format(format!("header promises {} samples, found {}", header.count, fields.len())));
        }
        let start = header.first_index;
        Ok(Self {
            stream: RngStream::new(header.seed, header.stream_id),
            mode_set: ModeSet::new(header.k_max),
            kappa: T::lit(header.kappa),
            indices: (start..start + header.count as u64).collect(),
            fields,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleHeader {
    pub seed: u64,
    pub stream_id: u64,
    pub k_max: usize,
    pub kappa: f64,
    pub count: usize,
    #[serde(default)]
    pub first_index: u64,
}

/// A linear factor `φ(g) = ⟨g, φ⟩ = Σ_k conj(ĝ(k)) φ̂(k)`, or its conjugate.
#[derive(Clone, Debug, PartialEq)]
pub struct WickFactor<T> {
    pub g: SpectralField<T>,
    pub conjugated: bool,
}

impl<T: Real> WickFactor<T> {
    pub fn new(g: SpectralField<T>, conjugated: bool) -> Self {
        Self { g, conjugated }
    }

    /// `φ̂(k)` (or its conjugate) as a factor on `mode_set`.
    pub fn mode(mode_set: ModeSet, k: i64, conjugated: bool) -> Result<Self, SpectralError> {
        Ok(Self { g: SpectralField::plane_wave(mode_set, k, Complex::new(T::one(), T::zero()))?, conjugated })
    }

    pub fn evaluate(&self, phi: &SpectralField<T>) -> Cplx<T> {
        let k = self.g.mode_set().k_max as i64;
        let v: Cplx<T> = (-k..=k).map(|m| self.g.coeff(m).conj() * phi.coeff(m)).sum();
        if self.conjugated {
            v.conj()
        } else {
            v
        }
    }
}

pub const WICK_MAX_FACTORS: usize = 8;

/// `E_μ[Π factors]` by summing over complete pairings of each `φ` factor
/// with a `φ̄` factor; each pair contributes `⟨g, h⁻¹ g̃⟩`.
pub fn wick_moment_oracle<T: Real>(factors: &[WickFactor<T>], kappa: T) -> Result<Cplx<T>, FreeFieldError> {
    if factors.len() > WICK_MAX_FACTORS {
        return Err(FreeFieldError::TooManyFactors { max: WICK_MAX_FACTORS, got: factors.len() });
    }
    let plain: Vec<&SpectralField<T>> = factors.iter().filter(|f| !f.conjugated).map(|f| &f.g).collect();
    let conj: Vec<&SpectralField<T>> = factors.iter().filter(|f| f.conjugated).map(|f| &f.g).collect();
    if plain.len() != conj.len() {
        return Ok(czero());
    }
    let n = plain.len();
    // covariance E[φ(g) conj φ(g̃)] = Σ_k conj ĝ(k) g̃(k) / λ_k
    let mut cov = vec![czero::<T>(); n * n];
    for i in 0..n {
        for j in 0..n {
            let k = plain[i].mode_set().k_max.max(conj[j].mode_set().k_max) as i64;
            let mut s = czero();
            for m in -k..=k {
                s += plain[i].coeff(m).conj() * conj[j].coeff(m) / eigenvalue(m, kappa)?;
            }
            cov[i * n + j] = s;
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = czero();
    permutations(&mut perm, 0, &mut |p| {
        total += p.iter().enumerate().fold(Complex::new(T::one(), T::zero()), |acc, (i, j)| acc * cov[i * n + *j]);
    });
    Ok(total)
}

fn permutations(p: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == p.len() {
        visit(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permutations(p, start + 1, visit);
        p.swap(start, i);
    }
}

/// Sample mean and standard error of a real observable.
pub fn empirical_moment<T: Real>(
    fields: &[SpectralField<T>],
    observable: impl Fn(&SpectralField<T>) -> T + Sync,
) -> Result<Estimate<T>, FreeFieldError>
where
    T: Sync,
{
    let xs: Vec<T> = fields.par_iter().map(&observable).collect();
    mean_with_error(&xs).ok_or(FreeFieldError::Empty)
}

/// Real and imaginary parts of a complex observable, estimated separately.
pub fn empirical_moment_complex<T: Real>(
    fields: &[SpectralField<T>],
    observable: impl Fn(&SpectralField<T>) -> Cplx<T> + Sync,
) -> Result<(Estimate<T>, Estimate<T>), FreeFieldError> {
    let xs: Vec<Cplx<T>> = fields.par_iter().map(&observable).collect();
    let re: Vec<T> = xs.iter().map(|z| z.re).collect();
    let im: Vec<T> = xs.iter().map(|z| z.im).collect();
    Ok((mean_with_error(&re).ok_or(FreeFieldError::Empty)?, mean_with_error(&im).ok_or(FreeFieldError::Empty)?))
}

/// Product of factors evaluated on one field.
pub fn monomial<T: Real>(factors: &[WickFactor<T>], phi: &SpectralField<T>) -> Cplx<T> {
    factors.iter().fold(Complex::new(T::one(), T::zero()), |acc, f| acc * f.evaluate(phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{trace_inverse_full, OneBodySpectrum};

    #[test]
    fn same_stream_reproduces_bit_exactly() {
        let ms = ModeSet::new(3);
        let s = RngStream::new(42, 7);
        let a = FreeEnsemble::<f64>::sample(ms, 1.0, s, 50).unwrap();
        let b = FreeEnsemble::<f64>::sample(ms, 1.0, s, 50).unwrap();
        assert_eq!(a, b);
        let c = FreeEnsemble::<f64>::sample(ms, 1.0, RngStream::new(42, 8), 50).unwrap();
        assert_ne!(a.fields[0], c.fields[0]);
    }

    #[test]
    fn merge_is_order_independent() {
        let ms = ModeSet::new(2);
        let s = RngStream::new(1, 0);
        let all = FreeEnsemble::<f64>::sample(ms, 1.0, s, 30).unwrap();
        let a = FreeEnsemble::sample_range(ms, 1.0, s, 0..10).unwrap();
        let b = FreeEnsemble::sample_range(ms, 1.0, s, 10..20).unwrap();
        let c = FreeEnsemble::sample_range(ms, 1.0, s, 20..30).unwrap();
        let left = a.clone().merge(b.clone()).unwrap().merge(c.clone()).unwrap();
        let right = c.merge(a.merge(b).unwrap()).unwrap();
        assert_eq!(left, all);
        assert_eq!(right, all);
    }

    #[test]
    fn low_modes_are_shared_across_cutoffs() {
        let s = RngStream::new(9, 0);
        let small = sample_free_field::<f64, _>(ModeSet::new(2), 1.0, &mut s.sample_rng(3)).unwrap();
        let large = sample_free_field::<f64, _>(ModeSet::new(6), 1.0, &mut s.sample_rng(3)).unwrap();
        for k in -2..=2 {
            assert_eq!(small.coeff(k), large.coeff(k));
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let ens = FreeEnsemble::<f64>::sample(ModeSet::new(2), 0.5, RngStream::new(3, 1), 5).unwrap();
        let mut buf = Vec::new();
        ens.write_jsonl(&mut buf).unwrap();
        let back = FreeEnsemble::<f64>::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, ens);
    }

    #[test]
    fn wick_examples() {
        let ms = ModeSet::new(2);
        let kappa = 1.0f64;
        let lam = eigenvalue(1, kappa).unwrap();
        let e = |conj| WickFactor::<f64>::mode(ms, 1, conj).unwrap();
        let two = wick_moment_oracle(&[e(true), e(false)], kappa).unwrap();
        assert!((two.re - 1.0 / lam).abs() < 1e-15 && two.im == 0.0);
        let four = wick_moment_oracle(&[e(true), e(true), e(false), e(false)], kappa).unwrap();
        assert!((four.re - 2.0 / (lam * lam)).abs() < 1e-15);
        assert_eq!(wick_moment_oracle(&[e(true), e(false), e(false)], kappa).unwrap(), czero());
        assert_eq!(wick_moment_oracle(&[e(false), e(false)], kappa).unwrap(), czero());
        let nine = vec![e(true); 9];
        assert!(matches!(wick_moment_oracle(&nine, kappa), Err(FreeFieldError::TooManyFactors { .. })));
    }

    #[test]
    fn moments_match_free_covariance() {
        let ms = ModeSet::new(3);
        let kappa = 1.0f64;
        let n = 100_000;
        let ens = FreeEnsemble::<f64>::sample(ms, kappa, RngStream::new(2024, 0), n).unwrap();
        for k in ms.modes() {
            let lam = eigenvalue(k, kappa).unwrap();
            let (re, im) = empirical_moment_complex(&ens.fields, |f| f.coeff(k)).unwrap();
            let sigma = 1.0 / (lam * n as f64).sqrt();
            assert!(re.value.abs() < 4.0 * sigma && im.value.abs() < 4.0 * sigma);
            let second = empirical_moment(&ens.fields, |f| f.coeff(k).norm_sqr()).unwrap();
            // |ω|²/λ is Exp(λ): variance 1/λ²
            assert!((second.value - 1.0 / lam).abs() < 4.0 / (lam * (n as f64).sqrt()));
        }
        let mass = empirical_moment(&ens.fields, |f| f.mass()).unwrap();
        let tr = OneBodySpectrum::new(ms, kappa).unwrap().trace_inverse();
        assert!(mass.z_score(tr) < 4.0);
        assert!(tr < trace_inverse_full(kappa));
        let quartic = empirical_moment(&ens.fields, |f| f.coeff(1).norm_sqr().powi(2)).unwrap();
        let lam1 = eigenvalue(1, kappa).unwrap();
        assert!(quartic.z_score(2.0 / (lam1 * lam1)) < 4.0);
        let one = empirical_moment(&ens.fields, |_| 1.0).unwrap();
        assert_eq!((one.value, one.std_error), (1.0, 0.0));
        assert!(matches!(empirical_moment::<f64>(&[], |_| 1.0), Err(FreeFieldError::Empty)));
    }
}
